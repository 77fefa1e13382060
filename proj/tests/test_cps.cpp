#include <doctest.h>

#include "semtrans/anf.hpp"
#include "semtrans/cfa.hpp"
#include "semtrans/cps.hpp"
#include "support/testutil.hpp"

using namespace semtrans;
using namespace semtrans::syntax;
using semtrans::cps::Atomicity;
using semtrans::cps::Cps;

namespace {

struct Fixture {
    Program program;
    cfa::Analysis analysis;

    explicit Fixture(const std::string& source)
        : program(anf::normalizeProgram(parseProgram(source))) {
        analysis = cfa::analyze(program);
    }
};

const TermPtr& letBound(const TermPtr& t) { return t->as<Term::Let>()->bound; }

// Finds the first application in preorder.
TermPtr firstApp(const TermPtr& t) {
    if (t->as<Term::App>()) return t;
    if (auto* f = t->as<Term::Fun>()) return firstApp(f->body);
    if (auto* l = t->as<Term::Let>()) {
        if (auto a = firstApp(l->bound)) return a;
        return firstApp(l->body);
    }
    if (auto* m = t->as<Term::Match>()) {
        for (const auto& [p, b] : m->branches)
            if (auto a = firstApp(b)) return a;
        return nullptr;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("trivial commands") {
    Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath("lambda-cbv.sem")));
    Cps t(f.program, f.analysis);

    CHECK(t.trivial(mkLit(Lit{std::int64_t{42}})));

    // (env x) calls only the atomic environment functions.
    const auto* m = f.program.findFunction("eval")->body->as<Term::Match>();
    REQUIRE(m != nullptr);
    TermPtr stringBranch = m->branches[0].second;
    CHECK(t.trivial(stringBranch));  // (env x)

    // (eval env fn) calls the non-atomic eval.
    TermPtr appBranch = m->branches[2].second;
    CHECK(!t.trivial(letBound(appBranch)));
}

TEST_CASE("cps clauses for variables, calls and errors") {
    Fixture f("(def g (x) (g x)) (def main ([Integer n]) (g n))");
    Cps t(f.program, f.analysis);

    TermPtr var = mkVar("x");
    std::string printed = pretty(t.cpsTerm(var, "$k"));
    CHECK(printed == "($k x)");

    // A call to a non-atomic function gets the continuation appended.
    TermPtr call = firstApp(f.program.findFunction("g")->body);
    REQUIRE(call != nullptr);
    CHECK(pretty(t.cpsTerm(call, "$k")) == "(g x $k)");

    TermPtr err = mkError("e");
    CHECK(pretty(t.cpsTerm(err, "$k")) == "(error \"e\")");
}

TEST_CASE("direct clauses for calls") {
    Fixture f(
        "(def g #:atomic (x) x) (def h (x) (h x)) "
        "(def main ([Integer n]) (let a (g n) (h a)))");
    Cps t(f.program, f.analysis);

    const TermPtr& body = f.program.main().body;
    const auto* l = body->as<Term::Let>();
    REQUIRE(l != nullptr);
    // All-atomic call stays untouched in direct style.
    CHECK(pretty(t.directTerm(l->bound)) == "(g n)");
    // A tail call to a CPS function gets a fresh identity continuation.
    std::string tail = pretty(t.directTerm(l->body));
    CHECK(tail.find("(fun ($v") != std::string::npos);
    CHECK(tail.find("$k") != std::string::npos);

    // The let-of-call clause chains the identity continuation allocation.
    std::string whole = pretty(t.directTerm(body));
    Program reparsed = parseProgram("(def main ([Integer n]) " + whole + ")");
    CHECK(anf::isAnfExpr(reparsed.main().body));
}

TEST_CASE("an all-atomic program is unchanged modulo relabeling") {
    Fixture f(
        "(def g #:atomic (x) (+ x 1)) "
        "(def main ([Integer n]) (g (g n)))");
    Program out = cps::cpsProgram(f.program, f.analysis);
    CHECK(structuralEq(out, f.program));
}

TEST_CASE("factorial gains a continuation parameter") {
    Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath("factorial.sem")));
    Program out = cps::cpsProgram(f.program, f.analysis);
    const FunDef* fact = out.findFunction("factorial");
    REQUIRE(fact != nullptr);
    CHECK(fact->params.size() == 2);  // arity shift of exactly one
    CHECK(out.main().params.size() == 1);  // main is implicitly atomic
    CHECK(anf::isAnf(out));

    // The recursive call passes a continuation that multiplies.
    std::string printed = pretty(out);
    CHECK(printed.find("(factorial $3 $k1)") != std::string::npos);
    CHECK(printed.find("(* n") != std::string::npos);
}

TEST_CASE("cps output stays in ANF and preserves behavior on the corpus") {
    for (const char* name :
         {"lambda-cbv.sem", "factorial.sem", "lambda-cbn.sem", "nbe.sem"}) {
        Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath(name)));
        Program out = cps::cpsProgram(f.program, f.analysis);
        CHECK(anf::isAnf(out));
        std::vector<Label> labels;
        for (const auto& fn : out.functions) collectLabels(fn.body, labels);
        CHECK(std::set<Label>(labels.begin(), labels.end()).size() == labels.size());
    }
}

TEST_CASE("non-atomic calls sit in tail position after cps") {
    Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath("lambda-cbv.sem")));
    Program out = cps::cpsProgram(f.program, f.analysis);
    // No let may bind a call to a function that was given a continuation;
    // eval is the only transformed top-level function here.
    std::function<void(const TermPtr&)> walk = [&](const TermPtr& t) {
        if (auto* l = t->as<Term::Let>()) {
            if (auto* a = l->bound->as<Term::App>())
                CHECK(a->fn->varName() != "eval");
            walk(l->bound);
            walk(l->body);
        } else if (auto* fn = t->as<Term::Fun>()) {
            walk(fn->body);
        } else if (auto* m = t->as<Term::Match>()) {
            for (const auto& [p, b] : m->branches) walk(b);
        }
    };
    for (const auto& fn : out.functions) walk(fn.body);
}

TEST_CASE("arity shift applies exactly to non-atomic functions") {
    Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath("nbe.sem")));
    Program out = cps::cpsProgram(f.program, f.analysis);
    for (const auto& fn : out.functions) {
        size_t before = f.program.findFunction(fn.name)->params.size();
        bool atomic = fn.name == "main" || fn.anns.atomic;
        CHECK(fn.params.size() == before + (atomic ? 0 : 1));
    }
}

TEST_CASE("mixed atomicity is rejected with the offending label") {
    Fixture f(
        "(def f #:atomic (x) x) (def g (x) x) "
        "(def main ([Integer n]) (let h (match n (0 f) (_ g)) (h n)))");
    try {
        cps::cpsProgram(f.program, f.analysis);
        CHECK(false);
    } catch (const MixedAtomicityError& e) {
        CHECK(e.label >= 0);
        CHECK(std::string(e.what()).find("label") != std::string::npos);
    }
}

TEST_CASE("dead call sites are kept in direct style with a warning") {
    Fixture f(
        "(def g (x) x) "
        "(def main ([Integer n]) (let f (fun (y) (g y)) 5))");
    std::set<std::string> warnings;
    Program out = cps::cpsProgram(f.program, f.analysis, &warnings);
    CHECK(!warnings.empty());
    // The dead call inside the unused closure keeps its shape (plus the
    // closure's own continuation parameter).
    CHECK(pretty(out).find("(g y") != std::string::npos);
}

TEST_CASE("continuations passed to branches are variables, so no code is duplicated") {
    Fixture f(semtrans::testing::readFile(semtrans::testing::corpusPath("factorial.sem")));
    Cps t(f.program, f.analysis);
    const FunDef* fact = f.program.findFunction("factorial");
    TermPtr out = t.cpsTerm(fact->body, "$k");
    // Every branch of the produced match ends by mentioning the same
    // continuation variable; the fun node count equals the one of a single
    // continuation, not one per branch.
    std::function<int(const TermPtr&)> countFuns = [&](const TermPtr& t2) -> int {
        int n = t2->as<Term::Fun>() ? 1 : 0;
        if (auto* fn = t2->as<Term::Fun>()) n += countFuns(fn->body);
        else if (auto* a = t2->as<Term::App>()) {
            n += countFuns(a->fn);
            for (const auto& x : a->args) n += countFuns(x);
        } else if (auto* r = t2->as<Term::Record>()) {
            for (const auto& x : r->fields) n += countFuns(x);
        } else if (auto* l = t2->as<Term::Let>()) {
            n += countFuns(l->bound) + countFuns(l->body);
        } else if (auto* m = t2->as<Term::Match>()) {
            n += countFuns(m->scrutinee);
            for (const auto& [p, b] : m->branches) n += countFuns(b);
        }
        return n;
    };
    CHECK(countFuns(out) == 1);  // only the multiplication continuation
}
