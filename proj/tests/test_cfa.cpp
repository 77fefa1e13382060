#include <doctest.h>

#include "semtrans/anf.hpp"
#include "semtrans/cfa.hpp"
#include "semtrans/interp.hpp"
#include "support/testutil.hpp"

using namespace semtrans;
using namespace semtrans::syntax;
using namespace semtrans::cfa;

namespace {

Program loadAnf(const std::string& name) {
    return anf::normalizeProgram(semtrans::testing::loadCorpus(name));
}

// Label of the operator at the unique call site whose operator variable has
// the given name.
std::optional<Label> operatorSite(const TermPtr& t, const std::string& name) {
    if (auto* a = t->as<Term::App>()) {
        if (a->fn->isVar() && a->fn->varName() == name) return a->fn->label;
        for (const auto& x : a->args)
            if (auto l = operatorSite(x, name)) return l;
        return operatorSite(a->fn, name);
    }
    if (auto* f = t->as<Term::Fun>()) return operatorSite(f->body, name);
    if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields)
            if (auto l = operatorSite(x, name)) return l;
        return std::nullopt;
    }
    if (auto* l = t->as<Term::Let>()) {
        if (auto s = operatorSite(l->bound, name)) return s;
        return operatorSite(l->body, name);
    }
    if (auto* m = t->as<Term::Match>()) {
        for (const auto& [p, b] : m->branches)
            if (auto s = operatorSite(b, name)) return s;
        return std::nullopt;
    }
    return std::nullopt;
}

std::optional<Label> operatorSite(const Program& p, const std::string& fn,
                                  const std::string& name) {
    return operatorSite(p.findFunction(fn)->body, name);
}

std::set<std::string> calleeNames(const Analysis& a, Label site) {
    std::set<std::string> out;
    auto it = a.callees.find(site);
    if (it == a.callees.end()) return out;
    for (const auto& id : it->second) {
        switch (id.kind) {
            case FunId::Kind::Prim: out.insert("prim:" + id.name); break;
            case FunId::Kind::Top: out.insert("top:" + id.name); break;
            case FunId::Kind::Closure: out.insert("fun"); break;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("the store is seeded from datatype definitions") {
    Program p = loadAnf("lambda-cbv.sem");
    AbstractMachine m(p);
    AbstractConfig c = m.initConfig();
    Addr term = m.seedAddr("type:Term");
    const auto& vals = c.store.valsAt(term);
    REQUIRE(vals.size() == 3);
    bool sawString = false, sawAbs = false, sawApp = false;
    for (const AbsVal& v : vals) {
        if (v.kind == AbsVal::Kind::Base && v.base == BaseTp::String) sawString = true;
        if (v.kind == AbsVal::Kind::Record && v.name == "Abs") {
            sawAbs = true;
            REQUIRE(v.fields.size() == 2);
            CHECK(v.fields[0] == m.seedAddr("type:String"));
            CHECK(v.fields[1] == term);
        }
        if (v.kind == AbsVal::Kind::Record && v.name == "App") {
            sawApp = true;
            CHECK(v.fields == std::vector<Addr>{term, term});
        }
    }
    CHECK(sawString);
    CHECK(sawAbs);
    CHECK(sawApp);
    // One initial configuration: main's body under the halt continuation.
    REQUIRE(c.configs.size() == 1);
    CHECK(c.configs.begin()->mode == PartialConfig::Mode::Eval);
    const auto& frames = c.store.framesAt(c.configs.begin()->kont);
    REQUIRE(frames.size() == 1);
    CHECK(frames.begin()->halt);
}

TEST_CASE("base and Any seeds") {
    Program p = anf::normalizeProgram(parseProgram("(def main ([Integer n]) n)"));
    AbstractMachine m(p);
    AbstractConfig c = m.initConfig();
    const auto& vals = c.store.valsAt(m.seedAddr("type:Integer"));
    REQUIRE(vals.size() == 1);
    CHECK(vals.begin()->kind == AbsVal::Kind::Base);
    CHECK(c.configs.size() == 1);

    Program q = anf::normalizeProgram(parseProgram("(def main ([Any x]) x)"));
    AbstractMachine mq(q);
    AbstractConfig cq = mq.initConfig();
    const auto& anyVals = cq.store.valsAt(mq.seedAddr("type:Any"));
    REQUIRE(anyVals.size() == 1);
    CHECK(anyVals.begin()->kind == AbsVal::Kind::Any);
}

TEST_CASE("an undeclared main parameter type is an analysis error") {
    Program p = parseProgram("(def main ([Integer n]) n)");
    // Forge a parameter annotation that names a missing type.
    Program bad = p;
    bad.functions[0].params[0].second = TypeRef::mkNamed("Missing");
    CHECK_THROWS_AS(cfa::analyze(anf::normalizeProgram(bad)), AnalysisError);
}

TEST_CASE("variable evaluation copies into the occurrence label") {
    Program p = anf::normalizeProgram(parseProgram("(def main ([Integer n]) n)"));
    Analysis a = cfa::analyze(p);
    // main's body is the variable n, labeled 0; its value set must contain
    // the Integer token copied from the parameter's address.
    const auto& vals = a.rawStore.valsAt(p.main().body->label);
    REQUIRE(vals.size() == 1);
    CHECK(vals.begin()->kind == AbsVal::Kind::Base);
    CHECK(vals.begin()->base == BaseTp::Integer);
}

TEST_CASE("a single local function is its call site's only callee") {
    Program p = anf::normalizeProgram(
        parseProgram("(def main ([Integer n]) (let f (fun (x) x) (f n)))"));
    Analysis a = cfa::analyze(p);
    auto site = operatorSite(p, "main", "f");
    REQUIRE(site.has_value());
    CHECK(calleeNames(a, *site) == std::set<std::string>{"fun"});
    CHECK(a.callees.at(*site).size() == 1);
}

TEST_CASE("environment lookups in the cbv interpreter see init and the extend closure") {
    Program p = loadAnf("lambda-cbv.sem");
    Analysis a = cfa::analyze(p);
    auto site = operatorSite(p, "eval", "env");
    REQUIRE(site.has_value());
    auto names = calleeNames(a, *site);
    CHECK(names == std::set<std::string>{"top:init", "fun"});
    CHECK(a.callees.at(*site).size() == 2);
}

TEST_CASE("applying an evaluated function sees only the Abs closure") {
    Program p = loadAnf("lambda-cbv.sem");
    Analysis a = cfa::analyze(p);
    // The App branch binds the evaluated operator to an administrative
    // variable ($1; the Abs branch consumed $0) and applies it; its callees
    // are exactly the Abs-branch closure.
    auto site = operatorSite(p, "eval", "$1");
    REQUIRE(site.has_value());
    const auto& ids = a.callees.at(*site);
    REQUIRE(ids.size() == 1);
    CHECK(ids.begin()->kind == FunId::Kind::Closure);
}

TEST_CASE("abstract transition is monotone") {
    Program p = loadAnf("lambda-cbv.sem");
    AbstractMachine m(p);
    AbstractConfig c = m.initConfig();
    for (int i = 0; i < 30; i++) {
        AbstractConfig next = m.abstractStep(c);
        for (const auto& g : c.configs) CHECK(next.configs.count(g));
        for (const auto& [addr, vs] : c.store.vals)
            for (const auto& v : vs) CHECK(next.store.valsAt(addr).count(v));
        for (const auto& [addr, ks] : c.store.konts)
            for (const auto& k : ks) CHECK(next.store.framesAt(addr).count(k));
        if (next == c) break;
        c = next;
    }
}

TEST_CASE("analysis is deterministic") {
    Program p = loadAnf("nbe.sem");
    Analysis a = cfa::analyze(p);
    Analysis b = cfa::analyze(p);
    CHECK(a.callees == b.callees);
    CHECK(a.rawStore == b.rawStore);
}

TEST_CASE("concrete callees are contained in abstract callees") {
    for (const char* name : {"lambda-cbv.sem", "factorial.sem"}) {
        Program p = loadAnf(name);
        Analysis a = cfa::analyze(p);
        std::map<Label, std::set<FunId>> recorded;
        interp::RunOptions opts;
        opts.onApply = [&](Label site, const interp::AppliedFn& fn) {
            switch (fn.kind) {
                case interp::AppliedFn::Kind::Prim:
                    recorded[site].insert(FunId::prim(fn.name));
                    break;
                case interp::AppliedFn::Kind::Top:
                    recorded[site].insert(FunId::top(fn.name));
                    break;
                case interp::AppliedFn::Kind::Closure:
                    recorded[site].insert(FunId::closure(fn.funLabel));
                    break;
            }
        };
        std::string arg = std::string(name) == "factorial.sem"
                              ? "6"
                              : "{App {Abs \"x\" \"x\"} {Abs \"y\" \"y\"}}";
        interp::run(p, {interp::parseValue(arg)}, opts);
        REQUIRE(!recorded.empty());
        for (const auto& [site, ids] : recorded) {
            REQUIRE(a.callees.count(site));
            for (const auto& id : ids) CHECK(a.callees.at(site).count(id));
        }
    }
}

TEST_CASE("dead call sites keep an empty callee line in the dump") {
    Program p = anf::normalizeProgram(parseProgram(
        "(def g (x) x) (def main ([Integer n]) (let f (fun (y) (g y)) 5))"));
    Analysis a = cfa::analyze(p);
    auto site = operatorSite(p, "main", "g");
    REQUIRE(site.has_value());
    CHECK(a.callees.at(*site).empty());
    std::string dump = cfa::dumpAnalysis(a, p);
    CHECK(dump.find("(callees))") != std::string::npos);

    Program q = anf::normalizeProgram(
        parseProgram("(def main ([Integer n]) (let f (fun (x) x) (f n)))"));
    Analysis aq = cfa::analyze(q);
    std::string dq = cfa::dumpAnalysis(aq, q);
    CHECK(dq.find("(site") != std::string::npos);
    CHECK(dq.find("(fun l") != std::string::npos);
}

TEST_CASE("fixed point is reached within the lattice bound") {
    for (const char* name :
         {"lambda-cbv.sem", "factorial.sem", "lambda-cbn.sem", "nbe.sem"}) {
        Program p = loadAnf(name);
        Analysis a = cfa::analyze(p);
        long bound = static_cast<long>(a.stats.labelCount) *
                     (a.stats.maxValsPerAddr + a.stats.maxFramesPerAddr);
        CHECK(a.stats.sweeps <= bound);
        CHECK(a.stats.transitions <= 1000000);
    }
}
