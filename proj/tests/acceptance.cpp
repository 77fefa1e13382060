// Acceptance suite: exercises the whole transformer against the shapes and
// behaviors the derived machines must have. Prints one pass/fail line per
// criterion; exits nonzero if any fails.

#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "semtrans/anf.hpp"
#include "semtrans/cfa.hpp"
#include "semtrans/cli.hpp"
#include "semtrans/cps.hpp"
#include "semtrans/inliner.hpp"
#include "semtrans/interp.hpp"
#include "semtrans/pipeline.hpp"
#include "support/gen.hpp"
#include "support/testutil.hpp"

using namespace semtrans;
using namespace semtrans::syntax;
using semtrans::testing::corpusPath;
using semtrans::testing::dataPath;
using semtrans::testing::pinnedNames;
using semtrans::testing::readFile;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw Failure(msg);
}

const std::vector<std::string>& corpusNames() {
    static const std::vector<std::string> names = {"lambda-cbv.sem", "factorial.sem",
                                                   "lambda-cbn.sem", "nbe.sem"};
    return names;
}

std::string testsFileOf(const std::string& program) {
    return program.substr(0, program.size() - 4) + ".tests";
}

pipeline::Result& pipelineOf(const std::string& name) {
    static std::map<std::string, pipeline::Result> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache.emplace(name, pipeline::transform(readFile(corpusPath(name)))).first;
    return it->second;
}

std::string runMachine(const Program& machine, const std::string& arg) {
    Program runnable = anf::isAnf(machine) ? machine : anf::normalizeProgram(machine);
    auto r = interp::run(runnable, {interp::parseValue(arg)});
    require(r.ok(), "machine run failed: " + r.error->str());
    return interp::printValue(r.value);
}

// --- criterion 1 -----------------------------------------------------------

void cekDerivation() {
    auto& r = pipelineOf("lambda-cbv.sem");
    Program expected = parseProgram(readFile(dataPath("expected_cek.sem")));
    std::set<std::string> pinned = pinnedNames(r.parsed);
    std::string why;
    require(equivalentModuloNames(r.inlined, expected, pinned, &why),
            "machine differs from the CEK machine: " + why);

    // eval plus two generated dispatchers next to init/extend/main.
    require(r.inlined.functions.size() == 6, "expected 6 functions");
    require(r.applies.size() == 2, "expected 2 generated dispatch functions");

    auto decls = r.inlined.declaredLabels();
    require(decls.at("Closure") == 3, "Closure must capture env, x and body");
    std::multiset<int> contArities;
    for (const auto& label : r.generatedLabels)
        if (label != "Closure") contArities.insert(decls.at(label));
    require(contArities == std::multiset<int>{0, 2, 3},
            "continuation constructors must have arities 0 (halt), 3 (operator frame) "
            "and 2 (operand frame)");
    require(r.inlined.findFunction("eval")->params.size() == 3, "eval must take a continuation");
}

// --- criterion 2 -----------------------------------------------------------

void cpsIntermediate() {
    std::string src = readFile(corpusPath("lambda-cbv.sem"));
    auto r = pipeline::transform(src, pipeline::Stage::Cps);
    Program inlined = inliner::inlineProgram(r.cps);
    Program expected = parseProgram(readFile(dataPath("expected_cps.sem")));
    std::set<std::string> pinned = pinnedNames(r.parsed);
    std::string why;
    require(equivalentModuloNames(inlined, expected, pinned, &why),
            "cps+inline differs from the CPS interpreter: " + why);
    require(inlined.findFunction("eval")->params.size() == 3, "eval must have arity 3");
}

// --- criterion 3 -----------------------------------------------------------

void factorialMachine() {
    auto& r = pipelineOf("factorial.sem");
    Program expected = parseProgram(readFile(dataPath("expected_factorial_machine.sem")));
    std::set<std::string> pinned = pinnedNames(r.parsed);
    std::string why;
    require(equivalentModuloNames(r.inlined, expected, pinned, &why),
            "machine differs from the factorial machine: " + why);
    require(r.generatedLabels.size() == 2, "expected the Cont and Halt constructors");
    require(r.applies.size() == 1, "expected one continue dispatcher");
    require(runMachine(r.inlined, "5") == "120", "(check (5) 120)");
    require(runMachine(r.inlined, "0") == "1", "(check (0) 1)");
    require(runMachine(r.inlined, "-3") == "1", "(check (-3) 1)");
}

// --- criterion 4 -----------------------------------------------------------

void nbeMachine() {
    auto& r = pipelineOf("nbe.sem");
    int contDispatchers = 0;
    for (const auto& a : r.applies)
        if (a.argCount == 1) contDispatchers++;
    require(contDispatchers == 2,
            "expected two continuation dispatch classes (evaluation and reification), got " +
                std::to_string(contDispatchers));

    auto tests = pipeline::parseCheckFile(readFile(corpusPath("nbe.tests")));
    require(tests.size() >= 3, "need at least three lambda terms");
    auto outcome = pipeline::runChecks(r, tests);
    require(outcome.ok, "differential checks disagree:\n" + outcome.report);
}

// --- criterion 5 -----------------------------------------------------------

void differentialSuite() {
    for (const auto& name : corpusNames()) {
        auto& r = pipelineOf(name);
        auto tests = pipeline::parseCheckFile(readFile(corpusPath(testsFileOf(name))));
        auto outcome = pipeline::runChecks(r, tests);
        require(outcome.ok, name + " disagrees:\n" + outcome.report);
    }
}

// --- criterion 6 -----------------------------------------------------------

void recordApplies(const Program& program, const std::vector<interp::ValuePtr>& args,
                   std::map<Label, std::set<cfa::FunId>>& recorded) {
    interp::RunOptions opts;
    opts.onApply = [&](Label site, const interp::AppliedFn& fn) {
        switch (fn.kind) {
            case interp::AppliedFn::Kind::Prim:
                recorded[site].insert(cfa::FunId::prim(fn.name));
                break;
            case interp::AppliedFn::Kind::Top:
                recorded[site].insert(cfa::FunId::top(fn.name));
                break;
            case interp::AppliedFn::Kind::Closure:
                recorded[site].insert(cfa::FunId::closure(fn.funLabel));
                break;
        }
    };
    interp::run(program, args, opts);
}

void cfaSoundness() {
    long sitesChecked = 0;
    for (const auto& name : corpusNames()) {
        auto& r = pipelineOf(name);
        auto tests = pipeline::parseCheckFile(readFile(corpusPath(testsFileOf(name))));
        for (const auto& [program, analysis] :
             {std::pair<const Program&, const cfa::Analysis&>{r.anf, r.analysisAnf},
              std::pair<const Program&, const cfa::Analysis&>{r.cps, r.analysisCps}}) {
            std::map<Label, std::set<cfa::FunId>> recorded;
            for (const auto& t : tests) recordApplies(program, t.args, recorded);
            require(!recorded.empty(), name + ": no call sites executed");
            for (const auto& [site, ids] : recorded) {
                auto it = analysis.callees.find(site);
                require(it != analysis.callees.end(),
                        name + ": executed site " + std::to_string(site) + " unknown");
                for (const auto& id : ids) {
                    require(it->second.count(id) > 0,
                            name + ": callee " + id.str() + " missing at site " +
                                std::to_string(site));
                    sitesChecked++;
                }
            }
        }
    }
    require(sitesChecked > 50, "too few recorded applications");
}

// --- criterion 7 -----------------------------------------------------------

void anfTotality() {
    for (const auto& name : corpusNames()) {
        auto& r = pipelineOf(name);
        require(anf::isAnf(r.anf), name + ": normalize output not in ANF");
        require(anf::isAnf(r.cps), name + ": cps output not in ANF");
    }
    semtrans::testing::ProgramGen gen(2026);
    int cpsChecked = 0;
    for (int i = 0; i < 1000; i++) {
        Program p = gen.program(6);
        Program n = anf::normalizeProgram(p);
        require(anf::isAnf(n), "random program " + std::to_string(i) + " not normalized");
        try {
            cfa::Analysis a = cfa::analyze(n);
            Program c = cps::cpsProgram(n, a);
            require(anf::isAnf(c),
                    "random program " + std::to_string(i) + ": cps output not in ANF");
            cpsChecked++;
        } catch (const MixedAtomicityError&) {
            // Randomly mixed atomicity is legitimately rejected.
        }
    }
    require(cpsChecked > 500, "too few random programs survived cps");
}

// --- criterion 8 -----------------------------------------------------------

void terminationBound() {
    for (const auto& name : corpusNames()) {
        auto& r = pipelineOf(name);
        for (const cfa::Analysis* a : {&r.analysisAnf, &r.analysisCps}) {
            long bound = static_cast<long>(a->stats.labelCount) *
                         (a->stats.maxValsPerAddr + a->stats.maxFramesPerAddr);
            require(a->stats.sweeps <= bound,
                    name + ": " + std::to_string(a->stats.sweeps) + " sweeps exceeds " +
                        std::to_string(bound));
            require(a->stats.transitions <= 1000000,
                    name + ": " + std::to_string(a->stats.transitions) +
                        " abstract transitions exceed 1e6");
        }
    }
}

// --- criterion 9 -----------------------------------------------------------

void errorDiscipline() {
    std::ostringstream out, err;
    int code = cli::run({"transform", dataPath("mixed_atomic.sem")}, out, err);
    require(code == 3, "mixed atomicity must exit with code 3, got " + std::to_string(code));
    require(err.str().find("label") != std::string::npos,
            "mixed atomicity must name the offending label");

    std::ostringstream out2, err2;
    code = cli::run({"transform", dataPath("mixed_defun.sem")}, out2, err2);
    require(code == 3, "mixed defun must exit with code 3, got " + std::to_string(code));
    require(err2.str().find("label") != std::string::npos,
            "mixed defun must name the offending label");
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"1. CEK derivation from the cbv interpreter", cekDerivation},
        {"2. CPS intermediate reproduces the CPS interpreter", cpsIntermediate},
        {"3. factorial derives the Cont/Halt machine and computes", factorialMachine},
        {"4. NbE derives two continuation dispatch classes", nbeMachine},
        {"5. differential suite agrees on every corpus stage", differentialSuite},
        {"6. concrete callees are contained in the analysis", cfaSoundness},
        {"7. ANF totality on corpus and 1000 random programs", anfTotality},
        {"8. analysis reaches its fixed point within the lattice bound", terminationBound},
        {"9. mixed atomicity/defun verdicts exit 3 naming the label", errorDiscipline},
    };
    int failures = 0;
    for (auto& [name, fn] : criteria) {
        try {
            fn();
            std::cout << "PASS  " << name << "\n";
        } catch (const std::exception& e) {
            failures++;
            std::cout << "FAIL  " << name << "\n      " << e.what() << "\n";
        }
    }
    if (failures) std::cout << failures << " criterion(s) failing\n";
    return failures;
}
