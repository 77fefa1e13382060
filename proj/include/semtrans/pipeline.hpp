#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "semtrans/cfa.hpp"
#include "semtrans/defun.hpp"
#include "semtrans/interp.hpp"
#include "semtrans/syntax.hpp"

namespace semtrans::pipeline {

using syntax::Program;

enum class Stage { Parse, Anf, Cps, Defun, Inline };

std::optional<Stage> stageFromName(const std::string& name);
std::string stageName(Stage s);

struct Result {
    Program parsed;
    Program anf;
    Program cps;
    Program defunned;
    Program inlined;
    cfa::Analysis analysisAnf;
    cfa::Analysis analysisCps;
    std::set<std::string> generatedLabels;
    std::vector<defun::ApplySpec> applies;
    std::set<std::string> warnings;
    Stage last = Stage::Parse;

    const Program& stageOutput(Stage s) const;
};

// parse -> label -> ANF -> analyze -> CPS -> re-analyze -> defun -> inline.
Result transform(const std::string& source, Stage stopAfter = Stage::Inline);
Result transformProgram(const Program& parsed, Stage stopAfter = Stage::Inline);

// ---------------------------------------------------------------------------
// Differential check harness
// ---------------------------------------------------------------------------

struct FunExpected {};  // the #:fun expectation: any function-like result

struct CheckTest {
    std::vector<interp::ValuePtr> args;
    std::variant<interp::ValuePtr, std::string, FunExpected> expected;  // value | error msg
    SrcPos pos;
};

std::vector<CheckTest> parseCheckFile(const std::string& text);

struct CheckOutcome {
    bool ok = true;
    std::string report;
};

// Runs every test against every stage output (re-normalizing stages that are
// not in ANF), comparing results under function erasure: function values and
// records built from defunctionalized functions print as #<fun>.
CheckOutcome runChecks(const Result& pipeline, const std::vector<CheckTest>& tests,
                       std::optional<long> fuel = std::nullopt);

// The erased printed form used for cross-stage comparison.
std::string erasedResult(const interp::RunResult& r, const std::set<std::string>& generated);
std::string erasedValue(const interp::ValuePtr& v, const std::set<std::string>& generated);

}  // namespace semtrans::pipeline
