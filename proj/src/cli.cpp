#include "semtrans/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "semtrans/anf.hpp"
#include "semtrans/errors.hpp"
#include "semtrans/interp.hpp"
#include "semtrans/pipeline.hpp"

namespace semtrans::cli {

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kParseError = 2;
constexpr int kTransformError = 3;
constexpr int kRuntimeError = 4;
constexpr int kCheckMismatch = 5;

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void writeOutput(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot write " + path);
    f << text;
}

int cmdTransform(const std::string& input, const std::string& output,
                 const std::string& stopAfter, const std::string& dumpCfa, std::ostream& out,
                 std::ostream& err) {
    auto stage = pipeline::stageFromName(stopAfter);
    if (!stage) {
        err << "unknown stage `" << stopAfter
            << "` (expected parse|anf|cps|defun|inline)\n";
        return kUsage;
    }
    std::string source;
    try {
        source = readFile(input);
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return kUsage;
    }
    try {
        // The CFA dump needs both analyses, so run the full pipeline when
        // dumping even if printing stops earlier.
        pipeline::Stage effective = dumpCfa.empty() ? *stage : pipeline::Stage::Inline;
        if (*stage > effective) effective = *stage;
        pipeline::Result r = pipeline::transform(source, effective);
        writeOutput(output, syntax::pretty(r.stageOutput(*stage)), out);
        if (!dumpCfa.empty()) {
            std::ostringstream dump;
            dump << "; control-flow analysis of the anf stage\n"
                 << cfa::dumpAnalysis(r.analysisAnf, r.anf)
                 << "; control-flow analysis of the cps stage\n"
                 << cfa::dumpAnalysis(r.analysisCps, r.cps);
            writeOutput(dumpCfa, dump.str(), out);
        }
        for (const auto& w : r.warnings) err << "warning: " << w << "\n";
        return kOk;
    } catch (const SyntaxError& e) {
        err << "parse error: " << e.what() << "\n";
        return kParseError;
    } catch (const TransformError& e) {
        err << "transform error: " << e.what() << "\n";
        return kTransformError;
    } catch (const AnalysisError& e) {
        err << "analysis error: " << e.what() << "\n";
        return kTransformError;
    }
}

int cmdRun(const std::string& input, const std::vector<std::string>& argTexts,
           std::optional<long> fuel, std::ostream& out, std::ostream& err) {
    std::string source;
    try {
        source = readFile(input);
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return kUsage;
    }
    syntax::Program program;
    try {
        program = syntax::parseProgram(source);
    } catch (const SyntaxError& e) {
        err << "parse error: " << e.what() << "\n";
        return kParseError;
    }
    std::vector<interp::ValuePtr> args;
    try {
        for (const auto& t : argTexts) args.push_back(interp::parseValue(t));
    } catch (const SyntaxError& e) {
        err << "bad argument: " << e.what() << "\n";
        return kUsage;
    }
    const syntax::FunDef& mainFn = program.main();
    if (mainFn.params.size() != args.size()) {
        err << "main expects " << mainFn.params.size() << " arguments, got " << args.size()
            << "\n";
        return kUsage;
    }
    for (size_t i = 0; i < args.size(); i++) {
        const auto& tr = mainFn.params[i].second;
        if (tr && !interp::inhabitsType(args[i], *tr, program)) {
            err << "argument " << i + 1 << " does not inhabit type " << tr->str() << "\n";
            return kUsage;
        }
    }
    syntax::Program runnable = anf::isAnf(program) ? program : anf::normalizeProgram(program);
    interp::RunOptions opts;
    opts.fuel = fuel;
    interp::RunResult res = interp::run(runnable, args, opts);
    if (!res.ok()) {
        err << res.error->str() << "\n";
        return kRuntimeError;
    }
    out << interp::printValue(res.value) << "\n";
    return kOk;
}

int cmdCheck(const std::string& input, const std::string& testsPath, std::optional<long> fuel,
             std::ostream& out, std::ostream& err) {
    std::string source, testsText;
    try {
        source = readFile(input);
        testsText = readFile(testsPath);
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return kUsage;
    }
    try {
        std::vector<pipeline::CheckTest> tests = pipeline::parseCheckFile(testsText);
        pipeline::Result r = pipeline::transform(source, pipeline::Stage::Inline);
        pipeline::CheckOutcome outcome = pipeline::runChecks(r, tests, fuel);
        out << outcome.report;
        return outcome.ok ? kOk : kCheckMismatch;
    } catch (const SyntaxError& e) {
        err << "parse error: " << e.what() << "\n";
        return kParseError;
    } catch (const TransformError& e) {
        err << "transform error: " << e.what() << "\n";
        return kTransformError;
    } catch (const AnalysisError& e) {
        err << "analysis error: " << e.what() << "\n";
        return kTransformError;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"semtrans: derives abstract machines from higher-order evaluators"};
    app.require_subcommand(1);

    auto* transform = app.add_subcommand(
        "transform", "Transform an evaluator into a first-order abstract machine");
    std::string input, output, stopAfter = "inline", dumpCfa;
    transform->add_option("input", input, "evaluator source file")->required();
    transform->add_option("-o,--output", output, "output file (default: stdout)");
    transform->add_option("--stop-after", stopAfter, "parse|anf|cps|defun|inline");
    transform->add_option("--dump-cfa", dumpCfa, "write both control-flow analyses to a file");

    auto* runCmd = app.add_subcommand("run", "Evaluate a program's main on value arguments");
    std::string runInput;
    std::vector<std::string> runArgs;
    std::optional<long> fuel;
    long fuelValue = 0;
    runCmd->add_option("input", runInput, "program file")->required();
    auto* fuelOpt = runCmd->add_option("--fuel", fuelValue, "maximum machine steps");
    runCmd->add_option("args", runArgs, "value s-expressions for main");

    auto* check = app.add_subcommand(
        "check", "Run differential tests against every pipeline stage");
    std::string checkInput, checkTests;
    long checkFuelValue = 0;
    check->add_option("input", checkInput, "evaluator source file")->required();
    check->add_option("tests", checkTests, "tests file of (check (arg...) expected) forms")
        ->required();
    auto* checkFuelOpt = check->add_option("--fuel", checkFuelValue, "maximum machine steps");

    std::vector<std::string> mutableArgs = args;
    std::reverse(mutableArgs.begin(), mutableArgs.end());
    try {
        app.parse(mutableArgs);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kUsage;
    }

    if (transform->parsed()) return cmdTransform(input, output, stopAfter, dumpCfa, out, err);
    if (runCmd->parsed()) {
        if (fuelOpt->count()) fuel = fuelValue;
        return cmdRun(runInput, runArgs, fuel, out, err);
    }
    if (checkFuelOpt->count()) fuel = checkFuelValue;
    return cmdCheck(checkInput, checkTests, fuel, out, err);
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace semtrans::cli
