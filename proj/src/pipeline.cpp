#include "semtrans/pipeline.hpp"

#include <sstream>

#include "semtrans/anf.hpp"
#include "semtrans/cps.hpp"
#include "semtrans/inliner.hpp"

namespace semtrans::pipeline {

using namespace syntax;

std::optional<Stage> stageFromName(const std::string& name) {
    if (name == "parse") return Stage::Parse;
    if (name == "anf") return Stage::Anf;
    if (name == "cps") return Stage::Cps;
    if (name == "defun") return Stage::Defun;
    if (name == "inline") return Stage::Inline;
    return std::nullopt;
}

std::string stageName(Stage s) {
    switch (s) {
        case Stage::Parse: return "parse";
        case Stage::Anf: return "anf";
        case Stage::Cps: return "cps";
        case Stage::Defun: return "defun";
        case Stage::Inline: return "inline";
    }
    return "?";
}

const Program& Result::stageOutput(Stage s) const {
    switch (s) {
        case Stage::Parse: return parsed;
        case Stage::Anf: return anf;
        case Stage::Cps: return cps;
        case Stage::Defun: return defunned;
        case Stage::Inline: return inlined;
    }
    return inlined;
}

Result transformProgram(const Program& parsed, Stage stopAfter) {
    Result r;
    r.parsed = parsed;
    r.last = Stage::Parse;
    if (stopAfter == Stage::Parse) return r;

    r.anf = anf::normalizeProgram(r.parsed);
    r.last = Stage::Anf;
    if (stopAfter == Stage::Anf) return r;

    r.analysisAnf = cfa::analyze(r.anf);
    for (const auto& w : r.analysisAnf.warnings) r.warnings.insert(w);
    r.cps = cps::cpsProgram(r.anf, r.analysisAnf, &r.warnings);
    r.last = Stage::Cps;
    if (stopAfter == Stage::Cps) return r;

    r.analysisCps = cfa::analyze(r.cps);
    for (const auto& w : r.analysisCps.warnings) r.warnings.insert(w);
    defun::DefunResult d = defun::defunProgram(r.cps, r.analysisCps);
    r.defunned = std::move(d.program);
    r.generatedLabels = std::move(d.generatedLabels);
    r.applies = std::move(d.applies);
    for (const auto& w : d.warnings) r.warnings.insert(w);
    r.last = Stage::Defun;
    if (stopAfter == Stage::Defun) return r;

    r.inlined = inliner::inlineProgram(r.defunned);
    r.last = Stage::Inline;
    return r;
}

Result transform(const std::string& source, Stage stopAfter) {
    return transformProgram(parseProgram(source), stopAfter);
}

// ---------------------------------------------------------------------------
// Check harness
// ---------------------------------------------------------------------------

std::vector<CheckTest> parseCheckFile(const std::string& text) {
    std::vector<CheckTest> tests;
    for (const SExpr& form : readSExprs(text)) {
        if (!form.isList('(') || form.items.size() != 3 || !form.items[0].isSym("check"))
            throw SyntaxError("expected (check (arg...) expected)", form.pos);
        const SExpr& argList = form.items[1];
        if (!argList.isList('('))
            throw SyntaxError("check arguments must be a parenthesized list", argList.pos);
        CheckTest t;
        t.pos = form.pos;
        for (const auto& a : argList.items) t.args.push_back(interp::parseValue(a));
        const SExpr& exp = form.items[2];
        if (exp.kind == SExpr::Kind::Keyword && exp.text == "fun") {
            t.expected = FunExpected{};
        } else if (exp.isList('(') && !exp.items.empty() && exp.items[0].isSym("error")) {
            if (exp.items.size() != 2 || exp.items[1].kind != SExpr::Kind::Str)
                throw SyntaxError("expected (error \"message\")", exp.pos);
            t.expected = exp.items[1].text;
        } else {
            t.expected = interp::parseValue(exp);
        }
        tests.push_back(std::move(t));
    }
    return tests;
}

std::string erasedValue(const interp::ValuePtr& v, const std::set<std::string>& generated) {
    using interp::Value;
    if (v->isFunctionLike()) return "#<fun>";
    if (const auto* r = v->as<Value::Record>()) {
        if (generated.count(r->label)) return "#<fun>";
        std::string s = "{" + r->label;
        for (const auto& f : r->fields) s += " " + erasedValue(f, generated);
        return s + "}";
    }
    return interp::printValue(v);
}

std::string erasedResult(const interp::RunResult& r, const std::set<std::string>& generated) {
    if (r.ok()) return erasedValue(r.value, generated);
    const interp::RuntimeError& e = *r.error;
    switch (e.kind) {
        case interp::RuntimeError::Kind::UserError:
            return "(error " + quoteString(e.message) + ")";
        case interp::RuntimeError::Kind::MatchFailure: return "#<error:match>";
        case interp::RuntimeError::Kind::NotAFunction: return "#<error:apply>";
        case interp::RuntimeError::Kind::ArityMismatch: return "#<error:arity>";
        case interp::RuntimeError::Kind::PrimopTypeError: return "#<error:primop>";
        case interp::RuntimeError::Kind::UnboundVariable: return "#<error:unbound>";
        case interp::RuntimeError::Kind::OutOfFuel: return "#<fuel>";
    }
    return "#<error>";
}

CheckOutcome runChecks(const Result& pipeline, const std::vector<CheckTest>& tests,
                       std::optional<long> fuel) {
    CheckOutcome outcome;
    std::ostringstream report;

    struct Runnable {
        Stage stage;
        Program program;  // in ANF
    };
    std::vector<Runnable> runnables;
    for (Stage s : {Stage::Parse, Stage::Anf, Stage::Cps, Stage::Defun, Stage::Inline}) {
        const Program& p = pipeline.stageOutput(s);
        runnables.push_back({s, anf::isAnf(p) ? p : anf::normalizeProgram(p)});
    }

    interp::RunOptions opts;
    opts.fuel = fuel;
    for (size_t i = 0; i < tests.size(); i++) {
        const CheckTest& t = tests[i];
        std::string expectedText;
        if (auto* v = std::get_if<interp::ValuePtr>(&t.expected))
            expectedText = erasedValue(*v, pipeline.generatedLabels);
        else if (auto* msg = std::get_if<std::string>(&t.expected))
            expectedText = "(error " + quoteString(*msg) + ")";
        else
            expectedText = "#<fun>";

        for (const auto& r : runnables) {
            interp::RunResult res = interp::run(r.program, t.args, opts);
            std::string got = erasedResult(res, pipeline.generatedLabels);
            bool ok = got == expectedText;
            report << (ok ? "ok   " : "FAIL ") << "test " << i + 1 << " [" << stageName(r.stage)
                   << "]";
            if (!ok) report << " expected " << expectedText << ", got " << got;
            report << "\n";
            if (!ok) outcome.ok = false;
        }
    }
    outcome.report = report.str();
    return outcome;
}

}  // namespace semtrans::pipeline
