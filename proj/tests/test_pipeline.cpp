#include <doctest.h>

#include <sstream>

#include "semtrans/anf.hpp"
#include "semtrans/cfa.hpp"
#include "semtrans/cli.hpp"
#include "semtrans/cps.hpp"
#include "semtrans/defun.hpp"
#include "semtrans/inliner.hpp"
#include "semtrans/pipeline.hpp"
#include "support/testutil.hpp"

using namespace semtrans;
using namespace semtrans::syntax;
using semtrans::testing::corpusPath;
using semtrans::testing::readFile;

namespace {

int runCli(const std::vector<std::string>& args, std::string* out = nullptr,
           std::string* err = nullptr) {
    std::ostringstream o, e;
    int code = cli::run(args, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return code;
}

}  // namespace

TEST_CASE("the pipeline is deterministic") {
    std::string src = readFile(corpusPath("lambda-cbv.sem"));
    auto a = pipeline::transform(src);
    auto b = pipeline::transform(src);
    CHECK(pretty(a.inlined) == pretty(b.inlined));
    CHECK(pretty(a.cps) == pretty(b.cps));
}

TEST_CASE("the full run equals composing the stages by hand") {
    std::string src = readFile(corpusPath("nbe.sem"));
    auto full = pipeline::transform(src);

    Program p = parseProgram(src);
    Program a = anf::normalizeProgram(p);
    cfa::Analysis an1 = cfa::analyze(a);
    Program c = cps::cpsProgram(a, an1);
    cfa::Analysis an2 = cfa::analyze(c);
    defun::DefunResult d = defun::defunProgram(c, an2);
    Program i = inliner::inlineProgram(d.program);
    CHECK(pretty(full.inlined) == pretty(i));
}

TEST_CASE("stage outputs survive printing and reparsing") {
    std::string src = readFile(corpusPath("factorial.sem"));
    auto r = pipeline::transform(src);
    for (auto s : {pipeline::Stage::Anf, pipeline::Stage::Cps, pipeline::Stage::Defun,
                   pipeline::Stage::Inline}) {
        const Program& p = r.stageOutput(s);
        Program q = parseProgram(pretty(p));
        CHECK(structuralEq(p, q));
    }
}

TEST_CASE("check files parse") {
    auto tests = pipeline::parseCheckFile(readFile(corpusPath("factorial.tests")));
    CHECK(tests.size() == 5);
    CHECK(std::get_if<interp::ValuePtr>(&tests[0].expected) != nullptr);
    auto cbn = pipeline::parseCheckFile(readFile(corpusPath("lambda-cbn.tests")));
    bool sawFun = false, sawErr = false;
    for (const auto& t : cbn) {
        if (std::get_if<pipeline::FunExpected>(&t.expected)) sawFun = true;
        if (std::get_if<std::string>(&t.expected)) sawErr = true;
    }
    CHECK(sawFun);
    CHECK(sawErr);
}

TEST_CASE("the differential harness accepts factorial and flags corruption") {
    std::string src = readFile(corpusPath("factorial.sem"));
    auto r = pipeline::transform(src);
    auto tests = pipeline::parseCheckFile(readFile(corpusPath("factorial.tests")));
    auto outcome = pipeline::runChecks(r, tests);
    CHECK(outcome.ok);

    // Corrupt the final stage: the harness must notice.
    auto corrupted = r;
    corrupted.inlined = parseProgram("(def main ([Integer n]) 0)");
    auto bad = pipeline::runChecks(corrupted, tests);
    CHECK(!bad.ok);
    CHECK(bad.report.find("FAIL") != std::string::npos);
}

TEST_CASE("cli transform produces reparseable output and respects stop-after") {
    std::string out, err;
    int code = runCli({"transform", corpusPath("factorial.sem")}, &out, &err);
    CHECK(code == 0);
    CHECK_NOTHROW(parseProgram(out));

    code = runCli({"transform", corpusPath("factorial.sem"), "--stop-after", "anf"}, &out,
                  &err);
    CHECK(code == 0);
    CHECK(anf::isAnf(parseProgram(out)));

    code = runCli({"transform", corpusPath("factorial.sem"), "--stop-after", "bogus"}, &out,
                  &err);
    CHECK(code == 1);
}

TEST_CASE("cli run evaluates main") {
    std::string out, err;
    int code = runCli({"run", corpusPath("factorial.sem"), "--", "5"}, &out, &err);
    CHECK(code == 0);
    CHECK(out == "120\n");

    code = runCli({"run", corpusPath("factorial.sem"), "--", "5", "6"}, &out, &err);
    CHECK(code == 1);  // wrong arity is a usage error

    code = runCli({"run", corpusPath("lambda-cbv.sem"), "--", "\"z\""}, &out, &err);
    CHECK(code == 4);
    CHECK(err.find("empty environment") != std::string::npos);

    code = runCli({"run", corpusPath("lambda-cbv.sem"), "--",
                   "{App {Abs \"x\" \"x\"} {Abs \"y\" \"y\"}}"},
                  &out, &err);
    CHECK(code == 0);
    CHECK(out.find("#<closure:") != std::string::npos);

    code = runCli({"run", corpusPath("lambda-cbv.sem"), "--", "7"}, &out, &err);
    CHECK(code == 1);  // 7 does not inhabit Term
}

TEST_CASE("cli surfaces parse and transform errors with their exit codes") {
    std::string out, err;
    int code = runCli({"run", "/nonexistent/x.sem", "--", "1"}, &out, &err);
    CHECK(code == 1);

    // A parse error.
    std::string badPath = corpusPath("../tests/data/bad_syntax.sem");
    code = runCli({"transform", badPath}, &out, &err);
    CHECK(code == 2);

    // Mixed atomicity names the offending label on exit code 3.
    std::string mixedPath = corpusPath("../tests/data/mixed_atomic.sem");
    code = runCli({"transform", mixedPath}, &out, &err);
    CHECK(code == 3);
    CHECK(err.find("label") != std::string::npos);
}

TEST_CASE("cli check runs the corpus differentially") {
    std::string out, err;
    int code = runCli({"check", corpusPath("factorial.sem"), corpusPath("factorial.tests")},
                      &out, &err);
    CHECK(code == 0);
    CHECK(out.find("FAIL") == std::string::npos);
}

TEST_CASE("cli dump-cfa writes both analyses") {
    std::string dumpPath = std::string(SEMTRANS_TESTDATA_DIR) + "/.cfa_dump_tmp";
    std::string out, err;
    int code = runCli({"transform", corpusPath("factorial.sem"), "-o",
                       std::string(SEMTRANS_TESTDATA_DIR) + "/.machine_tmp", "--dump-cfa",
                       dumpPath},
                      &out, &err);
    CHECK(code == 0);
    std::string dump = readFile(dumpPath);
    CHECK(dump.find("anf stage") != std::string::npos);
    CHECK(dump.find("cps stage") != std::string::npos);
    CHECK(dump.find("(site") != std::string::npos);
    std::remove(dumpPath.c_str());
    std::remove((std::string(SEMTRANS_TESTDATA_DIR) + "/.machine_tmp").c_str());
}
