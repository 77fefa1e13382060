#pragma once

#include <functional>

#include "semtrans/syntax.hpp"

namespace semtrans::anf {

using syntax::Program;
using syntax::TermPtr;

// Generates administrative names `$<n>`, starting above any index already
// used in the scanned term so re-normalizing printed output stays stable.
class FreshGen {
  public:
    FreshGen() = default;
    explicit FreshGen(const std::string& prefix) : prefix_(prefix) {}
    void scan(const TermPtr& term);
    std::string fresh();

  private:
    void note(const std::string& name);

    std::string prefix_ = "$";
    long next_ = 0;
};

// A meta-continuation from commands to expressions in A-normal form.
using MetaK = std::function<TermPtr(TermPtr)>;

// The transformation of each function body into the two-level Com/Anf
// grammar. The result is freshly relabeled.
Program normalizeProgram(const Program& program);

// The core transformation: eight clauses over the term shape, with the
// let-binding helper and left-to-right sequencing of subterm lists.
TermPtr normalizeTerm(const TermPtr& term, const MetaK& k, FreshGen& fresh);

// Decision procedure for the ANF grammar.
bool isAnfExpr(const TermPtr& e);
bool isCommand(const TermPtr& c);
bool isAnf(const Program& program);

// Term node count, used by the size-bound property tests.
int nodeCount(const TermPtr& term);
int nodeCount(const Program& program);

}  // namespace semtrans::anf
