#pragma once

#include "semtrans/syntax.hpp"

namespace semtrans::inliner {

using syntax::Program;
using syntax::TermPtr;

// Administrative let-inlining, the pipeline's final step. Rewrites
// (let x c e) when x is bound by a plain variable pattern and either
//   (a) c is a variable in scope: substitute it everywhere, or
//   (b) x occurs exactly once in e and c is a value (literal, fun, record of
//       variables), or the occurrence sits in the first-evaluated command of
//       e behind only pure values,
// iterating to a fixed point. Substitutions that would capture a free
// variable of c are skipped.
Program inlineProgram(const Program& program);

// Fixed-point rewriting of a single expression; exposed for tests.
TermPtr inlineExpr(const TermPtr& term, const std::set<std::string>& globals);

// Number of let nodes, used by the termination property tests.
int letCount(const TermPtr& term);
int letCount(const Program& program);

}  // namespace semtrans::inliner
