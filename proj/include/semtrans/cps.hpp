#pragma once

#include <set>
#include <string>

#include "semtrans/anf.hpp"
#include "semtrans/cfa.hpp"
#include "semtrans/syntax.hpp"

namespace semtrans::cps {

using syntax::Label;
using syntax::Program;
using syntax::TermPtr;

// Per-call-site atomicity verdict, derived from the analysis callee set and
// the per-function #:atomic flags. Primitive callees count as atomic; main is
// implicitly atomic.
enum class Atomicity { AllAtomic, NoneAtomic, Mixed, Empty };

std::string atomicityName(Atomicity a);

// Selective CPS transformation over a program in ANF. The analysis must have
// been computed for exactly this (labeled) program.
class Cps {
  public:
    Cps(const Program& program, const cfa::Analysis& analysis);

    Program run();

    // The two mutually recursive translations: terms that go to CPS with the
    // continuation variable k, and terms kept in direct style.
    TermPtr cpsTerm(const TermPtr& e, const std::string& k);
    TermPtr directTerm(const TermPtr& e);

    // Whether a command calls only atomic functions when evaluated.
    bool trivial(const TermPtr& c) const;

    Atomicity classify(Label operatorLabel) const;
    bool atomicFun(const cfa::FunId& id) const;

    const std::set<std::string>& warnings() const { return warnings_; }

  private:
    const Program& program_;
    const cfa::Analysis& analysis_;
    std::map<Label, TermPtr> byLabel_;
    anf::FreshGen kGen_{"$k"};
    anf::FreshGen vGen_{"$v"};
    mutable std::set<std::string> warnings_;

    Atomicity verdictAt(const TermPtr& operatorVar) const;
    [[noreturn]] void mixedError(const TermPtr& operatorVar) const;
};

Program cpsProgram(const Program& program, const cfa::Analysis& analysis,
                   std::set<std::string>* warnings = nullptr);

}  // namespace semtrans::cps
