#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "semtrans/cfa.hpp"
#include "semtrans/syntax.hpp"

namespace semtrans::defun {

using cfa::FunId;
using syntax::Label;
using syntax::Program;
using syntax::TermPtr;

// One generated apply function: the dispatched callee set and the number of
// arguments passed at its call sites.
struct ApplySpec {
    std::string name;
    int argCount = 0;
    std::vector<FunId> callees;
};

struct DefunResult {
    Program program;
    // Constructor labels introduced for defunctionalized functions; the check
    // harness erases records with these labels when comparing results.
    std::set<std::string> generatedLabels;
    std::vector<ApplySpec> applies;
    std::set<std::string> warnings;
};

// Selective defunctionalization over a program in ANF (normally the CPS
// output) with an analysis computed for exactly this program.
class Defun {
  public:
    Defun(const Program& program, const cfa::Analysis& analysis);

    DefunResult run();

    // Constructor for a function value: the #:name annotation when present,
    // Top-/Prim- prefixes for named functions, or a deterministic
    // Fun-<enclosing>-<ordinal> scheme.
    std::string constructorName(const FunId& id);

    bool defunFun(const FunId& id) const;

  private:
    struct Group {
        std::vector<FunId> callees;
        int argCount = 0;
        std::string name;
    };

    const Program& program_;
    const cfa::Analysis& analysis_;
    std::map<Label, TermPtr> byLabel_;
    std::map<Label, std::vector<std::string>> funFvs_;
    std::map<Label, std::pair<std::string, int>> funSite_;  // enclosing def, ordinal
    std::set<std::string> takenNames_;                       // all top-level names and labels
    std::map<FunId, std::string> ctorNames_;
    std::vector<std::pair<FunId, std::string>> ctorOrder_;
    std::map<std::pair<std::vector<FunId>, int>, int> groupIndex_;
    std::vector<Group> groups_;
    int numberedApplies_ = 0;
    std::set<std::string> warnings_;

    TermPtr rewrite(const TermPtr& t, std::set<std::string> bound);
    std::string groupName(const std::vector<FunId>& callees, int argCount, SrcPos pos,
                          Label siteLabel);
    // By value: generating a body may discover further groups, growing the
    // vector the argument would otherwise point into.
    syntax::FunDef makeApply(Group g);
    std::string freshName(const std::string& base);
    int calleeArity(const FunId& id) const;
};

DefunResult defunProgram(const Program& program, const cfa::Analysis& analysis);

}  // namespace semtrans::defun
