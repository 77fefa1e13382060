#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "semtrans/syntax.hpp"

namespace semtrans::interp {

using syntax::Label;
using syntax::PatternPtr;
using syntax::Program;
using syntax::TermPtr;

struct Value;
using ValuePtr = std::shared_ptr<const Value>;

// Persistent association list; closures share tails.
class Env {
  public:
    Env extend(const std::string& name, ValuePtr v) const;
    const ValuePtr* lookup(const std::string& name) const;

  private:
    struct Node {
        std::string name;
        ValuePtr value;
        std::shared_ptr<const Node> next;
    };
    std::shared_ptr<const Node> head_;
};

struct Value {
    struct Lit { syntax::Lit v; };
    struct Prim { std::string op; };
    struct Record {
        std::string label;
        std::vector<ValuePtr> fields;
    };
    struct Closure {
        Env env;
        std::vector<std::string> params;
        TermPtr body;
        Label funLabel;
    };
    struct TopFun { std::string name; };
    using Node = std::variant<Lit, Prim, Record, Closure, TopFun>;

    Node node;

    template <class T>
    const T* as() const {
        return std::get_if<T>(&node);
    }
    bool isFunctionLike() const {
        return as<Prim>() || as<Closure>() || as<TopFun>();
    }
};

ValuePtr mkLitV(syntax::Lit v);
ValuePtr mkPrimV(std::string op);
ValuePtr mkRecordV(std::string label, std::vector<ValuePtr> fields);
ValuePtr mkTopFunV(std::string name);

struct RuntimeError {
    enum class Kind {
        UnboundVariable,
        MatchFailure,
        NotAFunction,
        ArityMismatch,
        PrimopTypeError,
        UserError,
        OutOfFuel,
    };
    Kind kind;
    std::string message;

    std::string str() const;
};

// A continuation frame pushed by a let-binding.
struct Frame {
    Env env;
    PatternPtr pat;
    TermPtr body;
};

struct MachineConfig {
    enum class Mode { Eval, Continue };
    Mode mode = Mode::Eval;
    Env env;        // Eval
    TermPtr expr;   // Eval
    ValuePtr value; // Continue
    std::vector<Frame> stack;
};

// Identity of an applied function, reported to the instrumentation hook.
struct AppliedFn {
    enum class Kind { Prim, Top, Closure };
    Kind kind;
    std::string name;   // Prim / Top
    Label funLabel = -1;  // Closure

    auto operator<=>(const AppliedFn&) const = default;
};

struct RunOptions {
    std::optional<long> fuel;
    // Called at each application with the operator occurrence label and the
    // applied function's identity.
    std::function<void(Label, const AppliedFn&)> onApply;
};

struct StepResult {
    enum class Kind { Next, Final, Error };
    Kind kind;
    MachineConfig next;    // Next
    ValuePtr final;        // Final
    RuntimeError error;    // Error
};

struct RunResult {
    ValuePtr value;                     // set on success
    std::optional<RuntimeError> error;  // set on failure
    long steps = 0;

    bool ok() const { return value != nullptr; }
};

// Per-run context: the program being executed must be in ANF.
class Machine {
  public:
    Machine(const Program& program, RunOptions opts = {});

    RunResult run(const std::vector<ValuePtr>& args) const;
    StepResult step(MachineConfig config) const;

    StepResult applyFn(const ValuePtr& fn, const std::vector<ValuePtr>& args,
                       std::vector<Frame> stack) const;

  private:
    const Program& program_;
    RunOptions opts_;
    std::map<std::string, const syntax::FunDef*> fnTable_;

    StepResult evalStep(MachineConfig&& c) const;
    StepResult continueStep(MachineConfig&& c) const;
    ValuePtr lookupVar(const Env& env, const std::string& name, SrcPos pos) const;
};

RunResult run(const Program& program, const std::vector<ValuePtr>& args, RunOptions opts = {});

// Matches a value against branches in order, returning the extended
// environment and body of the first match.
std::optional<std::pair<Env, TermPtr>> matchValue(
    const ValuePtr& v, const std::vector<std::pair<PatternPtr, TermPtr>>& branches,
    const Env& env);
std::optional<Env> matchPattern(const ValuePtr& v, const PatternPtr& pat, Env env);

// delta: the primitive operations.
std::variant<ValuePtr, RuntimeError> delta(const std::string& op,
                                           const std::vector<ValuePtr>& args);

// Value text: literals and records in surface syntax, functions as
// #<closure:l>, #<def:name>, #<prim:op>.
std::string printValue(const ValuePtr& v);

// Reads a value from s-expression syntax (integers, booleans, strings and
// {Label v...} records); used for CLI arguments and check files.
ValuePtr parseValue(const std::string& text);
ValuePtr parseValue(const SExpr& e);

// Structural type check of an argument against a main parameter annotation.
bool inhabitsType(const ValuePtr& v, const syntax::TypeRef& tr, const Program& program);

bool valueEq(const ValuePtr& a, const ValuePtr& b);

}  // namespace semtrans::interp
