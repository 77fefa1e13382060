#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "semtrans/syntax.hpp"

namespace semtrans::cfa {

using syntax::BaseTp;
using syntax::Label;
using syntax::Program;
using syntax::TermPtr;

// Value and continuation addresses are term labels; synthetic seed addresses
// (types, primitives, top-level functions) are negative.
using Addr = std::int32_t;

// Identifies a function a call site may invoke: a primitive, a top-level
// definition, or an anonymous fun by its creation-site label.
struct FunId {
    enum class Kind { Prim, Top, Closure };
    Kind kind = Kind::Prim;
    std::string name;     // Prim / Top
    Label funLabel = -1;  // Closure

    static FunId prim(std::string op) { return {Kind::Prim, std::move(op), -1}; }
    static FunId top(std::string n) { return {Kind::Top, std::move(n), -1}; }
    static FunId closure(Label l) { return {Kind::Closure, {}, l}; }

    auto operator<=>(const FunId&) const = default;
    std::string str() const;
};

using AbsEnv = std::map<std::string, Addr>;

struct AbsVal {
    enum class Kind { Base, Any, Prim, Record, Closure, TopFun };
    Kind kind = Kind::Any;
    BaseTp base = BaseTp::Integer;  // Base
    std::string name;               // Prim op, Record label, TopFun name
    std::vector<Addr> fields;       // Record
    Label funLabel = -1;            // Closure creation site
    AbsEnv env;                     // Closure environment (restricted to fvs)

    static AbsVal mkBase(BaseTp tp);
    static AbsVal mkAny();
    static AbsVal mkPrim(std::string op);
    static AbsVal mkRecord(std::string label, std::vector<Addr> fields);
    static AbsVal mkClosure(Label l, AbsEnv env);
    static AbsVal mkTopFun(std::string name);

    bool isFunction() const {
        return kind == Kind::Prim || kind == Kind::Closure || kind == Kind::TopFun;
    }
    auto operator<=>(const AbsVal&) const = default;
    std::string str() const;
};

// A continuation: the frame of a let expression (identified by the Let term's
// label) or the halt continuation.
struct AbsFrame {
    bool halt = false;
    AbsEnv env;
    Label letLabel = -1;
    Addr next = 0;

    static AbsFrame mkHalt() { return AbsFrame{true, {}, -1, 0}; }
    auto operator<=>(const AbsFrame&) const = default;
};

struct PartialConfig {
    enum class Mode { Eval, Continue };
    Mode mode = Mode::Eval;
    AbsEnv env;       // Eval
    Label expr = -1;  // Eval: label of the expression term
    Addr value = 0;   // Continue
    Addr kont = 0;

    auto operator<=>(const PartialConfig&) const = default;
};

struct AbstractStore {
    std::map<Addr, std::set<AbsVal>> vals;
    std::map<Addr, std::set<AbsFrame>> konts;

    bool addVal(Addr a, const AbsVal& v) { return vals[a].insert(v).second; }
    bool addFrame(Addr a, const AbsFrame& k) { return konts[a].insert(k).second; }
    // Joins `other` into this store; returns whether anything was added.
    bool joinFrom(const AbstractStore& other);
    const std::set<AbsVal>& valsAt(Addr a) const;
    const std::set<AbsFrame>& framesAt(Addr a) const;

    bool operator==(const AbstractStore&) const = default;
};

struct AbstractConfig {
    AbstractStore store;
    std::set<PartialConfig> configs;

    bool operator==(const AbstractConfig&) const = default;
};

struct AnalysisStats {
    long sweeps = 0;       // applications of the global transition
    long transitions = 0;  // per-partial-configuration step applications
    int maxValsPerAddr = 0;
    int maxFramesPerAddr = 0;
    int labelCount = 0;
};

struct Analysis {
    // Callee sets keyed by the operator occurrence label of each call site.
    std::map<Label, std::set<FunId>> callees;
    AbstractStore rawStore;
    AnalysisStats stats;
    std::set<std::string> warnings;
};

// The abstract instantiation of the machine template over a program in ANF:
// label-addressed store, set-valued dereference, global-store widening.
class AbstractMachine {
  public:
    explicit AbstractMachine(const Program& program);

    AbstractConfig initConfig() const;
    // One application of the global transition: steps every partial
    // configuration against the shared store, joins resulting stores and
    // unions resulting configurations.
    AbstractConfig abstractStep(const AbstractConfig& c) const;
    Analysis analyze() const;

    Addr seedAddr(const std::string& name) const;
    const TermPtr& termAt(Label l) const;

  private:
    const Program& program_;
    std::map<Label, TermPtr> byLabel_;
    std::map<Label, std::vector<std::string>> funFvs_;
    std::map<std::string, Addr> seeds_;
    std::map<std::string, const syntax::FunDef*> fnTable_;
    AbstractStore seedStore_;
    mutable std::set<std::string> warnings_;
    mutable long stepCount_ = 0;

    void buildSeeds();
    Addr addrOfType(const syntax::TypeRef& tr) const;
    std::vector<AbsEnv> matchAbs(const AbstractStore& store, Addr addr, const AbsVal& v,
                                 const syntax::PatternPtr& pat, const AbsEnv& env) const;
    std::optional<Addr> lookup(const AbsEnv& env, const std::string& name) const;
    void stepConfig(const PartialConfig& g, const AbstractStore& snapshot, AbstractStore& delta,
                    std::set<PartialConfig>& out) const;
};

Analysis analyze(const Program& program);
std::string dumpAnalysis(const Analysis& analysis, const Program& program);

}  // namespace semtrans::cfa
