#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "semtrans/errors.hpp"
#include "semtrans/sexpr.hpp"

namespace semtrans::syntax {

using Label = std::int32_t;

// Literal values: integers, booleans and strings.
using Lit = std::variant<std::int64_t, bool, std::string>;

enum class BaseTp { String, Integer, Boolean };

std::string baseTpName(BaseTp tp);
std::optional<BaseTp> baseTpOf(const std::string& name);

// The fixed set of primitive operations.
const std::vector<std::string>& primOps();
bool isPrimOp(const std::string& name);

struct Annotations {
    bool atomic = false;
    bool noDefun = false;
    std::optional<std::string> structName;  // #:name

    bool any() const { return atomic || noDefun || structName.has_value(); }
};

// A reference to a type in annotations and datatype definitions: a base type,
// the Any placeholder, or a named datatype / structure.
struct TypeRef {
    enum class Kind { Base, Any, Named };
    Kind kind = Kind::Any;
    BaseTp base = BaseTp::Integer;
    std::string name;

    static TypeRef mkBase(BaseTp b) { return {Kind::Base, b, {}}; }
    static TypeRef mkAny() { return {Kind::Any, BaseTp::Integer, {}}; }
    static TypeRef mkNamed(std::string n) { return {Kind::Named, BaseTp::Integer, std::move(n)}; }
    std::string str() const;
};

struct Pattern;
using PatternPtr = std::shared_ptr<const Pattern>;

struct Pattern {
    struct Var { std::string name; };
    struct PLit { Lit value; };
    struct Wild {};
    struct Record { std::string label; std::vector<PatternPtr> fields; };
    struct Type { BaseTp tp; std::string name; };
    using Node = std::variant<Var, PLit, Wild, Record, Type>;

    Node node;
    SrcPos pos;
};

PatternPtr mkPVar(std::string name, SrcPos pos = {});
PatternPtr mkPLit(Lit v, SrcPos pos = {});
PatternPtr mkPWild(SrcPos pos = {});
PatternPtr mkPRecord(std::string label, std::vector<PatternPtr> fields, SrcPos pos = {});
PatternPtr mkPType(BaseTp tp, std::string name, SrcPos pos = {});

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
    struct Var { std::string name; };
    struct TLit { Lit value; };
    struct Fun {
        std::vector<std::string> params;
        TermPtr body;
        Annotations anns;
    };
    struct App {
        TermPtr fn;
        std::vector<TermPtr> args;
    };
    struct Record {
        std::string label;
        std::vector<TermPtr> fields;
    };
    struct Let {
        PatternPtr pat;
        TermPtr bound;
        TermPtr body;
    };
    struct Match {
        TermPtr scrutinee;
        std::vector<std::pair<PatternPtr, TermPtr>> branches;
    };
    struct Error { std::string message; };
    using Node = std::variant<Var, TLit, Fun, App, Record, Let, Match, Error>;

    Label label = -1;
    Node node;
    SrcPos pos;

    template <class T>
    const T* as() const {
        return std::get_if<T>(&node);
    }
    bool isVar() const { return as<Var>() != nullptr; }
    const std::string& varName() const { return as<Var>()->name; }
};

TermPtr mkVar(std::string name, SrcPos pos = {});
TermPtr mkLit(Lit v, SrcPos pos = {});
TermPtr mkFun(std::vector<std::string> params, TermPtr body, Annotations anns = {}, SrcPos pos = {});
TermPtr mkApp(TermPtr fn, std::vector<TermPtr> args, SrcPos pos = {});
TermPtr mkRecord(std::string label, std::vector<TermPtr> fields, SrcPos pos = {});
TermPtr mkLet(PatternPtr pat, TermPtr bound, TermPtr body, SrcPos pos = {});
TermPtr mkMatch(TermPtr scrutinee, std::vector<std::pair<PatternPtr, TermPtr>> branches,
                SrcPos pos = {});
TermPtr mkError(std::string message, SrcPos pos = {});

// One variant of a def-data: either a type reference or an inline record
// signature {Label Type...}.
struct DataVariant {
    std::optional<TypeRef> ref;
    std::optional<std::pair<std::string, std::vector<TypeRef>>> sig;
};

struct DataDef {
    std::string name;
    std::vector<DataVariant> variants;
    SrcPos pos;
};

struct StructDef {
    std::string label;
    std::vector<std::string> fieldNames;
    SrcPos pos;
};

struct FunDef {
    std::string name;
    std::vector<std::pair<std::string, std::optional<TypeRef>>> params;
    TermPtr body;
    Annotations anns;
    SrcPos pos;

    std::vector<std::string> paramNames() const;
};

struct Program {
    std::vector<DataDef> datatypes;
    std::vector<StructDef> structures;
    std::vector<FunDef> functions;

    const FunDef* findFunction(const std::string& name) const;
    const FunDef& main() const;
    bool isTopLevel(const std::string& name) const { return findFunction(name) != nullptr; }
    // Declared record labels with their arity (def-struct plus inline
    // def-data signatures).
    std::map<std::string, int> declaredLabels() const;
    int labelCount() const;  // labels are 0..labelCount()-1 after relabeling
};

// Parsing and printing.
Program parseProgram(const std::string& text);
std::string pretty(const Program& program);
std::string pretty(const TermPtr& term);

// Free variables of a term in first-occurrence preorder, excluding names
// bound by enclosing funs/lets/matches and excluding the given global names
// (top-level functions and primitives).
std::vector<std::string> freeVars(const TermPtr& term, const std::set<std::string>& globals);
std::set<std::string> globalNames(const Program& program);

// Free variables of every fun node, keyed by its label. Unlike plain
// freeVars, a global name that is shadowed by a binder enclosing the fun is
// treated as a local capture, so the capture lists stay correct under
// shadowing.
std::map<Label, std::vector<std::string>> scopedFunFreeVars(const Program& program);

// Variables bound by a pattern, in left-to-right order.
std::vector<std::string> patternVars(const PatternPtr& pat);

// Assigns dense labels 0..n-1 in a left-to-right preorder walk of the
// program's function bodies.
Program relabel(const Program& program);
void collectLabels(const TermPtr& term, std::vector<Label>& out);

// Structural equality ignoring labels and source positions.
bool structuralEq(const Program& a, const Program& b);
bool structuralEq(const TermPtr& a, const TermPtr& b);

// Structural equivalence modulo alpha-renaming of bound variables and a
// bijective renaming of non-pinned function names and record labels. Pinned
// names must map to themselves. Declarations are compared as label -> arity
// sets, ignoring def-data vs def-struct grouping. Used by the acceptance
// tests to compare derived machines against expected ones.
bool equivalentModuloNames(const Program& a, const Program& b,
                           const std::set<std::string>& pinned, std::string* why = nullptr);

// Renames every identifier (bound variables only) by the given suffix map;
// test helper for the renaming-invariance property of freeVars.
TermPtr renameBound(const TermPtr& term, const std::map<std::string, std::string>& ren);

}  // namespace semtrans::syntax
