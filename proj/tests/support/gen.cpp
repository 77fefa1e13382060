#include "support/gen.hpp"

namespace semtrans::testing {

using namespace syntax;

int ProgramGen::pick(int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng_));
}

std::string ProgramGen::freshBinder() { return "b" + std::to_string(binderCounter_++); }

Lit ProgramGen::literal() {
    switch (pick(4)) {
        case 0: return Lit{static_cast<std::int64_t>(pick(10))};
        case 1: return Lit{true};
        case 2: return Lit{false};
        default: return Lit{std::string(1, static_cast<char>('a' + pick(4)))};
    }
}

PatternPtr ProgramGen::pattern(std::vector<std::string>& binds) {
    switch (pick(6)) {
        case 0: {
            std::string x = freshBinder();
            binds.push_back(x);
            return mkPVar(x);
        }
        case 1: return mkPWild();
        case 2: return mkPLit(literal());
        case 3: {
            std::string x = freshBinder();
            binds.push_back(x);
            BaseTp tp = pick(3) == 0 ? BaseTp::String
                        : pick(2) == 0 ? BaseTp::Integer
                                       : BaseTp::Boolean;
            return mkPType(tp, x);
        }
        case 4: {
            std::string x = freshBinder();
            binds.push_back(x);
            return mkPRecord("S1", {mkPVar(x)});
        }
        default: {
            std::string x = freshBinder();
            std::string y = freshBinder();
            binds.push_back(x);
            binds.push_back(y);
            return mkPRecord("S2", {mkPVar(x), mkPVar(y)});
        }
    }
}

TermPtr ProgramGen::term(int depth, std::vector<std::string> scope) {
    auto someVar = [&]() -> TermPtr {
        // Globals, primitives, or in-scope names. Programs stay well scoped:
        // the ANF pass may float a variable reference past an effect, which
        // is observable only for unbound variables.
        int r = pick(10);
        if (r == 0) return mkVar(pick(2) ? "g0" : "g1");
        if (r == 1) return mkVar(primOps()[pick(static_cast<int>(primOps().size()))]);
        if (scope.empty()) return mkVar("g0");
        return mkVar(scope[pick(static_cast<int>(scope.size()))]);
    };
    if (depth <= 0) {
        switch (pick(3)) {
            case 0: return someVar();
            case 1: return mkLit(literal());
            default: return mkRecord("S0", {});
        }
    }
    switch (pick(12)) {
        case 0: return someVar();
        case 1: return mkLit(literal());
        case 2: {  // fun
            int nParams = 1 + pick(2);
            std::vector<std::string> params;
            for (int i = 0; i < nParams; i++) params.push_back(freshBinder());
            auto inner = scope;
            for (const auto& p : params) inner.push_back(p);
            Annotations anns;
            if (pick(4) == 0) anns.atomic = true;
            if (pick(4) == 0) anns.noDefun = true;
            return mkFun(params, term(depth - 1, inner), anns);
        }
        case 3: case 4: {  // application
            int nArgs = pick(3);
            TermPtr fn = term(depth - 1, scope);
            std::vector<TermPtr> args;
            for (int i = 0; i < nArgs; i++) args.push_back(term(depth - 1, scope));
            return mkApp(fn, std::move(args));
        }
        case 5: {  // record
            switch (pick(3)) {
                case 0: return mkRecord("S0", {});
                case 1: return mkRecord("S1", {term(depth - 1, scope)});
                default:
                    return mkRecord("S2", {term(depth - 1, scope), term(depth - 1, scope)});
            }
        }
        case 6: case 7: {  // let
            std::vector<std::string> binds;
            PatternPtr p = pattern(binds);
            TermPtr bound = term(depth - 1, scope);
            auto inner = scope;
            for (const auto& b : binds) inner.push_back(b);
            return mkLet(p, bound, term(depth - 1, inner));
        }
        case 8: case 9: {  // match
            int nBranches = 1 + pick(3);
            TermPtr scrut = term(depth - 1, scope);
            std::vector<std::pair<PatternPtr, TermPtr>> branches;
            for (int i = 0; i < nBranches; i++) {
                std::vector<std::string> binds;
                PatternPtr p = pattern(binds);
                auto inner = scope;
                for (const auto& b : binds) inner.push_back(b);
                branches.emplace_back(p, term(depth - 1, inner));
            }
            return mkMatch(scrut, std::move(branches));
        }
        case 10: return pick(8) == 0 ? mkError("boom") : mkLit(literal());
        default: {  // primitive call
            const std::string& op = primOps()[pick(static_cast<int>(primOps().size()))];
            int arity = op == "not" ? 1 : 2;
            std::vector<TermPtr> args;
            for (int i = 0; i < arity; i++) args.push_back(term(depth - 1, scope));
            return mkApp(mkVar(op), std::move(args));
        }
    }
}

Program ProgramGen::program(int maxDepth) {
    Program p;
    p.structures.push_back(StructDef{"S0", {}, {}});
    p.structures.push_back(StructDef{"S1", {"f1"}, {}});
    p.structures.push_back(StructDef{"S2", {"f1", "f2"}, {}});

    FunDef g0;
    g0.name = "g0";
    g0.params.emplace_back("a", std::nullopt);
    g0.body = term(maxDepth - 2, {"a"});
    p.functions.push_back(g0);

    FunDef g1;
    g1.name = "g1";
    g1.params.emplace_back("a", std::nullopt);
    g1.params.emplace_back("b", std::nullopt);
    if (pick(3) == 0) g1.anns.atomic = true;
    g1.body = term(maxDepth - 2, {"a", "b"});
    p.functions.push_back(g1);

    FunDef mainFn;
    mainFn.name = "main";
    mainFn.params.emplace_back("n", TypeRef::mkBase(BaseTp::Integer));
    mainFn.body = term(maxDepth, {"n"});
    p.functions.push_back(mainFn);

    return relabel(p);
}

}  // namespace semtrans::testing
