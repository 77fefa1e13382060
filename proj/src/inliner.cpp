#include "semtrans/inliner.hpp"

#include <functional>

namespace semtrans::inliner {

using namespace syntax;

namespace {

bool isInlineValue(const TermPtr& t) {
    if (t->as<Term::TLit>() || t->as<Term::Fun>()) return true;
    if (auto* r = t->as<Term::Record>()) {
        for (const auto& f : r->fields)
            if (!f->isVar()) return false;
        return true;
    }
    return false;
}

// Shadow-aware count of free occurrences of x.
int countFree(const TermPtr& t, const std::string& x) {
    if (auto* v = t->as<Term::Var>()) return v->name == x ? 1 : 0;
    if (t->as<Term::TLit>() || t->as<Term::Error>()) return 0;
    if (auto* f = t->as<Term::Fun>()) {
        for (const auto& p : f->params)
            if (p == x) return 0;
        return countFree(f->body, x);
    }
    if (auto* a = t->as<Term::App>()) {
        int n = countFree(a->fn, x);
        for (const auto& arg : a->args) n += countFree(arg, x);
        return n;
    }
    if (auto* r = t->as<Term::Record>()) {
        int n = 0;
        for (const auto& f : r->fields) n += countFree(f, x);
        return n;
    }
    if (auto* l = t->as<Term::Let>()) {
        int n = countFree(l->bound, x);
        for (const auto& p : patternVars(l->pat))
            if (p == x) return n;
        return n + countFree(l->body, x);
    }
    const auto* m = t->as<Term::Match>();
    int n = countFree(m->scrutinee, x);
    for (const auto& [p, b] : m->branches) {
        bool shadowed = false;
        for (const auto& pv : patternVars(p))
            if (pv == x) shadowed = true;
        if (!shadowed) n += countFree(b, x);
    }
    return n;
}

// Evaluation-order walk classifying the path to x's occurrence: everything
// evaluated before it must be a pure value, and the occurrence may not sit
// under a fun body or a match branch.
enum class Walk { Found, Pure, Impure };

Walk pureWalk(const TermPtr& t, const std::string& x, std::set<std::string>& scope) {
    if (auto* v = t->as<Term::Var>()) {
        if (v->name == x) return Walk::Found;
        return scope.count(v->name) ? Walk::Pure : Walk::Impure;  // unbound lookup errors
    }
    if (t->as<Term::TLit>() || t->as<Term::Fun>()) return Walk::Pure;
    if (t->as<Term::Error>()) return Walk::Impure;
    if (auto* r = t->as<Term::Record>()) {
        for (const auto& f : r->fields) {
            Walk w = pureWalk(f, x, scope);
            if (w != Walk::Pure) return w;
        }
        return Walk::Pure;
    }
    if (auto* a = t->as<Term::App>()) {
        Walk w = pureWalk(a->fn, x, scope);
        if (w != Walk::Pure) return w;
        for (const auto& arg : a->args) {
            w = pureWalk(arg, x, scope);
            if (w != Walk::Pure) return w;
        }
        return Walk::Impure;  // the invocation itself is an effect
    }
    if (auto* m = t->as<Term::Match>()) {
        Walk w = pureWalk(m->scrutinee, x, scope);
        if (w == Walk::Found) return w;
        return Walk::Impure;  // branch dispatch and branch bodies are conditional
    }
    const auto* l = t->as<Term::Let>();
    Walk w = pureWalk(l->bound, x, scope);
    if (w != Walk::Pure) return w;
    // Continuing past the binding is only order-safe when the pattern cannot
    // fail to match.
    bool irrefutable = std::get_if<Pattern::Var>(&l->pat->node) != nullptr ||
                       std::get_if<Pattern::Wild>(&l->pat->node) != nullptr;
    if (!irrefutable) return Walk::Impure;
    for (const auto& p : patternVars(l->pat)) {
        if (p == x) return Walk::Impure;  // occurrence beyond here is shadowed
        scope.insert(p);
    }
    return pureWalk(l->body, x, scope);
}

struct SubstCtx {
    const std::string& x;
    const TermPtr& replacement;
    const std::set<std::string>& fvRepl;
    bool captured = false;
};

// Substitutes the replacement for free occurrences of x; sets `captured` if
// an occurrence lies under a binder of one of the replacement's free names.
TermPtr subst(const TermPtr& t, SubstCtx& ctx, std::set<std::string>& binders) {
    if (auto* v = t->as<Term::Var>()) {
        if (v->name != ctx.x) return t;
        for (const auto& b : binders)
            if (ctx.fvRepl.count(b)) {
                ctx.captured = true;
                return t;
            }
        return ctx.replacement;
    }
    if (t->as<Term::TLit>() || t->as<Term::Error>()) return t;
    auto copyWith = [&](Term::Node node) {
        auto out = std::make_shared<Term>(*t);
        out->node = std::move(node);
        return TermPtr(out);
    };
    if (auto* f = t->as<Term::Fun>()) {
        for (const auto& p : f->params)
            if (p == ctx.x) return t;
        std::vector<std::string> added;
        for (const auto& p : f->params)
            if (binders.insert(p).second) added.push_back(p);
        TermPtr body = subst(f->body, ctx, binders);
        for (const auto& p : added) binders.erase(p);
        return copyWith(Term::Fun{f->params, std::move(body), f->anns});
    }
    if (auto* a = t->as<Term::App>()) {
        TermPtr fn = subst(a->fn, ctx, binders);
        std::vector<TermPtr> args;
        for (const auto& arg : a->args) args.push_back(subst(arg, ctx, binders));
        return copyWith(Term::App{std::move(fn), std::move(args)});
    }
    if (auto* r = t->as<Term::Record>()) {
        std::vector<TermPtr> fields;
        for (const auto& f : r->fields) fields.push_back(subst(f, ctx, binders));
        return copyWith(Term::Record{r->label, std::move(fields)});
    }
    if (auto* l = t->as<Term::Let>()) {
        TermPtr bound = subst(l->bound, ctx, binders);
        bool shadowed = false;
        for (const auto& p : patternVars(l->pat))
            if (p == ctx.x) shadowed = true;
        TermPtr body = l->body;
        if (!shadowed) {
            std::vector<std::string> added;
            for (const auto& p : patternVars(l->pat))
                if (binders.insert(p).second) added.push_back(p);
            body = subst(l->body, ctx, binders);
            for (const auto& p : added) binders.erase(p);
        }
        return copyWith(Term::Let{l->pat, std::move(bound), std::move(body)});
    }
    const auto* m = t->as<Term::Match>();
    TermPtr scrut = subst(m->scrutinee, ctx, binders);
    std::vector<std::pair<PatternPtr, TermPtr>> branches;
    for (const auto& [p, b] : m->branches) {
        bool shadowed = false;
        for (const auto& pv : patternVars(p))
            if (pv == ctx.x) shadowed = true;
        if (shadowed) {
            branches.emplace_back(p, b);
            continue;
        }
        std::vector<std::string> added;
        for (const auto& pv : patternVars(p))
            if (binders.insert(pv).second) added.push_back(pv);
        branches.emplace_back(p, subst(b, ctx, binders));
        for (const auto& pv : added) binders.erase(pv);
    }
    return copyWith(Term::Match{std::move(scrut), std::move(branches)});
}

std::optional<TermPtr> substChecked(const TermPtr& body, const std::string& x,
                                    const TermPtr& replacement) {
    std::vector<std::string> fv = freeVars(replacement, {});
    std::set<std::string> fvSet(fv.begin(), fv.end());
    SubstCtx ctx{x, replacement, fvSet};
    std::set<std::string> binders;
    TermPtr out = subst(body, ctx, binders);
    if (ctx.captured) return std::nullopt;
    return out;
}

// One rewrite, first applicable site in preorder; scope holds every name
// visible at the current position (locals and globals).
std::optional<TermPtr> tryRewrite(const TermPtr& t, std::set<std::string> scope) {
    auto copyWith = [&](Term::Node node) {
        auto out = std::make_shared<Term>(*t);
        out->node = std::move(node);
        return TermPtr(out);
    };
    if (auto* l = t->as<Term::Let>()) {
        if (auto* pv = std::get_if<Pattern::Var>(&l->pat->node)) {
            const std::string& x = pv->name;
            // (a) variable alias: substitute everywhere.
            if (l->bound->isVar() && scope.count(l->bound->varName())) {
                if (auto out = substChecked(l->body, x, l->bound)) return out;
            }
            // (b) single use of a value, or a use first in evaluation order.
            if (countFree(l->body, x) == 1) {
                bool ok = isInlineValue(l->bound);
                if (!ok) {
                    std::set<std::string> walkScope = scope;
                    ok = pureWalk(l->body, x, walkScope) == Walk::Found;
                }
                if (ok) {
                    if (auto out = substChecked(l->body, x, l->bound)) return out;
                }
            }
        }
    }

    if (auto* f = t->as<Term::Fun>()) {
        std::set<std::string> inner = scope;
        for (const auto& p : f->params) inner.insert(p);
        if (auto body = tryRewrite(f->body, std::move(inner)))
            return copyWith(Term::Fun{f->params, std::move(*body), f->anns});
        return std::nullopt;
    }
    if (auto* a = t->as<Term::App>()) {
        if (auto fn = tryRewrite(a->fn, scope)) {
            auto args = a->args;
            return copyWith(Term::App{std::move(*fn), std::move(args)});
        }
        for (size_t i = 0; i < a->args.size(); i++) {
            if (auto arg = tryRewrite(a->args[i], scope)) {
                auto args = a->args;
                args[i] = std::move(*arg);
                return copyWith(Term::App{a->fn, std::move(args)});
            }
        }
        return std::nullopt;
    }
    if (auto* r = t->as<Term::Record>()) {
        for (size_t i = 0; i < r->fields.size(); i++) {
            if (auto f = tryRewrite(r->fields[i], scope)) {
                auto fields = r->fields;
                fields[i] = std::move(*f);
                return copyWith(Term::Record{r->label, std::move(fields)});
            }
        }
        return std::nullopt;
    }
    if (auto* l = t->as<Term::Let>()) {
        if (auto bound = tryRewrite(l->bound, scope))
            return copyWith(Term::Let{l->pat, std::move(*bound), l->body});
        std::set<std::string> inner = scope;
        for (const auto& p : patternVars(l->pat)) inner.insert(p);
        if (auto body = tryRewrite(l->body, std::move(inner)))
            return copyWith(Term::Let{l->pat, l->bound, std::move(*body)});
        return std::nullopt;
    }
    if (auto* m = t->as<Term::Match>()) {
        if (auto scrut = tryRewrite(m->scrutinee, scope)) {
            auto branches = m->branches;
            return copyWith(Term::Match{std::move(*scrut), std::move(branches)});
        }
        for (size_t i = 0; i < m->branches.size(); i++) {
            std::set<std::string> inner = scope;
            for (const auto& pv : patternVars(m->branches[i].first)) inner.insert(pv);
            if (auto b = tryRewrite(m->branches[i].second, std::move(inner))) {
                auto branches = m->branches;
                branches[i].second = std::move(*b);
                return copyWith(Term::Match{m->scrutinee, std::move(branches)});
            }
        }
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

TermPtr inlineExpr(const TermPtr& term, const std::set<std::string>& globals) {
    TermPtr t = term;
    while (auto next = tryRewrite(t, globals)) t = std::move(*next);
    return t;
}

Program inlineProgram(const Program& program) {
    std::set<std::string> globals = globalNames(program);
    Program out = program;
    for (auto& f : out.functions) {
        std::set<std::string> scope = globals;
        for (const auto& [n, tr] : f.params) scope.insert(n);
        f.body = inlineExpr(f.body, scope);
    }
    return relabel(out);
}

int letCount(const TermPtr& term) {
    int n = term->as<Term::Let>() ? 1 : 0;
    if (auto* f = term->as<Term::Fun>()) n += letCount(f->body);
    else if (auto* a = term->as<Term::App>()) {
        n += letCount(a->fn);
        for (const auto& x : a->args) n += letCount(x);
    } else if (auto* r = term->as<Term::Record>()) {
        for (const auto& x : r->fields) n += letCount(x);
    } else if (auto* l = term->as<Term::Let>()) {
        n += letCount(l->bound) + letCount(l->body);
    } else if (auto* m = term->as<Term::Match>()) {
        n += letCount(m->scrutinee);
        for (const auto& [p, b] : m->branches) n += letCount(b);
    }
    return n;
}

int letCount(const Program& program) {
    int n = 0;
    for (const auto& f : program.functions) n += letCount(f.body);
    return n;
}

}  // namespace semtrans::inliner
