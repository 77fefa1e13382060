#include "semtrans/anf.hpp"

#include <cctype>
#include <string>

namespace semtrans::anf {

using namespace syntax;

void FreshGen::note(const std::string& n) {
    if (n.size() > prefix_.size() && n.compare(0, prefix_.size(), prefix_) == 0) {
        bool digits = true;
        for (size_t i = prefix_.size(); i < n.size(); i++)
            if (!std::isdigit(static_cast<unsigned char>(n[i]))) digits = false;
        if (digits) {
            long idx = std::stol(n.substr(prefix_.size()));
            if (idx >= next_) next_ = idx + 1;
        }
    }
}

void FreshGen::scan(const TermPtr& term) {
    if (auto* v = term->as<Term::Var>()) {
        note(v->name);
        return;
    }
    if (auto* f = term->as<Term::Fun>()) {
        for (const auto& p : f->params) note(p);
        scan(f->body);
    } else if (auto* a = term->as<Term::App>()) {
        scan(a->fn);
        for (const auto& x : a->args) scan(x);
    } else if (auto* r = term->as<Term::Record>()) {
        for (const auto& x : r->fields) scan(x);
    } else if (auto* l = term->as<Term::Let>()) {
        for (const auto& p : patternVars(l->pat)) note(p);
        scan(l->bound);
        scan(l->body);
    } else if (auto* m = term->as<Term::Match>()) {
        scan(m->scrutinee);
        for (const auto& [p, b] : m->branches) {
            for (const auto& x : patternVars(p)) note(x);
            scan(b);
        }
    }
}

std::string FreshGen::fresh() { return prefix_ + std::to_string(next_++); }

namespace {

// Turns a continuation expecting a variable into one accepting any command,
// let-binding non-variables to a fresh name.
MetaK bindAtomic(FreshGen& fresh, std::function<TermPtr(TermPtr)> kv) {
    return [&fresh, kv = std::move(kv)](TermPtr c) -> TermPtr {
        if (c->isVar()) return kv(c);
        std::string x = fresh.fresh();
        SrcPos pos = c->pos;
        return mkLet(mkPVar(x, pos), c, kv(mkVar(x, pos)), pos);
    };
}

TermPtr normalizeSeq(std::vector<TermPtr> terms, size_t i, std::vector<TermPtr> acc,
                     const std::function<TermPtr(std::vector<TermPtr>)>& k, FreshGen& fresh) {
    if (i == terms.size()) return k(std::move(acc));
    TermPtr head = terms[i];
    return normalizeTerm(
        head,
        bindAtomic(fresh,
                   [&, terms = std::move(terms), acc = std::move(acc), i](TermPtr x) mutable {
                       acc.push_back(std::move(x));
                       return normalizeSeq(std::move(terms), i + 1, std::move(acc), k, fresh);
                   }),
        fresh);
}

TermPtr idK(TermPtr c) { return c; }

}  // namespace

TermPtr normalizeTerm(const TermPtr& term, const MetaK& k, FreshGen& fresh) {
    if (term->as<Term::Var>() || term->as<Term::TLit>()) return k(term);
    if (auto* f = term->as<Term::Fun>()) {
        TermPtr body = normalizeTerm(f->body, idK, fresh);
        return k(mkFun(f->params, std::move(body), f->anns, term->pos));
    }
    if (auto* a = term->as<Term::App>()) {
        SrcPos pos = term->pos;
        return normalizeTerm(
            a->fn,
            bindAtomic(fresh,
                       [&, args = a->args, pos](TermPtr xf) {
                           return normalizeSeq(
                               args, 0, {},
                               [&k, xf = std::move(xf), pos](std::vector<TermPtr> xs) {
                                   return k(mkApp(xf, std::move(xs), pos));
                               },
                               fresh);
                       }),
            fresh);
    }
    if (auto* l = term->as<Term::Let>()) {
        return normalizeTerm(
            l->bound,
            [&, l, pos = term->pos](TermPtr c1) {
                return mkLet(l->pat, std::move(c1), normalizeTerm(l->body, k, fresh), pos);
            },
            fresh);
    }
    if (auto* r = term->as<Term::Record>()) {
        return normalizeSeq(
            r->fields, 0, {},
            [&k, label = r->label, pos = term->pos](std::vector<TermPtr> xs) {
                return k(mkRecord(label, std::move(xs), pos));
            },
            fresh);
    }
    if (auto* m = term->as<Term::Match>()) {
        return normalizeTerm(
            m->scrutinee,
            bindAtomic(fresh,
                       [&, m, pos = term->pos](TermPtr x) {
                           std::vector<std::pair<PatternPtr, TermPtr>> branches;
                           for (const auto& [p, b] : m->branches)
                               branches.emplace_back(p, normalizeTerm(b, idK, fresh));
                           return k(mkMatch(std::move(x), std::move(branches), pos));
                       }),
            fresh);
    }
    return term;  // error discards its context
}

Program normalizeProgram(const Program& program) {
    Program out = program;
    for (auto& f : out.functions) {
        FreshGen fresh;
        fresh.scan(f.body);
        f.body = normalizeTerm(f.body, idK, fresh);
    }
    return relabel(out);
}

bool isCommand(const TermPtr& c) {
    if (c->as<Term::Var>() || c->as<Term::TLit>()) return true;
    if (auto* f = c->as<Term::Fun>()) return isAnfExpr(f->body);
    if (auto* a = c->as<Term::App>()) {
        if (!a->fn->isVar()) return false;
        for (const auto& x : a->args)
            if (!x->isVar()) return false;
        return true;
    }
    if (auto* r = c->as<Term::Record>()) {
        for (const auto& x : r->fields)
            if (!x->isVar()) return false;
        return true;
    }
    if (auto* m = c->as<Term::Match>()) {
        if (!m->scrutinee->isVar()) return false;
        for (const auto& [p, b] : m->branches)
            if (!isAnfExpr(b)) return false;
        return true;
    }
    return false;
}

bool isAnfExpr(const TermPtr& e) {
    if (e->as<Term::Error>()) return true;
    if (auto* l = e->as<Term::Let>()) return isCommand(l->bound) && isAnfExpr(l->body);
    return isCommand(e);
}

bool isAnf(const Program& program) {
    for (const auto& f : program.functions)
        if (!isAnfExpr(f.body)) return false;
    return true;
}

int nodeCount(const TermPtr& term) {
    std::vector<Label> ls;
    collectLabels(term, ls);
    return static_cast<int>(ls.size());
}

int nodeCount(const Program& program) {
    int n = 0;
    for (const auto& f : program.functions) n += nodeCount(f.body);
    return n;
}

}  // namespace semtrans::anf
