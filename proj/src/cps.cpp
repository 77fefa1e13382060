#include "semtrans/cps.hpp"

namespace semtrans::cps {

using namespace syntax;
using cfa::FunId;

std::string atomicityName(Atomicity a) {
    switch (a) {
        case Atomicity::AllAtomic: return "all-atomic";
        case Atomicity::NoneAtomic: return "none-atomic";
        case Atomicity::Mixed: return "mixed";
        case Atomicity::Empty: return "empty";
    }
    return "?";
}

namespace {

void indexFuns(const TermPtr& t, std::map<Label, TermPtr>& byLabel) {
    byLabel[t->label] = t;
    if (auto* f = t->as<Term::Fun>()) {
        indexFuns(f->body, byLabel);
    } else if (auto* a = t->as<Term::App>()) {
        indexFuns(a->fn, byLabel);
        for (const auto& x : a->args) indexFuns(x, byLabel);
    } else if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields) indexFuns(x, byLabel);
    } else if (auto* l = t->as<Term::Let>()) {
        indexFuns(l->bound, byLabel);
        indexFuns(l->body, byLabel);
    } else if (auto* m = t->as<Term::Match>()) {
        indexFuns(m->scrutinee, byLabel);
        for (const auto& [p, b] : m->branches) indexFuns(b, byLabel);
    }
}

}  // namespace

Cps::Cps(const Program& program, const cfa::Analysis& analysis)
    : program_(program), analysis_(analysis) {
    for (const auto& f : program_.functions) {
        indexFuns(f.body, byLabel_);
        kGen_.scan(f.body);
        vGen_.scan(f.body);
    }
}

bool Cps::atomicFun(const FunId& id) const {
    switch (id.kind) {
        case FunId::Kind::Prim: return true;
        case FunId::Kind::Top: {
            if (id.name == "main") return true;
            const FunDef* f = program_.findFunction(id.name);
            return f && f->anns.atomic;
        }
        case FunId::Kind::Closure: {
            auto it = byLabel_.find(id.funLabel);
            return it != byLabel_.end() && it->second->as<Term::Fun>()->anns.atomic;
        }
    }
    return false;
}

Atomicity Cps::classify(Label operatorLabel) const {
    auto it = analysis_.callees.find(operatorLabel);
    if (it == analysis_.callees.end() || it->second.empty()) return Atomicity::Empty;
    bool all = true, none = true;
    for (const auto& id : it->second) {
        if (atomicFun(id)) none = false;
        else all = false;
    }
    if (all) return Atomicity::AllAtomic;
    if (none) return Atomicity::NoneAtomic;
    return Atomicity::Mixed;
}

Atomicity Cps::verdictAt(const TermPtr& operatorVar) const {
    Atomicity a = classify(operatorVar->label);
    if (a == Atomicity::Empty) {
        warnings_.insert("call site at label " + std::to_string(operatorVar->label) +
                         " has no callees; kept in direct style");
        return Atomicity::AllAtomic;
    }
    return a;
}

void Cps::mixedError(const TermPtr& operatorVar) const {
    std::string msg = "call site at label " + std::to_string(operatorVar->label);
    if (operatorVar->pos.known()) msg += " (" + operatorVar->pos.str() + ")";
    msg += " mixes atomic and non-atomic callees:";
    for (const auto& id : analysis_.callees.at(operatorVar->label))
        msg += " " + id.str() + (atomicFun(id) ? "[atomic]" : "[cps]");
    throw MixedAtomicityError(msg, operatorVar->label, operatorVar->pos);
}

bool Cps::trivial(const TermPtr& c) const {
    if (c->as<Term::Var>() || c->as<Term::TLit>() || c->as<Term::Record>() ||
        c->as<Term::Fun>() || c->as<Term::Error>())
        return true;
    if (auto* a = c->as<Term::App>()) {
        Atomicity v = classify(a->fn->label);
        return v == Atomicity::AllAtomic || v == Atomicity::Empty;
    }
    if (auto* m = c->as<Term::Match>()) {
        for (const auto& [p, b] : m->branches) {
            TermPtr e = b;
            while (auto* l = e->as<Term::Let>()) {
                if (!trivial(l->bound)) return false;
                e = l->body;
            }
            if (!trivial(e)) return false;
        }
        return true;
    }
    return false;
}

TermPtr Cps::cpsTerm(const TermPtr& e, const std::string& k) {
    SrcPos pos = e->pos;
    auto applyK = [&](TermPtr x) { return mkApp(mkVar(k, pos), {std::move(x)}, pos); };
    auto letBindThenApplyK = [&](TermPtr value) {
        std::string y = vGen_.fresh();
        return mkLet(mkPVar(y, pos), std::move(value), applyK(mkVar(y, pos)), pos);
    };

    if (e->as<Term::Var>()) return applyK(e);
    if (e->as<Term::TLit>() || e->as<Term::Record>()) return letBindThenApplyK(e);
    if (auto* f = e->as<Term::Fun>()) {
        if (f->anns.atomic)
            return letBindThenApplyK(mkFun(f->params, directTerm(f->body), f->anns, pos));
        std::string k2 = kGen_.fresh();
        std::vector<std::string> params = f->params;
        params.push_back(k2);
        return letBindThenApplyK(mkFun(std::move(params), cpsTerm(f->body, k2), f->anns, pos));
    }
    if (auto* a = e->as<Term::App>()) {
        Atomicity v = verdictAt(a->fn);
        if (v == Atomicity::Mixed) mixedError(a->fn);
        if (v == Atomicity::NoneAtomic) {
            std::vector<TermPtr> args = a->args;
            args.push_back(mkVar(k, pos));
            return mkApp(a->fn, std::move(args), pos);
        }
        return letBindThenApplyK(e);
    }
    if (auto* m = e->as<Term::Match>()) {
        std::vector<std::pair<PatternPtr, TermPtr>> branches;
        for (const auto& [p, b] : m->branches) branches.emplace_back(p, cpsTerm(b, k));
        return mkMatch(m->scrutinee, std::move(branches), pos);
    }
    if (auto* l = e->as<Term::Let>()) {
        if (trivial(l->bound))
            return mkLet(l->pat, directTerm(l->bound), cpsTerm(l->body, k), pos);
        std::string k2 = kGen_.fresh();
        std::string y = vGen_.fresh();
        TermPtr contBody = mkLet(l->pat, mkVar(y, pos), cpsTerm(l->body, k), pos);
        TermPtr cont = mkFun({y}, std::move(contBody), {}, pos);
        return mkLet(mkPVar(k2, pos), std::move(cont), cpsTerm(l->bound, k2), pos);
    }
    return e;  // error throws out the continuation
}

TermPtr Cps::directTerm(const TermPtr& e) {
    SrcPos pos = e->pos;
    if (e->as<Term::Var>() || e->as<Term::TLit>() || e->as<Term::Record>() ||
        e->as<Term::Error>())
        return e;
    if (auto* f = e->as<Term::Fun>()) {
        if (f->anns.atomic) return mkFun(f->params, directTerm(f->body), f->anns, pos);
        std::string k2 = kGen_.fresh();
        std::vector<std::string> params = f->params;
        params.push_back(k2);
        return mkFun(std::move(params), cpsTerm(f->body, k2), f->anns, pos);
    }
    if (auto* a = e->as<Term::App>()) {
        Atomicity v = verdictAt(a->fn);
        if (v == Atomicity::Mixed) mixedError(a->fn);
        if (v == Atomicity::AllAtomic) return e;
        std::string k = kGen_.fresh();
        std::string y = vGen_.fresh();
        std::vector<TermPtr> args = a->args;
        args.push_back(mkVar(k, pos));
        return mkLet(mkPVar(k, pos), mkFun({y}, mkVar(y, pos), {}, pos),
                     mkApp(a->fn, std::move(args), pos), pos);
    }
    if (auto* m = e->as<Term::Match>()) {
        std::vector<std::pair<PatternPtr, TermPtr>> branches;
        for (const auto& [p, b] : m->branches) branches.emplace_back(p, directTerm(b));
        return mkMatch(m->scrutinee, std::move(branches), pos);
    }
    const auto* l = e->as<Term::Let>();
    // A let binding a call to a CPS function chains the allocation of the
    // identity continuation to keep the term in ANF.
    if (const auto* call = l->bound->as<Term::App>()) {
        Atomicity v = verdictAt(call->fn);
        if (v == Atomicity::Mixed) mixedError(call->fn);
        if (v == Atomicity::NoneAtomic) {
            std::string k = kGen_.fresh();
            std::string z = vGen_.fresh();
            std::vector<TermPtr> args = call->args;
            args.push_back(mkVar(k, pos));
            TermPtr inner = mkLet(l->pat, mkApp(call->fn, std::move(args), l->bound->pos),
                                  directTerm(l->body), pos);
            return mkLet(mkPVar(k, pos), mkFun({z}, mkVar(z, pos), {}, pos), std::move(inner),
                         pos);
        }
    }
    return mkLet(l->pat, directTerm(l->bound), directTerm(l->body), pos);
}

Program Cps::run() {
    Program out = program_;
    for (auto& f : out.functions) {
        bool atomic = f.name == "main" || f.anns.atomic;
        if (atomic) {
            f.body = directTerm(f.body);
        } else {
            std::string k = kGen_.fresh();
            f.body = cpsTerm(f.body, k);
            f.params.emplace_back(k, std::nullopt);
        }
    }
    return relabel(out);
}

Program cpsProgram(const Program& program, const cfa::Analysis& analysis,
                   std::set<std::string>* warnings) {
    Cps t(program, analysis);
    Program out = t.run();
    if (warnings)
        for (const auto& w : t.warnings()) warnings->insert(w);
    return out;
}

}  // namespace semtrans::cps
