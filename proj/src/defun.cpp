#include "semtrans/defun.hpp"

#include <algorithm>
#include <functional>

#include "semtrans/anf.hpp"

namespace semtrans::defun {

using namespace syntax;

namespace {

void indexTerm(const TermPtr& t, std::map<Label, TermPtr>& byLabel) {
    byLabel[t->label] = t;
    if (auto* f = t->as<Term::Fun>()) {
        indexTerm(f->body, byLabel);
    } else if (auto* a = t->as<Term::App>()) {
        indexTerm(a->fn, byLabel);
        for (const auto& x : a->args) indexTerm(x, byLabel);
    } else if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields) indexTerm(x, byLabel);
    } else if (auto* l = t->as<Term::Let>()) {
        indexTerm(l->bound, byLabel);
        indexTerm(l->body, byLabel);
    } else if (auto* m = t->as<Term::Match>()) {
        indexTerm(m->scrutinee, byLabel);
        for (const auto& [p, b] : m->branches) indexTerm(b, byLabel);
    }
}

void collectFunLabels(const TermPtr& t, std::vector<Label>& out) {
    if (t->as<Term::Fun>()) out.push_back(t->label);
    if (auto* f = t->as<Term::Fun>()) {
        collectFunLabels(f->body, out);
    } else if (auto* a = t->as<Term::App>()) {
        collectFunLabels(a->fn, out);
        for (const auto& x : a->args) collectFunLabels(x, out);
    } else if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields) collectFunLabels(x, out);
    } else if (auto* l = t->as<Term::Let>()) {
        collectFunLabels(l->bound, out);
        collectFunLabels(l->body, out);
    } else if (auto* m = t->as<Term::Match>()) {
        collectFunLabels(m->scrutinee, out);
        for (const auto& [p, b] : m->branches) collectFunLabels(b, out);
    }
}

// Shadow-aware simultaneous renaming of free variables.
TermPtr renameFree(const TermPtr& t, const std::map<std::string, std::string>& ren) {
    if (auto* v = t->as<Term::Var>()) {
        auto it = ren.find(v->name);
        if (it == ren.end()) return t;
        TermPtr out = mkVar(it->second, t->pos);
        const_cast<Term&>(*out).label = t->label;
        return out;
    }
    if (t->as<Term::TLit>() || t->as<Term::Error>()) return t;
    auto without = [&](const std::vector<std::string>& names) {
        std::map<std::string, std::string> r = ren;
        for (const auto& n : names) r.erase(n);
        return r;
    };
    auto copyWith = [&](Term::Node node) {
        auto out = std::make_shared<Term>(*t);
        out->node = std::move(node);
        return TermPtr(out);
    };
    if (auto* f = t->as<Term::Fun>()) {
        auto r = without(f->params);
        if (r.empty()) return t;
        return copyWith(Term::Fun{f->params, renameFree(f->body, r), f->anns});
    }
    if (auto* a = t->as<Term::App>()) {
        std::vector<TermPtr> args;
        for (const auto& x : a->args) args.push_back(renameFree(x, ren));
        return copyWith(Term::App{renameFree(a->fn, ren), std::move(args)});
    }
    if (auto* rec = t->as<Term::Record>()) {
        std::vector<TermPtr> fields;
        for (const auto& x : rec->fields) fields.push_back(renameFree(x, ren));
        return copyWith(Term::Record{rec->label, std::move(fields)});
    }
    if (auto* l = t->as<Term::Let>()) {
        TermPtr bound = renameFree(l->bound, ren);
        auto r = without(patternVars(l->pat));
        return copyWith(Term::Let{l->pat, std::move(bound), renameFree(l->body, r)});
    }
    const auto* m = t->as<Term::Match>();
    std::vector<std::pair<PatternPtr, TermPtr>> branches;
    for (const auto& [p, b] : m->branches)
        branches.emplace_back(p, renameFree(b, without(patternVars(p))));
    return copyWith(Term::Match{renameFree(m->scrutinee, ren), std::move(branches)});
}

}  // namespace

Defun::Defun(const Program& program, const cfa::Analysis& analysis)
    : program_(program), analysis_(analysis) {
    funFvs_ = scopedFunFreeVars(program_);
    for (const auto& f : program_.functions) {
        indexTerm(f.body, byLabel_);
        std::vector<Label> funs;
        collectFunLabels(f.body, funs);
        int ordinal = 1;
        for (Label l : funs) funSite_[l] = {f.name, ordinal++};
    }
    for (const auto& f : program_.functions) takenNames_.insert(f.name);
    for (const auto& d : program_.datatypes) takenNames_.insert(d.name);
    for (const auto& [label, arity] : program_.declaredLabels()) takenNames_.insert(label);

    // Distinct fun nodes may not share a #:name: their constructors would
    // collide in a single apply dispatch.
    std::map<std::string, Label> named;
    for (const auto& [l, site] : funSite_) {
        const auto& anns = byLabel_.at(l)->as<Term::Fun>()->anns;
        if (!anns.structName) continue;
        auto [it, fresh] = named.emplace(*anns.structName, l);
        if (!fresh)
            throw DuplicateConstructorError("#:name " + *anns.structName +
                                            " is used by more than one fun");
        if (takenNames_.count(*anns.structName))
            throw DuplicateConstructorError("#:name " + *anns.structName +
                                            " collides with an existing top-level name");
    }
}

bool Defun::defunFun(const FunId& id) const {
    switch (id.kind) {
        case FunId::Kind::Prim: return true;
        case FunId::Kind::Top: {
            const FunDef* f = program_.findFunction(id.name);
            return f && !f->anns.noDefun;
        }
        case FunId::Kind::Closure:
            return !byLabel_.at(id.funLabel)->as<Term::Fun>()->anns.noDefun;
    }
    return false;
}

int Defun::calleeArity(const FunId& id) const {
    switch (id.kind) {
        case FunId::Kind::Prim: return id.name == "not" ? 1 : 2;
        case FunId::Kind::Top:
            return static_cast<int>(program_.findFunction(id.name)->params.size());
        case FunId::Kind::Closure:
            return static_cast<int>(
                byLabel_.at(id.funLabel)->as<Term::Fun>()->params.size());
    }
    return -1;
}

std::string Defun::freshName(const std::string& base) {
    if (!takenNames_.count(base)) {
        takenNames_.insert(base);
        return base;
    }
    for (int i = 2;; i++) {
        std::string candidate = base + "-" + std::to_string(i);
        if (!takenNames_.count(candidate)) {
            takenNames_.insert(candidate);
            return candidate;
        }
    }
}

std::string Defun::constructorName(const FunId& id) {
    auto it = ctorNames_.find(id);
    if (it != ctorNames_.end()) return it->second;
    std::string name;
    switch (id.kind) {
        case FunId::Kind::Prim: name = freshName("Prim-" + id.name); break;
        case FunId::Kind::Top: name = freshName("Top-" + id.name); break;
        case FunId::Kind::Closure: {
            const auto& anns = byLabel_.at(id.funLabel)->as<Term::Fun>()->anns;
            if (anns.structName) {
                name = *anns.structName;  // uniqueness checked up front
            } else {
                const auto& [encl, ordinal] = funSite_.at(id.funLabel);
                name = freshName("Fun-" + encl + "-" + std::to_string(ordinal));
            }
            break;
        }
    }
    ctorNames_[id] = name;
    ctorOrder_.emplace_back(id, name);
    return name;
}

std::string Defun::groupName(const std::vector<FunId>& callees, int argCount, SrcPos pos,
                             Label siteLabel) {
    auto key = std::make_pair(callees, argCount);
    auto it = groupIndex_.find(key);
    if (it != groupIndex_.end()) return groups_[it->second].name;

    for (const auto& id : callees) {
        int arity = calleeArity(id);
        if (arity != argCount) {
            std::string msg = "call site at label " + std::to_string(siteLabel);
            if (pos.known()) msg += " (" + pos.str() + ")";
            msg += " passes " + std::to_string(argCount) + " arguments but callee " + id.str() +
                   " takes " + std::to_string(arity);
            throw ArityConflictError(msg, siteLabel, pos);
        }
    }

    Group g;
    g.callees = callees;
    g.argCount = argCount;
    std::optional<std::string> shared;
    bool allNamed = !callees.empty();
    for (const auto& id : callees) {
        if (id.kind != FunId::Kind::Closure) {
            allNamed = false;
            break;
        }
        const auto& anns = byLabel_.at(id.funLabel)->as<Term::Fun>()->anns;
        if (!anns.structName) {
            allNamed = false;
            break;
        }
        if (!shared) shared = *anns.structName;
        else if (*shared != *anns.structName) allNamed = false;
    }
    if (allNamed && shared) {
        g.name = freshName("apply-" + *shared);
    } else {
        g.name = freshName("apply-" + std::to_string(++numberedApplies_));
    }
    groupIndex_[key] = static_cast<int>(groups_.size());
    groups_.push_back(g);
    return groups_.back().name;
}

TermPtr Defun::rewrite(const TermPtr& t, std::set<std::string> bound) {
    SrcPos pos = t->pos;
    auto keepLabel = [&](TermPtr out) {
        const_cast<Term&>(*out).label = t->label;
        return out;
    };
    if (auto* v = t->as<Term::Var>()) {
        if (bound.count(v->name)) return t;
        if (isPrimOp(v->name))
            return keepLabel(mkRecord(constructorName(FunId::prim(v->name)), {}, pos));
        if (program_.isTopLevel(v->name) && defunFun(FunId::top(v->name)))
            return keepLabel(mkRecord(constructorName(FunId::top(v->name)), {}, pos));
        return t;
    }
    if (t->as<Term::TLit>() || t->as<Term::Error>()) return t;
    if (auto* f = t->as<Term::Fun>()) {
        if (defunFun(FunId::closure(t->label))) {
            std::vector<TermPtr> fields;
            for (const auto& fv : funFvs_.at(t->label)) fields.push_back(mkVar(fv, pos));
            return keepLabel(mkRecord(constructorName(FunId::closure(t->label)),
                                      std::move(fields), pos));
        }
        std::set<std::string> inner = bound;
        for (const auto& p : f->params) inner.insert(p);
        return keepLabel(mkFun(f->params, rewrite(f->body, std::move(inner)), f->anns, pos));
    }
    if (auto* a = t->as<Term::App>()) {
        std::vector<TermPtr> args;
        for (const auto& x : a->args) args.push_back(rewrite(x, bound));
        const std::string& op = a->fn->varName();
        bool local = bound.count(op) > 0;
        if (!local && (isPrimOp(op) || program_.isTopLevel(op)))
            return keepLabel(mkApp(a->fn, std::move(args), pos));
        auto it = analysis_.callees.find(a->fn->label);
        if (it == analysis_.callees.end() || it->second.empty()) {
            warnings_.insert("call site at label " + std::to_string(a->fn->label) +
                             " has no callees; left untouched");
            return keepLabel(mkApp(a->fn, std::move(args), pos));
        }
        bool all = true, none = true;
        for (const auto& id : it->second) {
            if (defunFun(id)) none = false;
            else all = false;
        }
        if (!all && !none) {
            std::string msg = "call site at label " + std::to_string(a->fn->label);
            if (a->fn->pos.known()) msg += " (" + a->fn->pos.str() + ")";
            msg += " mixes defunctionalized and kept callees:";
            for (const auto& id : it->second)
                msg += " " + id.str() + (defunFun(id) ? "[defun]" : "[keep]");
            throw MixedDefunError(msg, a->fn->label, a->fn->pos);
        }
        if (none) return keepLabel(mkApp(a->fn, std::move(args), pos));
        std::vector<FunId> callees(it->second.begin(), it->second.end());
        std::string apply =
            groupName(callees, static_cast<int>(args.size()), a->fn->pos, a->fn->label);
        std::vector<TermPtr> dispatchArgs;
        dispatchArgs.push_back(a->fn);
        for (auto& x : args) dispatchArgs.push_back(std::move(x));
        return keepLabel(mkApp(mkVar(apply, pos), std::move(dispatchArgs), pos));
    }
    if (auto* r = t->as<Term::Record>()) {
        std::vector<TermPtr> fields;
        for (const auto& x : r->fields) fields.push_back(rewrite(x, bound));
        return keepLabel(mkRecord(r->label, std::move(fields), pos));
    }
    if (auto* l = t->as<Term::Let>()) {
        TermPtr boundTerm = rewrite(l->bound, bound);
        std::set<std::string> inner = bound;
        for (const auto& p : patternVars(l->pat)) inner.insert(p);
        return keepLabel(mkLet(l->pat, std::move(boundTerm), rewrite(l->body, std::move(inner)),
                               pos));
    }
    const auto* m = t->as<Term::Match>();
    std::vector<std::pair<PatternPtr, TermPtr>> branches;
    for (const auto& [p, b] : m->branches) {
        std::set<std::string> inner = bound;
        for (const auto& x : patternVars(p)) inner.insert(x);
        branches.emplace_back(p, rewrite(b, std::move(inner)));
    }
    return keepLabel(mkMatch(m->scrutinee, std::move(branches), pos));
}

FunDef Defun::makeApply(Group g) {
    // Parameter names: readable ones unless they could collide with a callee's
    // free variables or a global referenced from a branch body.
    std::vector<std::string> params;
    params.push_back("fn");
    for (int i = 0; i < g.argCount; i++) params.push_back("v" + std::to_string(i + 1));
    std::set<std::string> avoid = globalNames(program_);
    for (const auto& id : g.callees)
        if (id.kind == FunId::Kind::Closure)
            for (const auto& fv : funFvs_.at(id.funLabel)) avoid.insert(fv);
    for (const auto& gr : groups_) avoid.insert(gr.name);
    bool collide = false;
    for (const auto& p : params)
        if (avoid.count(p)) collide = true;
    if (collide) {
        anf::FreshGen gen("$v");
        for (const auto& f : program_.functions) gen.scan(f.body);
        for (auto& p : params) p = gen.fresh();
    }

    std::vector<std::pair<PatternPtr, TermPtr>> branches;
    for (const auto& id : g.callees) {
        std::string ctor = constructorName(id);
        std::vector<TermPtr> callArgs;
        for (int i = 0; i < g.argCount; i++) callArgs.push_back(mkVar(params[i + 1]));
        if (id.kind == FunId::Kind::Prim) {
            branches.emplace_back(mkPRecord(ctor, {}),
                                  mkApp(mkVar(id.name), std::move(callArgs)));
        } else if (id.kind == FunId::Kind::Top) {
            branches.emplace_back(mkPRecord(ctor, {}),
                                  mkApp(mkVar(id.name), std::move(callArgs)));
        } else {
            const TermPtr& funTerm = byLabel_.at(id.funLabel);
            const auto* f = funTerm->as<Term::Fun>();
            std::set<std::string> bound(f->params.begin(), f->params.end());
            TermPtr body = rewrite(f->body, std::move(bound));
            std::map<std::string, std::string> ren;
            for (size_t i = 0; i < f->params.size(); i++) ren[f->params[i]] = params[i + 1];
            body = renameFree(body, ren);
            std::vector<PatternPtr> fieldPats;
            for (const auto& fv : funFvs_.at(id.funLabel)) fieldPats.push_back(mkPVar(fv));
            branches.emplace_back(mkPRecord(ctor, std::move(fieldPats)), std::move(body));
        }
    }
    FunDef def;
    def.name = g.name;
    for (const auto& p : params) def.params.emplace_back(p, std::nullopt);
    def.body = mkMatch(mkVar(params[0]), std::move(branches));
    return def;
}

DefunResult Defun::run() {
    DefunResult result;
    Program out = program_;
    for (auto& f : out.functions) {
        std::set<std::string> bound;
        for (const auto& [n, tr] : f.params) bound.insert(n);
        f.body = rewrite(f.body, std::move(bound));
    }
    // Generating an apply body can discover further call-site groups inside
    // closure bodies; keep going until the queue drains.
    std::vector<FunDef> applyDefs;
    size_t done = 0;
    while (done < groups_.size()) {
        applyDefs.push_back(makeApply(groups_[done]));
        done++;
    }
    for (const auto& [id, name] : ctorOrder_) {
        StructDef s;
        s.label = name;
        if (id.kind == FunId::Kind::Closure)
            for (const auto& fv : funFvs_.at(id.funLabel)) s.fieldNames.push_back(fv);
        out.structures.push_back(std::move(s));
        result.generatedLabels.insert(name);
    }
    for (auto& def : applyDefs) out.functions.push_back(std::move(def));
    for (const auto& g : groups_) {
        ApplySpec spec;
        spec.name = g.name;
        spec.argCount = g.argCount;
        spec.callees = g.callees;
        result.applies.push_back(std::move(spec));
    }
    result.program = relabel(out);
    result.warnings = warnings_;
    return result;
}

DefunResult defunProgram(const Program& program, const cfa::Analysis& analysis) {
    return Defun(program, analysis).run();
}

}  // namespace semtrans::defun
