#include "semtrans/cfa.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "semtrans/anf.hpp"

namespace semtrans::cfa {

using namespace syntax;

std::string FunId::str() const {
    switch (kind) {
        case Kind::Prim: return "(prim " + name + ")";
        case Kind::Top: return "(top " + name + ")";
        case Kind::Closure: return "(fun l" + std::to_string(funLabel) + ")";
    }
    return "?";
}

AbsVal AbsVal::mkBase(BaseTp tp) {
    AbsVal v;
    v.kind = Kind::Base;
    v.base = tp;
    return v;
}
AbsVal AbsVal::mkAny() {
    AbsVal v;
    v.kind = Kind::Any;
    return v;
}
AbsVal AbsVal::mkPrim(std::string op) {
    AbsVal v;
    v.kind = Kind::Prim;
    v.name = std::move(op);
    return v;
}
AbsVal AbsVal::mkRecord(std::string label, std::vector<Addr> fields) {
    AbsVal v;
    v.kind = Kind::Record;
    v.name = std::move(label);
    v.fields = std::move(fields);
    return v;
}
AbsVal AbsVal::mkClosure(Label l, AbsEnv env) {
    AbsVal v;
    v.kind = Kind::Closure;
    v.funLabel = l;
    v.env = std::move(env);
    return v;
}
AbsVal AbsVal::mkTopFun(std::string name) {
    AbsVal v;
    v.kind = Kind::TopFun;
    v.name = std::move(name);
    return v;
}

std::string AbsVal::str() const {
    switch (kind) {
        case Kind::Base: return baseTpName(base);
        case Kind::Any: return "Any";
        case Kind::Prim: return "(prim " + name + ")";
        case Kind::TopFun: return "(top " + name + ")";
        case Kind::Closure: return "(fun l" + std::to_string(funLabel) + ")";
        case Kind::Record: {
            std::string s = "{" + name;
            for (Addr a : fields) s += " @" + std::to_string(a);
            return s + "}";
        }
    }
    return "?";
}

bool AbstractStore::joinFrom(const AbstractStore& other) {
    bool grew = false;
    for (const auto& [a, vs] : other.vals)
        for (const auto& v : vs) grew |= addVal(a, v);
    for (const auto& [a, ks] : other.konts)
        for (const auto& k : ks) grew |= addFrame(a, k);
    return grew;
}

const std::set<AbsVal>& AbstractStore::valsAt(Addr a) const {
    static const std::set<AbsVal> empty;
    auto it = vals.find(a);
    return it == vals.end() ? empty : it->second;
}

const std::set<AbsFrame>& AbstractStore::framesAt(Addr a) const {
    static const std::set<AbsFrame> empty;
    auto it = konts.find(a);
    return it == konts.end() ? empty : it->second;
}

// ---------------------------------------------------------------------------
// Machine construction: label index and store seeding
// ---------------------------------------------------------------------------

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

BaseTp litBase(const Lit& v) {
    if (std::holds_alternative<std::int64_t>(v)) return BaseTp::Integer;
    if (std::holds_alternative<bool>(v)) return BaseTp::Boolean;
    return BaseTp::String;
}

}  // namespace

AbstractMachine::AbstractMachine(const Program& program) : program_(program) {
    if (!anf::isAnf(program)) throw AnalysisError("analysis requires a program in A-normal form");
    for (const auto& f : program_.functions) {
        indexTerm(f.body, byLabel_);
        fnTable_[f.name] = &f;
    }
    funFvs_ = scopedFunFreeVars(program_);
    buildSeeds();
}

void AbstractMachine::buildSeeds() {
    Addr next = -1;
    auto alloc = [&](const std::string& name) {
        seeds_[name] = next;
        return next--;
    };
    Addr aString = alloc("type:String");
    Addr aInteger = alloc("type:Integer");
    Addr aBoolean = alloc("type:Boolean");
    Addr aAny = alloc("type:Any");
    seedStore_.addVal(aString, AbsVal::mkBase(BaseTp::String));
    seedStore_.addVal(aInteger, AbsVal::mkBase(BaseTp::Integer));
    seedStore_.addVal(aBoolean, AbsVal::mkBase(BaseTp::Boolean));
    seedStore_.addVal(aAny, AbsVal::mkAny());
    for (const auto& d : program_.datatypes) alloc("type:" + d.name);
    for (const auto& s : program_.structures) alloc("type:" + s.label);
    for (const auto& op : primOps()) seedStore_.addVal(alloc("prim:" + op), AbsVal::mkPrim(op));
    for (const auto& f : program_.functions)
        seedStore_.addVal(alloc("fn:" + f.name), AbsVal::mkTopFun(f.name));

    // Structure seeds: record values whose fields are unconstrained.
    for (const auto& s : program_.structures) {
        std::vector<Addr> fields(s.fieldNames.size(), seeds_.at("type:Any"));
        seedStore_.addVal(seeds_.at("type:" + s.label), AbsVal::mkRecord(s.label, fields));
    }
    // Datatype seeds, iterated to a fixed point because datatypes may
    // reference each other (and themselves) as variants.
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& d : program_.datatypes) {
            Addr a = seeds_.at("type:" + d.name);
            for (const auto& v : d.variants) {
                if (v.sig) {
                    std::vector<Addr> fields;
                    for (const auto& tr : v.sig->second) fields.push_back(addrOfType(tr));
                    grew |= seedStore_.addVal(a, AbsVal::mkRecord(v.sig->first, fields));
                } else if (v.ref->kind == TypeRef::Kind::Base) {
                    grew |= seedStore_.addVal(a, AbsVal::mkBase(v.ref->base));
                } else if (v.ref->kind == TypeRef::Kind::Any) {
                    grew |= seedStore_.addVal(a, AbsVal::mkAny());
                } else {
                    Addr src = addrOfType(*v.ref);
                    for (const auto& val : seedStore_.valsAt(src))
                        grew |= seedStore_.addVal(a, val);
                }
            }
        }
    }
}

Addr AbstractMachine::addrOfType(const TypeRef& tr) const {
    switch (tr.kind) {
        case TypeRef::Kind::Base: return seeds_.at("type:" + baseTpName(tr.base));
        case TypeRef::Kind::Any: return seeds_.at("type:Any");
        case TypeRef::Kind::Named: {
            auto it = seeds_.find("type:" + tr.name);
            if (it == seeds_.end())
                throw AnalysisError("type `" + tr.name + "` is not declared");
            return it->second;
        }
    }
    throw AnalysisError("unreachable type kind");
}

Addr AbstractMachine::seedAddr(const std::string& name) const {
    auto it = seeds_.find(name);
    if (it == seeds_.end()) throw AnalysisError("unknown seed " + name);
    return it->second;
}

const TermPtr& AbstractMachine::termAt(Label l) const {
    auto it = byLabel_.find(l);
    if (it == byLabel_.end()) throw AnalysisError("no term at label " + std::to_string(l));
    return it->second;
}

AbstractConfig AbstractMachine::initConfig() const {
    AbstractConfig c;
    c.store = seedStore_;
    const FunDef& mainFn = program_.main();
    AbsEnv env;
    for (const auto& [name, tr] : mainFn.params) {
        if (!tr) throw AnalysisError("main parameter `" + name + "` lacks a type annotation");
        env[name] = addrOfType(*tr);
    }
    Addr k0 = mainFn.body->label;
    c.store.addFrame(k0, AbsFrame::mkHalt());
    PartialConfig g;
    g.mode = PartialConfig::Mode::Eval;
    g.env = std::move(env);
    g.expr = mainFn.body->label;
    g.kont = k0;
    c.configs.insert(std::move(g));
    return c;
}

std::optional<Addr> AbstractMachine::lookup(const AbsEnv& env, const std::string& name) const {
    auto it = env.find(name);
    if (it != env.end()) return it->second;
    if (fnTable_.count(name)) return seeds_.at("fn:" + name);
    if (isPrimOp(name)) return seeds_.at("prim:" + name);
    return std::nullopt;
}

std::vector<AbsEnv> AbstractMachine::matchAbs(const AbstractStore& store, Addr addr,
                                              const AbsVal& v, const PatternPtr& pat,
                                              const AbsEnv& env) const {
    if (auto* pv = std::get_if<Pattern::Var>(&pat->node)) {
        AbsEnv e = env;
        e[pv->name] = addr;
        return {e};
    }
    if (std::get_if<Pattern::Wild>(&pat->node)) return {env};
    if (v.kind == AbsVal::Kind::Any) {
        warnings_.insert("Any matched against a non-variable pattern at " +
                         (pat->pos.known() ? pat->pos.str() : std::string("?")) +
                         "; treated as no match");
        return {};
    }
    if (auto* pl = std::get_if<Pattern::PLit>(&pat->node)) {
        if (v.kind == AbsVal::Kind::Base && v.base == litBase(pl->value)) return {env};
        return {};
    }
    if (auto* pt = std::get_if<Pattern::Type>(&pat->node)) {
        if (v.kind == AbsVal::Kind::Base && v.base == pt->tp) {
            AbsEnv e = env;
            e[pt->name] = addr;
            return {e};
        }
        return {};
    }
    const auto& pr = std::get<Pattern::Record>(pat->node);
    if (v.kind != AbsVal::Kind::Record || v.name != pr.label ||
        v.fields.size() != pr.fields.size())
        return {};
    std::set<AbsEnv> envs = {env};
    for (size_t i = 0; i < pr.fields.size(); i++) {
        std::set<AbsEnv> next;
        for (const auto& e : envs)
            for (const AbsVal& fv : store.valsAt(v.fields[i]))
                for (auto& e2 : matchAbs(store, v.fields[i], fv, pr.fields[i], e))
                    next.insert(std::move(e2));
        envs = std::move(next);
        if (envs.empty()) break;
    }
    return {envs.begin(), envs.end()};
}

void AbstractMachine::stepConfig(const PartialConfig& g, const AbstractStore& snapshot,
                                 AbstractStore& delta, std::set<PartialConfig>& out) const {
    auto evalCfg = [&](AbsEnv env, Label expr, Addr kont) {
        PartialConfig n;
        n.mode = PartialConfig::Mode::Eval;
        n.env = std::move(env);
        n.expr = expr;
        n.kont = kont;
        out.insert(std::move(n));
    };
    auto contCfg = [&](Addr value, Addr kont) {
        PartialConfig n;
        n.mode = PartialConfig::Mode::Continue;
        n.value = value;
        n.kont = kont;
        out.insert(std::move(n));
    };

    if (g.mode == PartialConfig::Mode::Continue) {
        for (const AbsFrame& k : snapshot.framesAt(g.kont)) {
            if (k.halt) continue;  // final state
            const TermPtr& letTerm = termAt(k.letLabel);
            const auto* l = letTerm->as<Term::Let>();
            for (const AbsVal& v : snapshot.valsAt(g.value))
                for (auto& env : matchAbs(snapshot, g.value, v, l->pat, k.env))
                    evalCfg(std::move(env), l->body->label, k.next);
        }
        return;
    }

    const TermPtr& t = termAt(g.expr);
    if (auto* l = t->as<Term::Let>()) {
        AbsFrame frame;
        frame.env = g.env;
        frame.letLabel = t->label;
        frame.next = g.kont;
        Addr k2 = l->bound->label;
        delta.addFrame(k2, frame);
        evalCfg(g.env, l->bound->label, k2);
        return;
    }
    if (t->as<Term::Error>()) return;  // no abstract successors

    if (auto* v = t->as<Term::Var>()) {
        auto a = lookup(g.env, v->name);
        if (!a) return;  // unbound: concretely an error
        for (const AbsVal& val : snapshot.valsAt(*a)) delta.addVal(t->label, val);
        contCfg(*a, g.kont);
        return;
    }
    if (auto* l = t->as<Term::TLit>()) {
        delta.addVal(t->label, AbsVal::mkBase(litBase(l->value)));
        contCfg(t->label, g.kont);
        return;
    }
    if (t->as<Term::Fun>()) {
        AbsEnv env;
        for (const auto& x : funFvs_.at(t->label)) {
            if (auto a = lookup(g.env, x)) env[x] = *a;
        }
        delta.addVal(t->label, AbsVal::mkClosure(t->label, std::move(env)));
        contCfg(t->label, g.kont);
        return;
    }
    if (auto* r = t->as<Term::Record>()) {
        std::vector<Addr> fields;
        for (const auto& x : r->fields) {
            auto a = lookup(g.env, x->varName());
            if (!a) return;
            fields.push_back(*a);
        }
        delta.addVal(t->label, AbsVal::mkRecord(r->label, std::move(fields)));
        contCfg(t->label, g.kont);
        return;
    }
    if (auto* m = t->as<Term::Match>()) {
        auto a = lookup(g.env, m->scrutinee->varName());
        if (!a) return;
        for (const AbsVal& v : snapshot.valsAt(*a)) {
            for (const auto& [p, body] : m->branches)
                for (auto& env : matchAbs(snapshot, *a, v, p, g.env))
                    evalCfg(std::move(env), body->label, g.kont);
        }
        return;
    }

    const auto* app = t->as<Term::App>();
    auto fa = lookup(g.env, app->fn->varName());
    if (!fa) return;
    // copy_v on the operator occurrence: this is where callee sets are read
    // off after the fixed point.
    for (const AbsVal& val : snapshot.valsAt(*fa)) delta.addVal(app->fn->label, val);
    std::vector<Addr> argAddrs;
    for (const auto& x : app->args) {
        auto a = lookup(g.env, x->varName());
        if (!a) return;
        argAddrs.push_back(*a);
    }
    for (const AbsVal& fn : snapshot.valsAt(*fa)) {
        if (fn.kind == AbsVal::Kind::Closure) {
            const TermPtr& funTerm = termAt(fn.funLabel);
            const auto* f = funTerm->as<Term::Fun>();
            if (f->params.size() != argAddrs.size()) continue;
            AbsEnv env = fn.env;
            for (size_t i = 0; i < argAddrs.size(); i++) env[f->params[i]] = argAddrs[i];
            evalCfg(std::move(env), f->body->label, g.kont);
        } else if (fn.kind == AbsVal::Kind::TopFun) {
            const FunDef* def = fnTable_.at(fn.name);
            if (def->params.size() != argAddrs.size()) continue;
            AbsEnv env;
            for (size_t i = 0; i < argAddrs.size(); i++)
                env[def->params[i].first] = argAddrs[i];
            evalCfg(std::move(env), def->body->label, g.kont);
        } else if (fn.kind == AbsVal::Kind::Prim) {
            const std::string& op = fn.name;
            size_t arity = op == "not" ? 1 : 2;
            if (argAddrs.size() != arity) continue;
            BaseTp result =
                (op == "+" || op == "-" || op == "*") ? BaseTp::Integer : BaseTp::Boolean;
            delta.addVal(t->label, AbsVal::mkBase(result));
            contCfg(t->label, g.kont);
        }
    }
}

AbstractConfig AbstractMachine::abstractStep(const AbstractConfig& c) const {
    AbstractConfig next = c;
    for (const PartialConfig& g : c.configs) {
        stepConfig(g, c.store, next.store, next.configs);
        stepCount_++;
    }
    return next;
}

Analysis AbstractMachine::analyze() const {
    warnings_.clear();
    stepCount_ = 0;
    AbstractConfig cfg = initConfig();
    long sweeps = 0;
    while (true) {
        AbstractConfig next = abstractStep(cfg);
        sweeps++;
        if (next == cfg) break;
        cfg = std::move(next);
        if (stepCount_ > 10'000'000)
            throw AnalysisError("analysis exceeded the transition budget");
    }

    Analysis analysis;
    analysis.rawStore = cfg.store;
    analysis.stats.sweeps = sweeps;
    analysis.stats.transitions = stepCount_;
    analysis.stats.labelCount = program_.labelCount();
    for (const auto& [a, vs] : cfg.store.vals)
        analysis.stats.maxValsPerAddr =
            std::max(analysis.stats.maxValsPerAddr, static_cast<int>(vs.size()));
    for (const auto& [a, ks] : cfg.store.konts)
        analysis.stats.maxFramesPerAddr =
            std::max(analysis.stats.maxFramesPerAddr, static_cast<int>(ks.size()));

    // Read callee sets off the final store at every operator occurrence.
    for (const auto& [label, term] : byLabel_) {
        const auto* app = term->as<Term::App>();
        if (!app) continue;
        std::set<FunId>& ids = analysis.callees[app->fn->label];
        for (const AbsVal& v : cfg.store.valsAt(app->fn->label)) {
            if (v.kind == AbsVal::Kind::Prim) ids.insert(FunId::prim(v.name));
            else if (v.kind == AbsVal::Kind::TopFun) ids.insert(FunId::top(v.name));
            else if (v.kind == AbsVal::Kind::Closure) ids.insert(FunId::closure(v.funLabel));
        }
    }
    analysis.warnings = warnings_;
    return analysis;
}

Analysis analyze(const Program& program) { return AbstractMachine(program).analyze(); }

std::string dumpAnalysis(const Analysis& analysis, const Program& program) {
    std::map<Label, TermPtr> byLabel;
    for (const auto& f : program.functions) indexTerm(f.body, byLabel);
    auto posOf = [&](Label l) -> std::string {
        auto it = byLabel.find(l);
        return it != byLabel.end() && it->second->pos.known() ? it->second->pos.str()
                                                              : std::string("?");
    };
    std::ostringstream out;
    for (const auto& [site, ids] : analysis.callees) {
        out << "((site " << site << " " << posOf(site) << ") (callees";
        for (const auto& id : ids) {
            if (id.kind == FunId::Kind::Closure)
                out << " (fun l" << id.funLabel << " " << posOf(id.funLabel) << ")";
            else
                out << " " << id.str();
        }
        out << "))\n";
    }
    return out.str();
}

}  // namespace semtrans::cfa
