#include "semtrans/interp.hpp"

#include <stdexcept>

#include "semtrans/anf.hpp"

namespace semtrans::interp {

using namespace syntax;

Env Env::extend(const std::string& name, ValuePtr v) const {
    Env out;
    out.head_ = std::make_shared<Node>(Node{name, std::move(v), head_});
    return out;
}

const ValuePtr* Env::lookup(const std::string& name) const {
    for (const Node* n = head_.get(); n; n = n->next.get())
        if (n->name == name) return &n->value;
    return nullptr;
}

ValuePtr mkLitV(syntax::Lit v) {
    return std::make_shared<Value>(Value{Value::Lit{std::move(v)}});
}
ValuePtr mkPrimV(std::string op) {
    return std::make_shared<Value>(Value{Value::Prim{std::move(op)}});
}
ValuePtr mkRecordV(std::string label, std::vector<ValuePtr> fields) {
    return std::make_shared<Value>(Value{Value::Record{std::move(label), std::move(fields)}});
}
ValuePtr mkTopFunV(std::string name) {
    return std::make_shared<Value>(Value{Value::TopFun{std::move(name)}});
}

std::string RuntimeError::str() const {
    switch (kind) {
        case Kind::UnboundVariable: return "unbound variable: " + message;
        case Kind::MatchFailure: return "no matching branch: " + message;
        case Kind::NotAFunction: return "not a function: " + message;
        case Kind::ArityMismatch: return "arity mismatch: " + message;
        case Kind::PrimopTypeError: return "primitive operation type error: " + message;
        case Kind::UserError: return "(error " + quoteString(message) + ")";
        case Kind::OutOfFuel: return "out of fuel after " + message + " steps";
    }
    return message;
}

namespace {

std::string litText(const syntax::Lit& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* b = std::get_if<bool>(&v)) return *b ? "#t" : "#f";
    return quoteString(std::get<std::string>(v));
}

RuntimeError err(RuntimeError::Kind k, std::string msg) {
    return RuntimeError{k, std::move(msg)};
}

}  // namespace

std::optional<Env> matchPattern(const ValuePtr& v, const PatternPtr& pat, Env env) {
    if (auto* pv = std::get_if<Pattern::Var>(&pat->node)) return env.extend(pv->name, v);
    if (std::get_if<Pattern::Wild>(&pat->node)) return env;
    if (auto* pl = std::get_if<Pattern::PLit>(&pat->node)) {
        if (const auto* lit = v->as<Value::Lit>())
            if (lit->v == pl->value) return env;
        return std::nullopt;
    }
    if (auto* pt = std::get_if<Pattern::Type>(&pat->node)) {
        const auto* lit = v->as<Value::Lit>();
        if (!lit) return std::nullopt;
        bool ok = (pt->tp == BaseTp::Integer && std::holds_alternative<std::int64_t>(lit->v)) ||
                  (pt->tp == BaseTp::Boolean && std::holds_alternative<bool>(lit->v)) ||
                  (pt->tp == BaseTp::String && std::holds_alternative<std::string>(lit->v));
        if (!ok) return std::nullopt;
        return env.extend(pt->name, v);
    }
    const auto& pr = std::get<Pattern::Record>(pat->node);
    const auto* rv = v->as<Value::Record>();
    if (!rv || rv->label != pr.label || rv->fields.size() != pr.fields.size())
        return std::nullopt;
    for (size_t i = 0; i < pr.fields.size(); i++) {
        auto next = matchPattern(rv->fields[i], pr.fields[i], env);
        if (!next) return std::nullopt;
        env = *next;
    }
    return env;
}

std::optional<std::pair<Env, TermPtr>> matchValue(
    const ValuePtr& v, const std::vector<std::pair<PatternPtr, TermPtr>>& branches,
    const Env& env) {
    for (const auto& [p, body] : branches) {
        if (auto e2 = matchPattern(v, p, env)) return std::make_pair(*e2, body);
    }
    return std::nullopt;
}

std::variant<ValuePtr, RuntimeError> delta(const std::string& op,
                                           const std::vector<ValuePtr>& args) {
    auto intArg = [&](size_t i) -> std::optional<std::int64_t> {
        if (const auto* l = args[i]->as<Value::Lit>())
            if (const auto* n = std::get_if<std::int64_t>(&l->v)) return *n;
        return std::nullopt;
    };
    auto wantArity = [&](size_t n) -> std::optional<RuntimeError> {
        if (args.size() != n)
            return err(RuntimeError::Kind::ArityMismatch,
                       op + " expects " + std::to_string(n) + " arguments, got " +
                           std::to_string(args.size()));
        return std::nullopt;
    };

    if (op == "+" || op == "-" || op == "*" || op == "<" || op == "<=") {
        if (auto e = wantArity(2)) return *e;
        auto a = intArg(0);
        auto b = intArg(1);
        if (!a || !b)
            return err(RuntimeError::Kind::PrimopTypeError, op + " expects integers");
        if (op == "+") return mkLitV(Lit{*a + *b});
        if (op == "-") return mkLitV(Lit{*a - *b});
        if (op == "*") return mkLitV(Lit{*a * *b});
        if (op == "<") return mkLitV(Lit{*a < *b});
        return mkLitV(Lit{*a <= *b});
    }
    if (op == "eq?") {
        if (auto e = wantArity(2)) return *e;
        const auto* la = args[0]->as<Value::Lit>();
        const auto* lb = args[1]->as<Value::Lit>();
        bool equal = la && lb && la->v == lb->v;
        return mkLitV(Lit{equal});
    }
    if (op == "not") {
        if (auto e = wantArity(1)) return *e;
        if (const auto* l = args[0]->as<Value::Lit>())
            if (const auto* b = std::get_if<bool>(&l->v)) return mkLitV(Lit{!*b});
        return err(RuntimeError::Kind::PrimopTypeError, "not expects a boolean");
    }
    return err(RuntimeError::Kind::NotAFunction, "unknown primitive " + op);
}

Machine::Machine(const Program& program, RunOptions opts)
    : program_(program), opts_(std::move(opts)) {
    for (const auto& f : program_.functions) fnTable_[f.name] = &f;
}

ValuePtr Machine::lookupVar(const Env& env, const std::string& name, SrcPos pos) const {
    if (const ValuePtr* v = env.lookup(name)) return *v;
    if (fnTable_.count(name)) return mkTopFunV(name);
    if (isPrimOp(name)) return mkPrimV(name);
    return nullptr;
}

StepResult Machine::applyFn(const ValuePtr& fn, const std::vector<ValuePtr>& args,
                            std::vector<Frame> stack) const {
    StepResult r;
    if (const auto* cl = fn->as<Value::Closure>()) {
        if (cl->params.size() != args.size()) {
            r.kind = StepResult::Kind::Error;
            r.error = err(RuntimeError::Kind::ArityMismatch,
                          "closure expects " + std::to_string(cl->params.size()) +
                              " arguments, got " + std::to_string(args.size()));
            return r;
        }
        Env env = cl->env;
        for (size_t i = 0; i < args.size(); i++) env = env.extend(cl->params[i], args[i]);
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Eval, env, cl->body, nullptr,
                               std::move(stack)};
        return r;
    }
    if (const auto* tf = fn->as<Value::TopFun>()) {
        const FunDef* def = fnTable_.at(tf->name);
        if (def->params.size() != args.size()) {
            r.kind = StepResult::Kind::Error;
            r.error = err(RuntimeError::Kind::ArityMismatch,
                          tf->name + " expects " + std::to_string(def->params.size()) +
                              " arguments, got " + std::to_string(args.size()));
            return r;
        }
        Env env;
        for (size_t i = 0; i < args.size(); i++) env = env.extend(def->params[i].first, args[i]);
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Eval, env, def->body, nullptr,
                               std::move(stack)};
        return r;
    }
    if (const auto* pr = fn->as<Value::Prim>()) {
        auto dr = delta(pr->op, args);
        if (auto* e = std::get_if<RuntimeError>(&dr)) {
            r.kind = StepResult::Kind::Error;
            r.error = *e;
            return r;
        }
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Continue, {}, nullptr,
                               std::get<ValuePtr>(dr), std::move(stack)};
        return r;
    }
    r.kind = StepResult::Kind::Error;
    r.error = err(RuntimeError::Kind::NotAFunction, printValue(fn));
    return r;
}

StepResult Machine::evalStep(MachineConfig&& c) const {
    StepResult r;
    const TermPtr& t = c.expr;
    auto fail = [&](RuntimeError e) {
        r.kind = StepResult::Kind::Error;
        r.error = std::move(e);
        return r;
    };
    auto continueWith = [&](ValuePtr v) {
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Continue, {}, nullptr, std::move(v),
                               std::move(c.stack)};
        return r;
    };

    if (auto* v = t->as<Term::Var>()) {
        ValuePtr val = lookupVar(c.env, v->name, t->pos);
        if (!val) return fail(err(RuntimeError::Kind::UnboundVariable, v->name));
        return continueWith(std::move(val));
    }
    if (auto* l = t->as<Term::TLit>()) return continueWith(mkLitV(l->value));
    if (auto* f = t->as<Term::Fun>()) {
        return continueWith(std::make_shared<Value>(
            Value{Value::Closure{c.env, f->params, f->body, t->label}}));
    }
    if (auto* rec = t->as<Term::Record>()) {
        std::vector<ValuePtr> fields;
        for (const auto& x : rec->fields) {
            ValuePtr val = lookupVar(c.env, x->varName(), x->pos);
            if (!val) return fail(err(RuntimeError::Kind::UnboundVariable, x->varName()));
            fields.push_back(std::move(val));
        }
        return continueWith(mkRecordV(rec->label, std::move(fields)));
    }
    if (auto* l = t->as<Term::Let>()) {
        c.stack.push_back(Frame{c.env, l->pat, l->body});
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Eval, std::move(c.env), l->bound, nullptr,
                               std::move(c.stack)};
        return r;
    }
    if (auto* a = t->as<Term::App>()) {
        ValuePtr fn = lookupVar(c.env, a->fn->varName(), a->fn->pos);
        if (!fn) return fail(err(RuntimeError::Kind::UnboundVariable, a->fn->varName()));
        std::vector<ValuePtr> args;
        for (const auto& x : a->args) {
            ValuePtr val = lookupVar(c.env, x->varName(), x->pos);
            if (!val) return fail(err(RuntimeError::Kind::UnboundVariable, x->varName()));
            args.push_back(std::move(val));
        }
        if (opts_.onApply) {
            AppliedFn id;
            if (const auto* pr = fn->as<Value::Prim>())
                id = AppliedFn{AppliedFn::Kind::Prim, pr->op, -1};
            else if (const auto* tf = fn->as<Value::TopFun>())
                id = AppliedFn{AppliedFn::Kind::Top, tf->name, -1};
            else if (const auto* cl = fn->as<Value::Closure>())
                id = AppliedFn{AppliedFn::Kind::Closure, "", cl->funLabel};
            else
                id = AppliedFn{AppliedFn::Kind::Top, printValue(fn), -1};
            opts_.onApply(a->fn->label, id);
        }
        return applyFn(fn, args, std::move(c.stack));
    }
    if (auto* m = t->as<Term::Match>()) {
        ValuePtr v = lookupVar(c.env, m->scrutinee->varName(), m->scrutinee->pos);
        if (!v)
            return fail(err(RuntimeError::Kind::UnboundVariable, m->scrutinee->varName()));
        auto sel = matchValue(v, m->branches, c.env);
        if (!sel) return fail(err(RuntimeError::Kind::MatchFailure, printValue(v)));
        r.kind = StepResult::Kind::Next;
        r.next = MachineConfig{MachineConfig::Mode::Eval, sel->first, sel->second, nullptr,
                               std::move(c.stack)};
        return r;
    }
    return fail(err(RuntimeError::Kind::UserError, t->as<Term::Error>()->message));
}

StepResult Machine::continueStep(MachineConfig&& c) const {
    StepResult r;
    if (c.stack.empty()) {
        r.kind = StepResult::Kind::Final;
        r.final = std::move(c.value);
        return r;
    }
    Frame frame = std::move(c.stack.back());
    c.stack.pop_back();
    auto env = matchPattern(c.value, frame.pat, frame.env);
    if (!env) {
        r.kind = StepResult::Kind::Error;
        r.error = err(RuntimeError::Kind::MatchFailure,
                      "let pattern vs " + printValue(c.value));
        return r;
    }
    r.kind = StepResult::Kind::Next;
    r.next = MachineConfig{MachineConfig::Mode::Eval, *env, frame.body, nullptr,
                           std::move(c.stack)};
    return r;
}

StepResult Machine::step(MachineConfig config) const {
    if (config.mode == MachineConfig::Mode::Eval) return evalStep(std::move(config));
    return continueStep(std::move(config));
}

RunResult Machine::run(const std::vector<ValuePtr>& args) const {
    const FunDef& mainFn = program_.main();
    if (mainFn.params.size() != args.size())
        throw std::invalid_argument("main expects " + std::to_string(mainFn.params.size()) +
                                    " arguments, got " + std::to_string(args.size()));
    Env env;
    for (size_t i = 0; i < args.size(); i++) env = env.extend(mainFn.params[i].first, args[i]);

    RunResult result;
    MachineConfig c{MachineConfig::Mode::Eval, env, mainFn.body, nullptr, {}};
    while (true) {
        if (opts_.fuel && result.steps >= *opts_.fuel) {
            result.error = err(RuntimeError::Kind::OutOfFuel, std::to_string(result.steps));
            return result;
        }
        StepResult r = step(std::move(c));
        result.steps++;
        switch (r.kind) {
            case StepResult::Kind::Next: c = std::move(r.next); break;
            case StepResult::Kind::Final: result.value = std::move(r.final); return result;
            case StepResult::Kind::Error: result.error = std::move(r.error); return result;
        }
    }
}

RunResult run(const Program& program, const std::vector<ValuePtr>& args, RunOptions opts) {
    if (!anf::isAnf(program))
        throw std::invalid_argument("interp.run requires a program in A-normal form");
    return Machine(program, std::move(opts)).run(args);
}

std::string printValue(const ValuePtr& v) {
    if (const auto* l = v->as<Value::Lit>()) return litText(l->v);
    if (const auto* p = v->as<Value::Prim>()) return "#<prim:" + p->op + ">";
    if (const auto* r = v->as<Value::Record>()) {
        std::string s = "{" + r->label;
        for (const auto& f : r->fields) s += " " + printValue(f);
        return s + "}";
    }
    if (const auto* c = v->as<Value::Closure>())
        return "#<closure:" + std::to_string(c->funLabel) + ">";
    return "#<def:" + v->as<Value::TopFun>()->name + ">";
}

ValuePtr parseValue(const SExpr& e) {
    switch (e.kind) {
        case SExpr::Kind::Int: return mkLitV(Lit{e.intVal});
        case SExpr::Kind::Bool: return mkLitV(Lit{e.boolVal});
        case SExpr::Kind::Str: return mkLitV(Lit{e.text});
        case SExpr::Kind::List: {
            if (e.open != '{')
                throw SyntaxError("value must be a literal or {Label v...} record", e.pos);
            if (e.items.empty() || e.items[0].kind != SExpr::Kind::Symbol)
                throw SyntaxError("record value needs a label", e.pos);
            std::vector<ValuePtr> fields;
            for (size_t i = 1; i < e.items.size(); i++) fields.push_back(parseValue(e.items[i]));
            return mkRecordV(e.items[0].text, std::move(fields));
        }
        default:
            throw SyntaxError("cannot read a value from " + e.describe(), e.pos);
    }
}

ValuePtr parseValue(const std::string& text) { return parseValue(readOneSExpr(text)); }

bool inhabitsType(const ValuePtr& v, const TypeRef& tr, const Program& program) {
    switch (tr.kind) {
        case TypeRef::Kind::Any: return true;
        case TypeRef::Kind::Base: {
            const auto* l = v->as<Value::Lit>();
            if (!l) return false;
            switch (tr.base) {
                case BaseTp::Integer: return std::holds_alternative<std::int64_t>(l->v);
                case BaseTp::Boolean: return std::holds_alternative<bool>(l->v);
                case BaseTp::String: return std::holds_alternative<std::string>(l->v);
            }
            return false;
        }
        case TypeRef::Kind::Named: break;
    }
    for (const auto& d : program.datatypes) {
        if (d.name != tr.name) continue;
        for (const auto& var : d.variants) {
            if (var.ref && inhabitsType(v, *var.ref, program)) return true;
            if (var.sig) {
                const auto* r = v->as<Value::Record>();
                if (!r || r->label != var.sig->first ||
                    r->fields.size() != var.sig->second.size())
                    continue;
                bool all = true;
                for (size_t i = 0; i < r->fields.size(); i++)
                    if (!inhabitsType(r->fields[i], var.sig->second[i], program)) all = false;
                if (all) return true;
            }
        }
        return false;
    }
    for (const auto& s : program.structures) {
        if (s.label != tr.name) continue;
        const auto* r = v->as<Value::Record>();
        return r && r->label == s.label && r->fields.size() == s.fieldNames.size();
    }
    return false;
}

bool valueEq(const ValuePtr& a, const ValuePtr& b) {
    if (a->node.index() != b->node.index()) return false;
    if (const auto* l = a->as<Value::Lit>()) return l->v == b->as<Value::Lit>()->v;
    if (const auto* p = a->as<Value::Prim>()) return p->op == b->as<Value::Prim>()->op;
    if (const auto* r = a->as<Value::Record>()) {
        const auto* s = b->as<Value::Record>();
        if (r->label != s->label || r->fields.size() != s->fields.size()) return false;
        for (size_t i = 0; i < r->fields.size(); i++)
            if (!valueEq(r->fields[i], s->fields[i])) return false;
        return true;
    }
    if (const auto* c = a->as<Value::Closure>())
        return c->funLabel == b->as<Value::Closure>()->funLabel;
    return a->as<Value::TopFun>()->name == b->as<Value::TopFun>()->name;
}

}  // namespace semtrans::interp
