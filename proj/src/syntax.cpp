#include "semtrans/syntax.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace semtrans::syntax {

namespace {
constexpr int kMaxWidth = 96;
}

std::string baseTpName(BaseTp tp) {
    switch (tp) {
        case BaseTp::String: return "String";
        case BaseTp::Integer: return "Integer";
        case BaseTp::Boolean: return "Boolean";
    }
    return "?";
}

std::optional<BaseTp> baseTpOf(const std::string& name) {
    if (name == "String") return BaseTp::String;
    if (name == "Integer") return BaseTp::Integer;
    if (name == "Boolean") return BaseTp::Boolean;
    return std::nullopt;
}

const std::vector<std::string>& primOps() {
    static const std::vector<std::string> ops = {"+", "-", "*", "<", "<=", "eq?", "not"};
    return ops;
}

bool isPrimOp(const std::string& name) {
    const auto& ops = primOps();
    return std::find(ops.begin(), ops.end(), name) != ops.end();
}

std::string TypeRef::str() const {
    switch (kind) {
        case Kind::Base: return baseTpName(base);
        case Kind::Any: return "Any";
        case Kind::Named: return name;
    }
    return "?";
}

PatternPtr mkPVar(std::string name, SrcPos pos) {
    return std::make_shared<Pattern>(Pattern{Pattern::Var{std::move(name)}, pos});
}
PatternPtr mkPLit(Lit v, SrcPos pos) {
    return std::make_shared<Pattern>(Pattern{Pattern::PLit{std::move(v)}, pos});
}
PatternPtr mkPWild(SrcPos pos) {
    return std::make_shared<Pattern>(Pattern{Pattern::Wild{}, pos});
}
PatternPtr mkPRecord(std::string label, std::vector<PatternPtr> fields, SrcPos pos) {
    return std::make_shared<Pattern>(Pattern{Pattern::Record{std::move(label), std::move(fields)}, pos});
}
PatternPtr mkPType(BaseTp tp, std::string name, SrcPos pos) {
    return std::make_shared<Pattern>(Pattern{Pattern::Type{tp, std::move(name)}, pos});
}

namespace {
TermPtr mk(Term::Node node, SrcPos pos) {
    auto t = std::make_shared<Term>();
    const_cast<Term&>(*t).node = std::move(node);
    const_cast<Term&>(*t).pos = pos;
    return t;
}
}  // namespace

TermPtr mkVar(std::string name, SrcPos pos) { return mk(Term::Var{std::move(name)}, pos); }
TermPtr mkLit(Lit v, SrcPos pos) { return mk(Term::TLit{std::move(v)}, pos); }
TermPtr mkFun(std::vector<std::string> params, TermPtr body, Annotations anns, SrcPos pos) {
    return mk(Term::Fun{std::move(params), std::move(body), std::move(anns)}, pos);
}
TermPtr mkApp(TermPtr fn, std::vector<TermPtr> args, SrcPos pos) {
    return mk(Term::App{std::move(fn), std::move(args)}, pos);
}
TermPtr mkRecord(std::string label, std::vector<TermPtr> fields, SrcPos pos) {
    return mk(Term::Record{std::move(label), std::move(fields)}, pos);
}
TermPtr mkLet(PatternPtr pat, TermPtr bound, TermPtr body, SrcPos pos) {
    return mk(Term::Let{std::move(pat), std::move(bound), std::move(body)}, pos);
}
TermPtr mkMatch(TermPtr scrutinee, std::vector<std::pair<PatternPtr, TermPtr>> branches, SrcPos pos) {
    return mk(Term::Match{std::move(scrutinee), std::move(branches)}, pos);
}
TermPtr mkError(std::string message, SrcPos pos) {
    return mk(Term::Error{std::move(message)}, pos);
}

std::vector<std::string> FunDef::paramNames() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : params) out.push_back(n);
    return out;
}

const FunDef* Program::findFunction(const std::string& name) const {
    for (const auto& f : functions)
        if (f.name == name) return &f;
    return nullptr;
}

const FunDef& Program::main() const {
    const FunDef* f = findFunction("main");
    if (!f) throw MissingMainError("program has no `main` function");
    return *f;
}

std::map<std::string, int> Program::declaredLabels() const {
    std::map<std::string, int> out;
    for (const auto& s : structures) out[s.label] = static_cast<int>(s.fieldNames.size());
    for (const auto& d : datatypes)
        for (const auto& v : d.variants)
            if (v.sig) out[v.sig->first] = static_cast<int>(v.sig->second.size());
    return out;
}

int Program::labelCount() const {
    std::vector<Label> ls;
    for (const auto& f : functions) collectLabels(f.body, ls);
    return static_cast<int>(ls.size());
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

bool validIdentifier(const std::string& s) {
    if (s.empty()) return false;
    char c = s[0];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '#' || c == '"') return false;
    return true;
}

std::string symbolOf(const SExpr& e, const char* what) {
    if (e.kind != SExpr::Kind::Symbol || !validIdentifier(e.text))
        throw SyntaxError(std::string("expected ") + what + ", got " + e.describe(), e.pos);
    return e.text;
}

std::optional<Lit> litOf(const SExpr& e) {
    switch (e.kind) {
        case SExpr::Kind::Int: return Lit{e.intVal};
        case SExpr::Kind::Bool: return Lit{e.boolVal};
        case SExpr::Kind::Str: return Lit{e.text};
        default: return std::nullopt;
    }
}

PatternPtr parsePattern(const SExpr& e) {
    if (auto l = litOf(e)) return mkPLit(*l, e.pos);
    if (e.kind == SExpr::Kind::Symbol) {
        if (e.text == "_") return mkPWild(e.pos);
        return mkPVar(symbolOf(e, "pattern variable"), e.pos);
    }
    if (e.isList('{')) {
        if (e.items.empty()) throw SyntaxError("record pattern needs a label", e.pos);
        std::string label = symbolOf(e.items[0], "record label");
        std::vector<PatternPtr> fields;
        for (size_t i = 1; i < e.items.size(); i++) fields.push_back(parsePattern(e.items[i]));
        return mkPRecord(label, std::move(fields), e.pos);
    }
    if (e.isList('[')) {
        if (e.items.size() != 2)
            throw SyntaxError("type pattern must be [Type x]", e.pos);
        std::string tp = symbolOf(e.items[0], "base type");
        auto base = baseTpOf(tp);
        if (!base)
            throw SyntaxError("type patterns accept String/Integer/Boolean, got `" + tp + "`",
                              e.items[0].pos);
        return mkPType(*base, symbolOf(e.items[1], "pattern variable"), e.pos);
    }
    throw SyntaxError("cannot parse pattern from " + e.describe(), e.pos);
}

Annotations parseAnnotations(const std::vector<SExpr>& items, size_t& i) {
    Annotations anns;
    while (i < items.size() && items[i].kind == SExpr::Kind::Keyword) {
        const SExpr& kw = items[i];
        if (kw.text == "atomic") {
            anns.atomic = true;
            i++;
        } else if (kw.text == "no-defun") {
            anns.noDefun = true;
            i++;
        } else if (kw.text == "name") {
            if (i + 1 >= items.size())
                throw SyntaxError("#:name needs an identifier", kw.pos);
            if (anns.structName)
                throw SyntaxError("duplicate #:name annotation", kw.pos);
            anns.structName = symbolOf(items[i + 1], "#:name identifier");
            i += 2;
        } else {
            throw SyntaxError("unknown annotation #:" + kw.text, kw.pos);
        }
    }
    return anns;
}

TermPtr parseTerm(const SExpr& e);

std::vector<std::string> parsePlainParams(const SExpr& e) {
    if (!e.isList('('))
        throw SyntaxError("expected a parameter list, got " + e.describe(), e.pos);
    std::vector<std::string> params;
    for (const auto& p : e.items) params.push_back(symbolOf(p, "parameter name"));
    return params;
}

TermPtr parseTerm(const SExpr& e) {
    if (auto l = litOf(e)) return mkLit(*l, e.pos);
    if (e.kind == SExpr::Kind::Symbol) return mkVar(symbolOf(e, "variable"), e.pos);
    if (e.isList('{')) {
        if (e.items.empty()) throw SyntaxError("record term needs a label", e.pos);
        std::string label = symbolOf(e.items[0], "record label");
        std::vector<TermPtr> fields;
        for (size_t i = 1; i < e.items.size(); i++) fields.push_back(parseTerm(e.items[i]));
        return mkRecord(label, std::move(fields), e.pos);
    }
    if (!e.isList('('))
        throw SyntaxError("cannot parse term from " + e.describe(), e.pos);
    if (e.items.empty()) throw SyntaxError("empty application", e.pos);

    const SExpr& head = e.items[0];
    if (head.kind == SExpr::Kind::Symbol) {
        const std::string& h = head.text;
        if (h == "fun") {
            size_t i = 1;
            Annotations anns = parseAnnotations(e.items, i);
            if (i + 2 != e.items.size())
                throw SyntaxError("fun expects (fun annotations? (params...) body)", e.pos);
            auto params = parsePlainParams(e.items[i]);
            return mkFun(std::move(params), parseTerm(e.items[i + 1]), anns, e.pos);
        }
        if (h == "let") {
            if (e.items.size() != 4)
                throw SyntaxError("let expects (let pattern bound body)", e.pos);
            return mkLet(parsePattern(e.items[1]), parseTerm(e.items[2]), parseTerm(e.items[3]),
                         e.pos);
        }
        if (h == "match") {
            if (e.items.size() < 3)
                throw SyntaxError("match needs a scrutinee and at least one branch", e.pos);
            TermPtr scrut = parseTerm(e.items[1]);
            std::vector<std::pair<PatternPtr, TermPtr>> branches;
            for (size_t i = 2; i < e.items.size(); i++) {
                const SExpr& br = e.items[i];
                if (!br.isList('(') || br.items.size() != 2)
                    throw SyntaxError("match branch must be (pattern body)", br.pos);
                branches.emplace_back(parsePattern(br.items[0]), parseTerm(br.items[1]));
            }
            return mkMatch(std::move(scrut), std::move(branches), e.pos);
        }
        if (h == "error") {
            if (e.items.size() != 2 || e.items[1].kind != SExpr::Kind::Str)
                throw SyntaxError("error expects a string literal", e.pos);
            return mkError(e.items[1].text, e.pos);
        }
        if (h == "if") {
            // Sugar for a boolean match.
            if (e.items.size() != 4)
                throw SyntaxError("if expects (if cond then else)", e.pos);
            std::vector<std::pair<PatternPtr, TermPtr>> branches;
            branches.emplace_back(mkPLit(Lit{true}, e.pos), parseTerm(e.items[2]));
            branches.emplace_back(mkPLit(Lit{false}, e.pos), parseTerm(e.items[3]));
            return mkMatch(parseTerm(e.items[1]), std::move(branches), e.pos);
        }
    }
    TermPtr fn = parseTerm(head);
    std::vector<TermPtr> args;
    for (size_t i = 1; i < e.items.size(); i++) args.push_back(parseTerm(e.items[i]));
    return mkApp(std::move(fn), std::move(args), e.pos);
}

TypeRef parseTypeRef(const SExpr& e) {
    std::string name = symbolOf(e, "type name");
    if (auto b = baseTpOf(name)) return TypeRef::mkBase(*b);
    if (name == "Any") return TypeRef::mkAny();
    return TypeRef::mkNamed(name);
}

DataDef parseDataDef(const SExpr& e) {
    if (e.items.size() < 2) throw SyntaxError("def-data needs a name", e.pos);
    DataDef d;
    d.pos = e.pos;
    d.name = symbolOf(e.items[1], "datatype name");
    for (size_t i = 2; i < e.items.size(); i++) {
        const SExpr& v = e.items[i];
        DataVariant var;
        if (v.isList('{')) {
            if (v.items.empty()) throw SyntaxError("record signature needs a label", v.pos);
            std::string label = symbolOf(v.items[0], "record label");
            std::vector<TypeRef> fields;
            for (size_t k = 1; k < v.items.size(); k++) fields.push_back(parseTypeRef(v.items[k]));
            var.sig = {label, std::move(fields)};
        } else {
            var.ref = parseTypeRef(v);
        }
        d.variants.push_back(std::move(var));
    }
    return d;
}

StructDef parseStructDef(const SExpr& e) {
    if (e.items.size() != 2 || !e.items[1].isList('{'))
        throw SyntaxError("def-struct expects (def-struct {Label field...})", e.pos);
    const SExpr& sig = e.items[1];
    if (sig.items.empty()) throw SyntaxError("struct needs a label", sig.pos);
    StructDef s;
    s.pos = e.pos;
    s.label = symbolOf(sig.items[0], "struct label");
    for (size_t i = 1; i < sig.items.size(); i++)
        s.fieldNames.push_back(symbolOf(sig.items[i], "field name"));
    std::set<std::string> seen(s.fieldNames.begin(), s.fieldNames.end());
    if (seen.size() != s.fieldNames.size())
        throw SyntaxError("struct field names must be distinct", sig.pos);
    return s;
}

FunDef parseFunDef(const SExpr& e) {
    if (e.items.size() < 2) throw SyntaxError("def needs a name", e.pos);
    FunDef f;
    f.pos = e.pos;
    f.name = symbolOf(e.items[1], "function name");
    size_t i = 2;
    f.anns = parseAnnotations(e.items, i);
    if (i + 2 != e.items.size())
        throw SyntaxError("def expects (def name annotations? (params...) body)", e.pos);
    const SExpr& ps = e.items[i];
    if (!ps.isList('('))
        throw SyntaxError("expected a parameter list, got " + ps.describe(), ps.pos);
    for (const auto& p : ps.items) {
        if (p.isList('[')) {
            if (p.items.size() != 2)
                throw SyntaxError("annotated parameter must be [Type x]", p.pos);
            TypeRef tr = parseTypeRef(p.items[0]);
            f.params.emplace_back(symbolOf(p.items[1], "parameter name"), tr);
        } else {
            f.params.emplace_back(symbolOf(p, "parameter name"), std::nullopt);
        }
    }
    f.body = parseTerm(e.items[i + 1]);
    return f;
}

// Walks terms and patterns checking record labels, arities and binder
// invariants.
struct Validator {
    const Program& program;
    std::map<std::string, int> labels;

    explicit Validator(const Program& p) : program(p), labels(p.declaredLabels()) {}

    void checkLabel(const std::string& label, size_t arity, SrcPos pos) {
        auto it = labels.find(label);
        if (it == labels.end())
            throw SyntaxError("record label `" + label + "` is not declared", pos);
        if (static_cast<size_t>(it->second) != arity)
            throw SyntaxError("record `" + label + "` expects " + std::to_string(it->second) +
                                  " fields, got " + std::to_string(arity),
                              pos);
    }

    void pattern(const PatternPtr& p, std::set<std::string>& bound) {
        if (auto* v = std::get_if<Pattern::Var>(&p->node)) {
            if (!bound.insert(v->name).second)
                throw SyntaxError("pattern binds `" + v->name + "` twice", p->pos);
        } else if (auto* r = std::get_if<Pattern::Record>(&p->node)) {
            checkLabel(r->label, r->fields.size(), p->pos);
            for (const auto& f : r->fields) pattern(f, bound);
        } else if (auto* t = std::get_if<Pattern::Type>(&p->node)) {
            if (!bound.insert(t->name).second)
                throw SyntaxError("pattern binds `" + t->name + "` twice", p->pos);
        }
    }

    void term(const TermPtr& t) {
        if (auto* f = t->as<Term::Fun>()) {
            std::set<std::string> seen(f->params.begin(), f->params.end());
            if (seen.size() != f->params.size())
                throw SyntaxError("fun parameter names must be distinct", t->pos);
            term(f->body);
        } else if (auto* a = t->as<Term::App>()) {
            term(a->fn);
            for (const auto& x : a->args) term(x);
        } else if (auto* r = t->as<Term::Record>()) {
            checkLabel(r->label, r->fields.size(), t->pos);
            for (const auto& x : r->fields) term(x);
        } else if (auto* l = t->as<Term::Let>()) {
            std::set<std::string> bound;
            pattern(l->pat, bound);
            term(l->bound);
            term(l->body);
        } else if (auto* m = t->as<Term::Match>()) {
            term(m->scrutinee);
            if (m->branches.empty())
                throw SyntaxError("match needs at least one branch", t->pos);
            for (const auto& [p, b] : m->branches) {
                std::set<std::string> bound;
                pattern(p, bound);
                term(b);
            }
        }
    }

    void typeRef(const TypeRef& tr, SrcPos pos) {
        if (tr.kind != TypeRef::Kind::Named) return;
        for (const auto& d : program.datatypes)
            if (d.name == tr.name) return;
        if (labels.count(tr.name)) return;
        throw SyntaxError("type `" + tr.name + "` is not declared", pos);
    }

    void run() {
        for (const auto& d : program.datatypes) {
            for (const auto& v : d.variants) {
                if (v.ref) typeRef(*v.ref, d.pos);
                if (v.sig)
                    for (const auto& tr : v.sig->second) typeRef(tr, d.pos);
            }
        }
        for (const auto& f : program.functions) {
            std::set<std::string> seen;
            for (const auto& [n, tr] : f.params) {
                if (!seen.insert(n).second)
                    throw SyntaxError("parameter `" + n + "` declared twice in `" + f.name + "`",
                                      f.pos);
                if (tr) typeRef(*tr, f.pos);
            }
            term(f.body);
        }
    }
};

}  // namespace

Program parseProgram(const std::string& text) {
    Program program;
    for (const SExpr& form : readSExprs(text)) {
        if (!form.isList('('))
            throw SyntaxError("expected a top-level form, got " + form.describe(), form.pos);
        if (form.items.empty())
            throw SyntaxError("empty top-level form", form.pos);
        const SExpr& head = form.items[0];
        if (head.kind != SExpr::Kind::Symbol)
            throw SyntaxError("unexpected top-level form", form.pos);
        const std::string& h = head.text;
        if (h == "require" || h == "provide" || h == "module+") continue;  // Racket embedding
        if (h == "def-data") {
            program.datatypes.push_back(parseDataDef(form));
        } else if (h == "def-struct") {
            program.structures.push_back(parseStructDef(form));
        } else if (h == "def") {
            program.functions.push_back(parseFunDef(form));
        } else {
            throw SyntaxError("unknown top-level form `" + h + "`", form.pos);
        }
    }

    // Top-level names must be pairwise distinct across functions, datatypes
    // and record labels.
    std::map<std::string, SrcPos> names;
    auto declare = [&](const std::string& n, SrcPos pos) {
        if (names.count(n))
            throw DuplicateNameError("duplicate top-level name `" + n + "`", pos);
        names[n] = pos;
    };
    for (const auto& f : program.functions) declare(f.name, f.pos);
    for (const auto& d : program.datatypes) declare(d.name, d.pos);
    for (const auto& s : program.structures) declare(s.label, s.pos);
    for (const auto& d : program.datatypes)
        for (const auto& v : d.variants)
            if (v.sig) declare(v.sig->first, d.pos);

    const FunDef* mainFn = program.findFunction("main");
    if (!mainFn) throw MissingMainError("program has no `main` function");
    for (const auto& [n, tr] : mainFn->params)
        if (!tr)
            throw UnannotatedMainError("main parameter `" + n + "` lacks a type annotation",
                                       mainFn->pos);

    Validator(program).run();
    return relabel(program);
}

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

namespace {

std::string litStr(const Lit& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* b = std::get_if<bool>(&v)) return *b ? "#t" : "#f";
    return quoteString(std::get<std::string>(v));
}

std::string annStr(const Annotations& anns) {
    std::string s;
    if (anns.atomic) s += " #:atomic";
    if (anns.noDefun) s += " #:no-defun";
    if (anns.structName) s += " #:name " + *anns.structName;
    return s;
}

std::string patStr(const PatternPtr& p) {
    if (auto* v = std::get_if<Pattern::Var>(&p->node)) return v->name;
    if (auto* l = std::get_if<Pattern::PLit>(&p->node)) return litStr(l->value);
    if (std::get_if<Pattern::Wild>(&p->node)) return "_";
    if (auto* t = std::get_if<Pattern::Type>(&p->node))
        return "[" + baseTpName(t->tp) + " " + t->name + "]";
    const auto& r = std::get<Pattern::Record>(p->node);
    std::string s = "{" + r.label;
    for (const auto& f : r.fields) s += " " + patStr(f);
    return s + "}";
}

std::string flat(const TermPtr& t) {
    if (auto* v = t->as<Term::Var>()) return v->name;
    if (auto* l = t->as<Term::TLit>()) return litStr(l->value);
    if (auto* f = t->as<Term::Fun>()) {
        std::string s = "(fun" + annStr(f->anns) + " (";
        for (size_t i = 0; i < f->params.size(); i++) s += (i ? " " : "") + f->params[i];
        return s + ") " + flat(f->body) + ")";
    }
    if (auto* a = t->as<Term::App>()) {
        std::string s = "(" + flat(a->fn);
        for (const auto& x : a->args) s += " " + flat(x);
        return s + ")";
    }
    if (auto* r = t->as<Term::Record>()) {
        std::string s = "{" + r->label;
        for (const auto& x : r->fields) s += " " + flat(x);
        return s + "}";
    }
    if (auto* l = t->as<Term::Let>())
        return "(let " + patStr(l->pat) + " " + flat(l->bound) + " " + flat(l->body) + ")";
    if (auto* m = t->as<Term::Match>()) {
        std::string s = "(match " + flat(m->scrutinee);
        for (const auto& [p, b] : m->branches) s += " (" + patStr(p) + " " + flat(b) + ")";
        return s + ")";
    }
    return "(error " + quoteString(t->as<Term::Error>()->message) + ")";
}

std::string indent(int n) { return std::string(2 * n, ' '); }

void render(const TermPtr& t, int ind, std::string& out);

// Renders `t` inline if it fits on the rest of the line, otherwise on a new
// line at `ind`.
void renderTail(const TermPtr& t, int col, int ind, std::string& out) {
    std::string s = flat(t);
    if (col + static_cast<int>(s.size()) <= kMaxWidth) {
        out += " " + s;
    } else {
        out += "\n" + indent(ind);
        render(t, ind, out);
    }
}

void render(const TermPtr& t, int ind, std::string& out) {
    std::string s = flat(t);
    if (2 * ind + static_cast<int>(s.size()) <= kMaxWidth) {
        out += s;
        return;
    }
    if (auto* l = t->as<Term::Let>()) {
        std::string head = "(let " + patStr(l->pat);
        out += head;
        renderTail(l->bound, 2 * ind + static_cast<int>(head.size()), ind + 2, out);
        out += "\n" + indent(ind + 1);
        render(l->body, ind + 1, out);
        out += ")";
        return;
    }
    if (auto* m = t->as<Term::Match>()) {
        out += "(match " + flat(m->scrutinee);
        for (const auto& [p, b] : m->branches) {
            std::string head = "(" + patStr(p);
            out += "\n" + indent(ind + 1) + head;
            renderTail(b, 2 * (ind + 1) + static_cast<int>(head.size()) + 1, ind + 2, out);
            out += ")";
        }
        out += ")";
        return;
    }
    if (auto* f = t->as<Term::Fun>()) {
        std::string head = "(fun" + annStr(f->anns) + " (";
        for (size_t i = 0; i < f->params.size(); i++) head += (i ? " " : "") + f->params[i];
        head += ")";
        out += head;
        out += "\n" + indent(ind + 1);
        render(f->body, ind + 1, out);
        out += ")";
        return;
    }
    if (auto* a = t->as<Term::App>()) {
        out += "(" + flat(a->fn);
        for (const auto& x : a->args) {
            out += "\n" + indent(ind + 1);
            render(x, ind + 1, out);
        }
        out += ")";
        return;
    }
    if (auto* r = t->as<Term::Record>()) {
        out += "{" + r->label;
        for (const auto& x : r->fields) {
            out += "\n" + indent(ind + 1);
            render(x, ind + 1, out);
        }
        out += "}";
        return;
    }
    out += s;  // Var/Lit/Error always fit
}

}  // namespace

std::string pretty(const TermPtr& term) {
    std::string out;
    render(term, 0, out);
    return out;
}

std::string pretty(const Program& program) {
    std::ostringstream out;
    bool first = true;
    auto sep = [&] {
        if (!first) out << "\n";
        first = false;
    };
    for (const auto& d : program.datatypes) {
        sep();
        out << "(def-data " << d.name;
        for (const auto& v : d.variants) {
            out << "\n  ";
            if (v.ref) {
                out << v.ref->str();
            } else {
                out << "{" << v.sig->first;
                for (const auto& tr : v.sig->second) out << " " << tr.str();
                out << "}";
            }
        }
        out << ")\n";
    }
    for (const auto& s : program.structures) {
        sep();
        out << "(def-struct {" << s.label;
        for (const auto& f : s.fieldNames) out << " " << f;
        out << "})\n";
    }
    for (const auto& f : program.functions) {
        sep();
        out << "(def " << f.name << annStr(f.anns) << " (";
        for (size_t i = 0; i < f.params.size(); i++) {
            if (i) out << " ";
            const auto& [n, tr] = f.params[i];
            if (tr)
                out << "[" << tr->str() << " " << n << "]";
            else
                out << n;
        }
        out << ")\n  ";
        std::string body;
        render(f.body, 1, body);
        out << body << ")\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Free variables, labeling, equality
// ---------------------------------------------------------------------------

std::vector<std::string> patternVars(const PatternPtr& pat) {
    std::vector<std::string> out;
    std::function<void(const PatternPtr&)> go = [&](const PatternPtr& p) {
        if (auto* v = std::get_if<Pattern::Var>(&p->node)) out.push_back(v->name);
        else if (auto* t = std::get_if<Pattern::Type>(&p->node)) out.push_back(t->name);
        else if (auto* r = std::get_if<Pattern::Record>(&p->node))
            for (const auto& f : r->fields) go(f);
    };
    go(pat);
    return out;
}

std::set<std::string> globalNames(const Program& program) {
    std::set<std::string> out;
    for (const auto& f : program.functions) out.insert(f.name);
    for (const auto& op : primOps()) out.insert(op);
    return out;
}

namespace {

void fvWalk(const TermPtr& t, std::set<std::string>& bound, const std::set<std::string>& globals,
            std::set<std::string>& seen, std::vector<std::string>& out) {
    if (auto* v = t->as<Term::Var>()) {
        if (!bound.count(v->name) && !globals.count(v->name) && seen.insert(v->name).second)
            out.push_back(v->name);
        return;
    }
    if (auto* f = t->as<Term::Fun>()) {
        std::vector<std::string> added;
        for (const auto& p : f->params)
            if (bound.insert(p).second) added.push_back(p);
        fvWalk(f->body, bound, globals, seen, out);
        for (const auto& p : added) bound.erase(p);
        return;
    }
    if (auto* a = t->as<Term::App>()) {
        fvWalk(a->fn, bound, globals, seen, out);
        for (const auto& x : a->args) fvWalk(x, bound, globals, seen, out);
        return;
    }
    if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields) fvWalk(x, bound, globals, seen, out);
        return;
    }
    if (auto* l = t->as<Term::Let>()) {
        fvWalk(l->bound, bound, globals, seen, out);
        std::vector<std::string> added;
        for (const auto& p : patternVars(l->pat))
            if (bound.insert(p).second) added.push_back(p);
        fvWalk(l->body, bound, globals, seen, out);
        for (const auto& p : added) bound.erase(p);
        return;
    }
    if (auto* m = t->as<Term::Match>()) {
        fvWalk(m->scrutinee, bound, globals, seen, out);
        for (const auto& [p, b] : m->branches) {
            std::vector<std::string> added;
            for (const auto& x : patternVars(p))
                if (bound.insert(x).second) added.push_back(x);
            fvWalk(b, bound, globals, seen, out);
            for (const auto& x : added) bound.erase(x);
        }
        return;
    }
}

}  // namespace

std::vector<std::string> freeVars(const TermPtr& term, const std::set<std::string>& globals) {
    std::set<std::string> bound, seen;
    std::vector<std::string> out;
    fvWalk(term, bound, globals, seen, out);
    return out;
}

namespace {

void scopedFvWalk(const TermPtr& t, std::set<std::string>& bound,
                  const std::set<std::string>& globals,
                  std::map<Label, std::vector<std::string>>& out) {
    if (t->as<Term::Fun>()) {
        std::set<std::string> effective;
        for (const auto& g : globals)
            if (!bound.count(g)) effective.insert(g);
        out[t->label] = freeVars(t, effective);
    }
    if (auto* f = t->as<Term::Fun>()) {
        std::vector<std::string> added;
        for (const auto& p : f->params)
            if (bound.insert(p).second) added.push_back(p);
        scopedFvWalk(f->body, bound, globals, out);
        for (const auto& p : added) bound.erase(p);
    } else if (auto* a = t->as<Term::App>()) {
        scopedFvWalk(a->fn, bound, globals, out);
        for (const auto& x : a->args) scopedFvWalk(x, bound, globals, out);
    } else if (auto* r = t->as<Term::Record>()) {
        for (const auto& x : r->fields) scopedFvWalk(x, bound, globals, out);
    } else if (auto* l = t->as<Term::Let>()) {
        scopedFvWalk(l->bound, bound, globals, out);
        std::vector<std::string> added;
        for (const auto& p : patternVars(l->pat))
            if (bound.insert(p).second) added.push_back(p);
        scopedFvWalk(l->body, bound, globals, out);
        for (const auto& p : added) bound.erase(p);
    } else if (auto* m = t->as<Term::Match>()) {
        scopedFvWalk(m->scrutinee, bound, globals, out);
        for (const auto& [p, b] : m->branches) {
            std::vector<std::string> added;
            for (const auto& x : patternVars(p))
                if (bound.insert(x).second) added.push_back(x);
            scopedFvWalk(b, bound, globals, out);
            for (const auto& x : added) bound.erase(x);
        }
    }
}

}  // namespace

std::map<Label, std::vector<std::string>> scopedFunFreeVars(const Program& program) {
    std::map<Label, std::vector<std::string>> out;
    std::set<std::string> globals = globalNames(program);
    for (const auto& f : program.functions) {
        std::set<std::string> bound;
        for (const auto& [n, tr] : f.params) bound.insert(n);
        scopedFvWalk(f.body, bound, globals, out);
    }
    return out;
}

namespace {

TermPtr relabelTerm(const TermPtr& t, Label& next) {
    auto out = std::make_shared<Term>(*t);
    out->label = next++;
    auto& node = out->node;
    if (auto* f = std::get_if<Term::Fun>(&node)) {
        f->body = relabelTerm(f->body, next);
    } else if (auto* a = std::get_if<Term::App>(&node)) {
        a->fn = relabelTerm(a->fn, next);
        for (auto& x : a->args) x = relabelTerm(x, next);
    } else if (auto* r = std::get_if<Term::Record>(&node)) {
        for (auto& x : r->fields) x = relabelTerm(x, next);
    } else if (auto* l = std::get_if<Term::Let>(&node)) {
        l->bound = relabelTerm(l->bound, next);
        l->body = relabelTerm(l->body, next);
    } else if (auto* m = std::get_if<Term::Match>(&node)) {
        m->scrutinee = relabelTerm(m->scrutinee, next);
        for (auto& [p, b] : m->branches) b = relabelTerm(b, next);
    }
    return out;
}

}  // namespace

Program relabel(const Program& program) {
    Program out = program;
    Label next = 0;
    for (auto& f : out.functions) f.body = relabelTerm(f.body, next);
    return out;
}

void collectLabels(const TermPtr& term, std::vector<Label>& out) {
    out.push_back(term->label);
    if (auto* f = term->as<Term::Fun>()) {
        collectLabels(f->body, out);
    } else if (auto* a = term->as<Term::App>()) {
        collectLabels(a->fn, out);
        for (const auto& x : a->args) collectLabels(x, out);
    } else if (auto* r = term->as<Term::Record>()) {
        for (const auto& x : r->fields) collectLabels(x, out);
    } else if (auto* l = term->as<Term::Let>()) {
        collectLabels(l->bound, out);
        collectLabels(l->body, out);
    } else if (auto* m = term->as<Term::Match>()) {
        collectLabels(m->scrutinee, out);
        for (const auto& [p, b] : m->branches) collectLabels(b, out);
    }
}

namespace {

bool patEq(const PatternPtr& a, const PatternPtr& b) {
    if (a->node.index() != b->node.index()) return false;
    if (auto* v = std::get_if<Pattern::Var>(&a->node))
        return v->name == std::get<Pattern::Var>(b->node).name;
    if (auto* l = std::get_if<Pattern::PLit>(&a->node))
        return l->value == std::get<Pattern::PLit>(b->node).value;
    if (std::get_if<Pattern::Wild>(&a->node)) return true;
    if (auto* t = std::get_if<Pattern::Type>(&a->node)) {
        const auto& u = std::get<Pattern::Type>(b->node);
        return t->tp == u.tp && t->name == u.name;
    }
    const auto& r = std::get<Pattern::Record>(a->node);
    const auto& s = std::get<Pattern::Record>(b->node);
    if (r.label != s.label || r.fields.size() != s.fields.size()) return false;
    for (size_t i = 0; i < r.fields.size(); i++)
        if (!patEq(r.fields[i], s.fields[i])) return false;
    return true;
}

bool annEq(const Annotations& a, const Annotations& b) {
    return a.atomic == b.atomic && a.noDefun == b.noDefun && a.structName == b.structName;
}

}  // namespace

bool structuralEq(const TermPtr& a, const TermPtr& b) {
    if (a->node.index() != b->node.index()) return false;
    if (auto* v = a->as<Term::Var>()) return v->name == b->as<Term::Var>()->name;
    if (auto* l = a->as<Term::TLit>()) return l->value == b->as<Term::TLit>()->value;
    if (auto* f = a->as<Term::Fun>()) {
        const auto* g = b->as<Term::Fun>();
        return f->params == g->params && annEq(f->anns, g->anns) &&
               structuralEq(f->body, g->body);
    }
    if (auto* x = a->as<Term::App>()) {
        const auto* y = b->as<Term::App>();
        if (!structuralEq(x->fn, y->fn) || x->args.size() != y->args.size()) return false;
        for (size_t i = 0; i < x->args.size(); i++)
            if (!structuralEq(x->args[i], y->args[i])) return false;
        return true;
    }
    if (auto* r = a->as<Term::Record>()) {
        const auto* s = b->as<Term::Record>();
        if (r->label != s->label || r->fields.size() != s->fields.size()) return false;
        for (size_t i = 0; i < r->fields.size(); i++)
            if (!structuralEq(r->fields[i], s->fields[i])) return false;
        return true;
    }
    if (auto* l = a->as<Term::Let>()) {
        const auto* m = b->as<Term::Let>();
        return patEq(l->pat, m->pat) && structuralEq(l->bound, m->bound) &&
               structuralEq(l->body, m->body);
    }
    if (auto* m = a->as<Term::Match>()) {
        const auto* n = b->as<Term::Match>();
        if (!structuralEq(m->scrutinee, n->scrutinee) ||
            m->branches.size() != n->branches.size())
            return false;
        for (size_t i = 0; i < m->branches.size(); i++) {
            if (!patEq(m->branches[i].first, n->branches[i].first)) return false;
            if (!structuralEq(m->branches[i].second, n->branches[i].second)) return false;
        }
        return true;
    }
    return a->as<Term::Error>()->message == b->as<Term::Error>()->message;
}

namespace {

bool typeRefEq(const TypeRef& a, const TypeRef& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == TypeRef::Kind::Base) return a.base == b.base;
    if (a.kind == TypeRef::Kind::Named) return a.name == b.name;
    return true;
}

}  // namespace

bool structuralEq(const Program& a, const Program& b) {
    if (a.datatypes.size() != b.datatypes.size() || a.structures.size() != b.structures.size() ||
        a.functions.size() != b.functions.size())
        return false;
    for (size_t i = 0; i < a.datatypes.size(); i++) {
        const auto& d = a.datatypes[i];
        const auto& e = b.datatypes[i];
        if (d.name != e.name || d.variants.size() != e.variants.size()) return false;
        for (size_t k = 0; k < d.variants.size(); k++) {
            const auto& v = d.variants[k];
            const auto& w = e.variants[k];
            if (v.ref.has_value() != w.ref.has_value()) return false;
            if (v.ref && !typeRefEq(*v.ref, *w.ref)) return false;
            if (v.sig.has_value() != w.sig.has_value()) return false;
            if (v.sig) {
                if (v.sig->first != w.sig->first || v.sig->second.size() != w.sig->second.size())
                    return false;
                for (size_t j = 0; j < v.sig->second.size(); j++)
                    if (!typeRefEq(v.sig->second[j], w.sig->second[j])) return false;
            }
        }
    }
    for (size_t i = 0; i < a.structures.size(); i++) {
        if (a.structures[i].label != b.structures[i].label ||
            a.structures[i].fieldNames != b.structures[i].fieldNames)
            return false;
    }
    for (size_t i = 0; i < a.functions.size(); i++) {
        const auto& f = a.functions[i];
        const auto& g = b.functions[i];
        if (f.name != g.name || !annEq(f.anns, g.anns) || f.params.size() != g.params.size())
            return false;
        for (size_t k = 0; k < f.params.size(); k++) {
            if (f.params[k].first != g.params[k].first) return false;
            if (f.params[k].second.has_value() != g.params[k].second.has_value()) return false;
            if (f.params[k].second && !typeRefEq(*f.params[k].second, *g.params[k].second))
                return false;
        }
        if (!structuralEq(f.body, g.body)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Equivalence modulo generated names
// ---------------------------------------------------------------------------

namespace {

struct NameMatcher {
    const std::set<std::string>& pinned;
    std::map<std::string, std::string> fwd, bwd;
    std::string why;

    explicit NameMatcher(const std::set<std::string>& p) : pinned(p) {}

    bool bind(const std::string& a, const std::string& b) {
        if (pinned.count(a) || pinned.count(b) || isPrimOp(a) || isPrimOp(b)) {
            if (a != b) {
                why = "pinned name mismatch: `" + a + "` vs `" + b + "`";
                return false;
            }
            return true;
        }
        auto f = fwd.find(a);
        auto g = bwd.find(b);
        if (f == fwd.end() && g == bwd.end()) {
            fwd[a] = b;
            bwd[b] = a;
            return true;
        }
        if (f != fwd.end() && f->second == b && g != bwd.end() && g->second == a) return true;
        why = "inconsistent renaming: `" + a + "` vs `" + b + "`";
        return false;
    }
};

struct AlphaCtx {
    NameMatcher labels;   // record labels and function names
    std::vector<std::pair<std::string, std::string>> vars;

    explicit AlphaCtx(const std::set<std::string>& pinned) : labels(pinned) {}

    bool varEq(const std::string& a, const std::string& b) {
        for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
            if (it->first == a || it->second == b) return it->first == a && it->second == b;
        }
        // Both unbound: top-level or primitive references, matched by name map.
        return labels.bind(a, b);
    }
};

bool alphaPat(const PatternPtr& a, const PatternPtr& b, AlphaCtx& ctx, size_t& pushed) {
    if (a->node.index() != b->node.index()) {
        ctx.labels.why = "pattern shape mismatch";
        return false;
    }
    if (auto* v = std::get_if<Pattern::Var>(&a->node)) {
        ctx.vars.emplace_back(v->name, std::get<Pattern::Var>(b->node).name);
        pushed++;
        return true;
    }
    if (auto* l = std::get_if<Pattern::PLit>(&a->node))
        return l->value == std::get<Pattern::PLit>(b->node).value;
    if (std::get_if<Pattern::Wild>(&a->node)) return true;
    if (auto* t = std::get_if<Pattern::Type>(&a->node)) {
        const auto& u = std::get<Pattern::Type>(b->node);
        if (t->tp != u.tp) return false;
        ctx.vars.emplace_back(t->name, u.name);
        pushed++;
        return true;
    }
    const auto& r = std::get<Pattern::Record>(a->node);
    const auto& s = std::get<Pattern::Record>(b->node);
    if (!ctx.labels.bind(r.label, s.label)) return false;
    if (r.fields.size() != s.fields.size()) return false;
    for (size_t i = 0; i < r.fields.size(); i++)
        if (!alphaPat(r.fields[i], s.fields[i], ctx, pushed)) return false;
    return true;
}

bool alphaTerm(const TermPtr& a, const TermPtr& b, AlphaCtx& ctx) {
    if (a->node.index() != b->node.index()) {
        ctx.labels.why = "term shape mismatch: " + flat(a) + " vs " + flat(b);
        return false;
    }
    if (auto* v = a->as<Term::Var>()) return ctx.varEq(v->name, b->as<Term::Var>()->name);
    if (auto* l = a->as<Term::TLit>()) return l->value == b->as<Term::TLit>()->value;
    if (auto* f = a->as<Term::Fun>()) {
        const auto* g = b->as<Term::Fun>();
        if (f->params.size() != g->params.size()) return false;
        if (f->anns.atomic != g->anns.atomic || f->anns.noDefun != g->anns.noDefun) return false;
        if (f->anns.structName.has_value() != g->anns.structName.has_value()) return false;
        if (f->anns.structName && !ctx.labels.bind(*f->anns.structName, *g->anns.structName))
            return false;
        for (size_t i = 0; i < f->params.size(); i++)
            ctx.vars.emplace_back(f->params[i], g->params[i]);
        bool ok = alphaTerm(f->body, g->body, ctx);
        ctx.vars.resize(ctx.vars.size() - f->params.size());
        return ok;
    }
    if (auto* x = a->as<Term::App>()) {
        const auto* y = b->as<Term::App>();
        if (x->args.size() != y->args.size()) return false;
        if (!alphaTerm(x->fn, y->fn, ctx)) return false;
        for (size_t i = 0; i < x->args.size(); i++)
            if (!alphaTerm(x->args[i], y->args[i], ctx)) return false;
        return true;
    }
    if (auto* r = a->as<Term::Record>()) {
        const auto* s = b->as<Term::Record>();
        if (!ctx.labels.bind(r->label, s->label)) return false;
        if (r->fields.size() != s->fields.size()) return false;
        for (size_t i = 0; i < r->fields.size(); i++)
            if (!alphaTerm(r->fields[i], s->fields[i], ctx)) return false;
        return true;
    }
    if (auto* l = a->as<Term::Let>()) {
        const auto* m = b->as<Term::Let>();
        if (!alphaTerm(l->bound, m->bound, ctx)) return false;
        size_t pushed = 0;
        bool ok = alphaPat(l->pat, m->pat, ctx, pushed) && alphaTerm(l->body, m->body, ctx);
        ctx.vars.resize(ctx.vars.size() - pushed);
        return ok;
    }
    if (auto* m = a->as<Term::Match>()) {
        const auto* n = b->as<Term::Match>();
        if (m->branches.size() != n->branches.size()) return false;
        if (!alphaTerm(m->scrutinee, n->scrutinee, ctx)) return false;
        for (size_t i = 0; i < m->branches.size(); i++) {
            size_t pushed = 0;
            bool ok = alphaPat(m->branches[i].first, n->branches[i].first, ctx, pushed) &&
                      alphaTerm(m->branches[i].second, n->branches[i].second, ctx);
            ctx.vars.resize(ctx.vars.size() - pushed);
            if (!ok) return false;
        }
        return true;
    }
    return a->as<Term::Error>()->message == b->as<Term::Error>()->message;
}

}  // namespace

bool equivalentModuloNames(const Program& a, const Program& b, const std::set<std::string>& pinned,
                           std::string* why) {
    AlphaCtx ctx(pinned);
    auto fail = [&](const std::string& msg) {
        if (why) *why = ctx.labels.why.empty() ? msg : msg + " (" + ctx.labels.why + ")";
        return false;
    };
    if (a.functions.size() != b.functions.size()) return fail("function count differs");
    for (size_t i = 0; i < a.functions.size(); i++) {
        const auto& f = a.functions[i];
        const auto& g = b.functions[i];
        if (!ctx.labels.bind(f.name, g.name)) return fail("function name mismatch");
        if (f.params.size() != g.params.size())
            return fail("arity of `" + f.name + "` vs `" + g.name + "` differs");
        if (f.anns.atomic != g.anns.atomic || f.anns.noDefun != g.anns.noDefun)
            return fail("annotations of `" + f.name + "` differ");
        for (size_t k = 0; k < f.params.size(); k++) {
            const auto& ta = f.params[k].second;
            const auto& tb = g.params[k].second;
            if (ta.has_value() != tb.has_value())
                return fail("type annotations of `" + f.name + "` differ");
            if (ta && ta->kind != tb->kind) return fail("param type kind differs");
            if (ta && ta->kind == TypeRef::Kind::Base && ta->base != tb->base)
                return fail("param base type differs");
            if (ta && ta->kind == TypeRef::Kind::Named && !ctx.labels.bind(ta->name, tb->name))
                return fail("param type name differs");
            ctx.vars.emplace_back(f.params[k].first, g.params[k].first);
        }
        bool ok = alphaTerm(f.body, g.body, ctx);
        ctx.vars.clear();
        if (!ok) return fail("body of `" + f.name + "` differs from `" + g.name + "`");
    }
    // Declarations as label -> arity, with labels mapped through the bijection
    // (grouping into def-data vs def-struct is ignored).
    auto declsA = a.declaredLabels();
    auto declsB = b.declaredLabels();
    if (declsA.size() != declsB.size()) return fail("declared label count differs");
    for (const auto& [label, arity] : declsA) {
        std::string mapped = label;
        if (!pinned.count(label)) {
            auto it = ctx.labels.fwd.find(label);
            if (it != ctx.labels.fwd.end()) mapped = it->second;
        }
        auto jt = declsB.find(mapped);
        if (jt == declsB.end())
            return fail("label `" + label + "` has no counterpart `" + mapped + "`");
        if (jt->second != arity) return fail("arity of label `" + label + "` differs");
    }
    return true;
}

TermPtr renameBound(const TermPtr& term, const std::map<std::string, std::string>& ren) {
    std::function<PatternPtr(const PatternPtr&)> renPat = [&](const PatternPtr& p) -> PatternPtr {
        if (auto* v = std::get_if<Pattern::Var>(&p->node)) {
            auto it = ren.find(v->name);
            return mkPVar(it == ren.end() ? v->name : it->second, p->pos);
        }
        if (auto* t = std::get_if<Pattern::Type>(&p->node)) {
            auto it = ren.find(t->name);
            return mkPType(t->tp, it == ren.end() ? t->name : it->second, p->pos);
        }
        if (auto* r = std::get_if<Pattern::Record>(&p->node)) {
            std::vector<PatternPtr> fields;
            for (const auto& f : r->fields) fields.push_back(renPat(f));
            return mkPRecord(r->label, std::move(fields), p->pos);
        }
        return p;
    };
    std::function<TermPtr(const TermPtr&, std::map<std::string, std::string>)> go =
        [&](const TermPtr& t, std::map<std::string, std::string> env) -> TermPtr {
        if (auto* v = t->as<Term::Var>()) {
            auto it = env.find(v->name);
            return it == env.end() ? t : mkVar(it->second, t->pos);
        }
        if (t->as<Term::TLit>() || t->as<Term::Error>()) return t;
        if (auto* f = t->as<Term::Fun>()) {
            std::vector<std::string> params;
            for (const auto& p : f->params) {
                auto it = ren.find(p);
                std::string q = it == ren.end() ? p : it->second;
                env[p] = q;
                params.push_back(q);
            }
            return mkFun(std::move(params), go(f->body, env), f->anns, t->pos);
        }
        if (auto* a = t->as<Term::App>()) {
            std::vector<TermPtr> args;
            for (const auto& x : a->args) args.push_back(go(x, env));
            return mkApp(go(a->fn, env), std::move(args), t->pos);
        }
        if (auto* r = t->as<Term::Record>()) {
            std::vector<TermPtr> fields;
            for (const auto& x : r->fields) fields.push_back(go(x, env));
            return mkRecord(r->label, std::move(fields), t->pos);
        }
        if (auto* l = t->as<Term::Let>()) {
            TermPtr bound = go(l->bound, env);
            for (const auto& p : patternVars(l->pat)) {
                auto it = ren.find(p);
                env[p] = it == ren.end() ? p : it->second;
            }
            return mkLet(renPat(l->pat), std::move(bound), go(l->body, env), t->pos);
        }
        const auto* m = t->as<Term::Match>();
        TermPtr scrut = go(m->scrutinee, env);
        std::vector<std::pair<PatternPtr, TermPtr>> branches;
        for (const auto& [p, b] : m->branches) {
            auto benv = env;
            for (const auto& x : patternVars(p)) {
                auto it = ren.find(x);
                benv[x] = it == ren.end() ? x : it->second;
            }
            branches.emplace_back(renPat(p), go(b, benv));
        }
        return mkMatch(std::move(scrut), std::move(branches), t->pos);
    };
    return go(term, {});
}

}  // namespace semtrans::syntax
