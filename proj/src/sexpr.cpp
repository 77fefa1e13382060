#include "semtrans/sexpr.hpp"

#include <cctype>
#include <cstdlib>
#include <optional>

#include "semtrans/errors.hpp"

namespace semtrans {

std::string SrcPos::str() const {
    return std::to_string(line) + ":" + std::to_string(col);
}

std::string SExpr::describe() const {
    switch (kind) {
        case Kind::Symbol: return "symbol `" + text + "`";
        case Kind::Int: return "integer " + std::to_string(intVal);
        case Kind::Bool: return boolVal ? "#t" : "#f";
        case Kind::Str: return "string " + quoteString(text);
        case Kind::Keyword: return "#:" + text;
        case Kind::List: return std::string(1, open) + "...)";
    }
    return "?";
}

std::string quoteString(const std::string& s) {
    std::string r = "\"";
    for (char c : s) {
        switch (c) {
            case '\\': r += "\\\\"; break;
            case '"': r += "\\\""; break;
            case '\n': r += "\\n"; break;
            case '\t': r += "\\t"; break;
            default: r += c;
        }
    }
    r += '"';
    return r;
}

namespace {

bool isDelimiter(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' ||
           c == ']' || c == '{' || c == '}' || c == '"' || c == ';';
}

struct Reader {
    const std::string& src;
    size_t i = 0;
    SrcPos pos{1, 1};

    explicit Reader(const std::string& s) : src(s) {}

    bool done() const { return i >= src.size(); }
    char peek() const { return src[i]; }

    char next() {
        char c = src[i++];
        if (c == '\n') {
            pos.line++;
            pos.col = 1;
        } else {
            pos.col++;
        }
        return c;
    }

    void skipSpaceAndComments() {
        while (!done()) {
            char c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                next();
            } else if (c == ';') {
                while (!done() && peek() != '\n') next();
            } else if (c == '#' && src.compare(i, 5, "#lang") == 0) {
                // A Racket #lang line; skip to end of line.
                while (!done() && peek() != '\n') next();
            } else {
                break;
            }
        }
    }

    SExpr readAtom() {
        SrcPos start = pos;
        std::string text;
        while (!done() && !isDelimiter(peek())) text += next();
        SExpr e;
        e.pos = start;
        if (text.empty()) throw SyntaxError("unexpected character", start);
        if (text[0] == '#') {
            if (text == "#t" || text == "#f") {
                e.kind = SExpr::Kind::Bool;
                e.boolVal = (text == "#t");
                return e;
            }
            if (text.size() > 2 && text[1] == ':') {
                e.kind = SExpr::Kind::Keyword;
                e.text = text.substr(2);
                return e;
            }
            throw SyntaxError("unknown # form `" + text + "`", start);
        }
        // Integer literal: optional sign followed by digits only.
        size_t digitsFrom = (text[0] == '-' || text[0] == '+') ? 1 : 0;
        if (digitsFrom < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[digitsFrom]))) {
            bool allDigits = true;
            for (size_t k = digitsFrom; k < text.size(); k++) {
                if (!std::isdigit(static_cast<unsigned char>(text[k]))) allDigits = false;
            }
            if (!allDigits && digitsFrom == 0)
                throw SyntaxError("identifier may not start with a digit: `" + text + "`", start);
            if (allDigits) {
                e.kind = SExpr::Kind::Int;
                e.intVal = std::strtoll(text.c_str(), nullptr, 10);
                return e;
            }
        }
        e.kind = SExpr::Kind::Symbol;
        e.text = text;
        return e;
    }

    SExpr readString() {
        SrcPos start = pos;
        next();  // opening quote
        std::string text;
        while (true) {
            if (done()) throw SyntaxError("unterminated string literal", start);
            char c = next();
            if (c == '"') break;
            if (c == '\\') {
                if (done()) throw SyntaxError("unterminated escape sequence", start);
                char esc = next();
                switch (esc) {
                    case 'n': text += '\n'; break;
                    case 't': text += '\t'; break;
                    case '\\': text += '\\'; break;
                    case '"': text += '"'; break;
                    default:
                        throw SyntaxError(std::string("invalid escape \\") + esc, start);
                }
            } else {
                text += c;
            }
        }
        SExpr e;
        e.kind = SExpr::Kind::Str;
        e.text = text;
        e.pos = start;
        return e;
    }

    SExpr read() {
        skipSpaceAndComments();
        if (done()) throw SyntaxError("unexpected end of input", pos);
        char c = peek();
        if (c == '(' || c == '[' || c == '{') {
            SrcPos start = pos;
            char open = next();
            char close = open == '(' ? ')' : open == '[' ? ']' : '}';
            SExpr e;
            e.kind = SExpr::Kind::List;
            e.open = open;
            e.pos = start;
            while (true) {
                skipSpaceAndComments();
                if (done())
                    throw SyntaxError(std::string("missing `") + close + "`", start);
                if (peek() == close) {
                    next();
                    return e;
                }
                if (peek() == ')' || peek() == ']' || peek() == '}')
                    throw SyntaxError(std::string("mismatched `") + peek() + "`", pos);
                e.items.push_back(read());
            }
        }
        if (c == ')' || c == ']' || c == '}')
            throw SyntaxError(std::string("unexpected `") + c + "`", pos);
        if (c == '"') return readString();
        return readAtom();
    }
};

}  // namespace

std::vector<SExpr> readSExprs(const std::string& text) {
    Reader r(text);
    std::vector<SExpr> out;
    while (true) {
        r.skipSpaceAndComments();
        if (r.done()) break;
        out.push_back(r.read());
    }
    return out;
}

SExpr readOneSExpr(const std::string& text) {
    Reader r(text);
    SExpr e = r.read();
    r.skipSpaceAndComments();
    if (!r.done()) throw SyntaxError("trailing input after s-expression", r.pos);
    return e;
}

}  // namespace semtrans
