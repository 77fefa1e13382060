#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semtrans {

struct SrcPos {
    int line = 0;
    int col = 0;

    bool known() const { return line > 0; }
    std::string str() const;
};

// One node of the fully parenthesized surface syntax. Lists remember which
// bracket opened them: '(' for forms, '{' for records, '[' for type brackets.
struct SExpr {
    enum class Kind { Symbol, Int, Bool, Str, Keyword, List };

    Kind kind = Kind::List;
    std::string text;          // Symbol / Keyword (without "#:") / Str contents
    std::int64_t intVal = 0;   // Int
    bool boolVal = false;      // Bool
    char open = '(';           // List
    std::vector<SExpr> items;  // List
    SrcPos pos;

    bool isSym(const std::string& s) const { return kind == Kind::Symbol && text == s; }
    bool isList(char o) const { return kind == Kind::List && open == o; }
    std::string describe() const;
};

// Reads a whole file worth of top-level s-expressions. Lines starting with
// "#lang" are skipped; ';' starts a line comment. Throws SyntaxError.
std::vector<SExpr> readSExprs(const std::string& text);

// Reads exactly one s-expression (used for value literals on the CLI).
SExpr readOneSExpr(const std::string& text);

std::string quoteString(const std::string& s);

}  // namespace semtrans
