#include "sqlsynth/analysis/tokenizer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::analysis {

namespace {

const std::unordered_set<std::string>& keyword_set() {
    // The full SQLite keyword list.
    static const std::unordered_set<std::string> kw = {
        "ABORT", "ACTION", "ADD", "AFTER", "ALL", "ALTER", "ALWAYS", "ANALYZE", "AND", "AS",
        "ASC", "ATTACH", "AUTOINCREMENT", "BEFORE", "BEGIN", "BETWEEN", "BY", "CASCADE", "CASE",
        "CAST", "CHECK", "COLLATE", "COLUMN", "COMMIT", "CONFLICT", "CONSTRAINT", "CREATE",
        "CROSS", "CURRENT", "CURRENT_DATE", "CURRENT_TIME", "CURRENT_TIMESTAMP", "DATABASE",
        "DEFAULT", "DEFERRABLE", "DEFERRED", "DELETE", "DESC", "DETACH", "DISTINCT", "DO",
        "DROP", "EACH", "ELSE", "END", "ESCAPE", "EXCEPT", "EXCLUDE", "EXCLUSIVE", "EXISTS",
        "EXPLAIN", "FAIL", "FILTER", "FIRST", "FOLLOWING", "FOR", "FOREIGN", "FROM", "FULL",
        "GENERATED", "GLOB", "GROUP", "GROUPS", "HAVING", "IF", "IGNORE", "IMMEDIATE", "IN",
        "INDEX", "INDEXED", "INITIALLY", "INNER", "INSERT", "INSTEAD", "INTERSECT", "INTO",
        "IS", "ISNULL", "JOIN", "KEY", "LAST", "LEFT", "LIKE", "LIMIT", "MATCH", "MATERIALIZED",
        "NATURAL", "NO", "NOT", "NOTHING", "NOTNULL", "NULL", "NULLS", "OF", "OFFSET", "ON",
        "OR", "ORDER", "OTHERS", "OUTER", "OVER", "PARTITION", "PLAN", "PRAGMA", "PRECEDING",
        "PRIMARY", "QUERY", "RAISE", "RANGE", "RECURSIVE", "REFERENCES", "REGEXP", "REINDEX",
        "RELEASE", "RENAME", "REPLACE", "RESTRICT", "RETURNING", "RIGHT", "ROLLBACK", "ROW",
        "ROWS", "SAVEPOINT", "SELECT", "SET", "TABLE", "TEMP", "TEMPORARY", "THEN", "TIES",
        "TO", "TRANSACTION", "TRIGGER", "UNBOUNDED", "UNION", "UNIQUE", "UPDATE", "USING",
        "VACUUM", "VALUES", "VIEW", "VIRTUAL", "WHEN", "WHERE", "WINDOW", "WITH", "WITHOUT",
        // boolean literals are lexed as keywords so masking can see them
        "TRUE", "FALSE",
    };
    return kw;
}

bool is_ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c >= 0x80;
}

bool is_ident_char(unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80;
}

}  // namespace

bool is_sqlite_keyword(std::string_view word) {
    return keyword_set().count(util::to_upper(word)) > 0;
}

bool Token::is_keyword(std::string_view upper_name) const {
    return kind == TokenKind::Keyword && util::to_upper(text) == upper_name;
}

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = sql.size();

    auto push = [&](TokenKind kind, size_t begin, size_t end) {
        out.push_back(Token{kind, std::string(sql.substr(begin, end - begin))});
    };

    while (i < n) {
        unsigned char c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        // line comment
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        // block comment (unterminated runs to end of input, as SQLite does)
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n;
            continue;
        }
        // string literal, '' escapes
        if (c == '\'') {
            size_t begin = i++;
            for (;;) {
                if (i >= n) throw ParseError("unterminated string literal");
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            push(TokenKind::String, begin, i);
            continue;
        }
        // blob literal x'...'
        if ((c == 'x' || c == 'X') && i + 1 < n && sql[i + 1] == '\'') {
            size_t begin = i;
            i += 2;
            while (i < n && sql[i] != '\'') ++i;
            if (i >= n) throw ParseError("unterminated blob literal");
            ++i;
            push(TokenKind::Blob, begin, i);
            continue;
        }
        // quoted identifiers
        if (c == '"' || c == '`') {
            char quote = static_cast<char>(c);
            size_t begin = i++;
            for (;;) {
                if (i >= n) throw ParseError("unterminated quoted identifier");
                if (sql[i] == quote) {
                    if (i + 1 < n && sql[i + 1] == quote) {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            push(TokenKind::QuotedIdent, begin, i);
            continue;
        }
        if (c == '[') {
            size_t begin = i++;
            while (i < n && sql[i] != ']') ++i;
            if (i >= n) throw ParseError("unterminated bracketed identifier");
            ++i;
            push(TokenKind::QuotedIdent, begin, i);
            continue;
        }
        // number: digits, or '.' followed by digit
        if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            size_t begin = i;
            if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
                i += 2;
                while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
            } else {
                while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                if (i < n && sql[i] == '.') {
                    ++i;
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                }
                if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                    size_t mark = i++;
                    if (i < n && (sql[i] == '+' || sql[i] == '-')) ++i;
                    if (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) {
                        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                    } else {
                        i = mark;  // not an exponent
                    }
                }
            }
            push(TokenKind::Number, begin, i);
            continue;
        }
        // parameters
        if (c == '?') {
            size_t begin = i++;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            push(TokenKind::Parameter, begin, i);
            continue;
        }
        if (c == ':' || c == '@' || c == '$') {
            if (i + 1 < n && is_ident_start(static_cast<unsigned char>(sql[i + 1]))) {
                size_t begin = i++;
                while (i < n && is_ident_char(static_cast<unsigned char>(sql[i]))) ++i;
                push(TokenKind::Parameter, begin, i);
                continue;
            }
            // bare ':' has no meaning in a SELECT; emit as operator
            push(TokenKind::Operator, i, i + 1);
            ++i;
            continue;
        }
        // identifier / keyword
        if (is_ident_start(c)) {
            size_t begin = i;
            while (i < n && is_ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            std::string word(sql.substr(begin, i - begin));
            push(is_sqlite_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, begin, i);
            continue;
        }
        // multi-char operators, longest first
        static const std::array<std::string_view, 9> multi = {"->>", "->", "||", "<<", ">>", "<=", ">=", "==", "<>"};
        bool matched = false;
        for (auto op : multi) {
            if (sql.substr(i, op.size()) == op) {
                push(TokenKind::Operator, i, i + op.size());
                i += op.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (sql.substr(i, 2) == "!=") {
            push(TokenKind::Operator, i, i + 2);
            i += 2;
            continue;
        }
        static const std::string_view singles = "-+*/%<>=&|~(),;.#";
        if (singles.find(static_cast<char>(c)) != std::string_view::npos) {
            push(TokenKind::Operator, i, i + 1);
            ++i;
            continue;
        }
        throw ParseError("unexpected character in SQL: '" + std::string(1, static_cast<char>(c)) + "'");
    }
    return out;
}

std::string render_tokens(const std::vector<Token>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        if (!out.empty()) {
            bool no_space = false;
            const Token& prev = tokens[i - 1];
            if (tok.is(",") || tok.is(")") || tok.is(";") || tok.is(".")) no_space = true;
            if (prev.is("(") || prev.is(".")) no_space = true;
            // function-call parens hug the name: COUNT(*), CAST(x AS ...)
            if (tok.is("(") &&
                (prev.kind == TokenKind::Identifier || prev.kind == TokenKind::QuotedIdent ||
                 prev.is_keyword("CAST"))) {
                no_space = true;
            }
            if (!no_space) out += ' ';
        }
        out += tok.text;
    }
    return out;
}

}  // namespace sqlsynth::analysis
