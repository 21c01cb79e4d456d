#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sqlsynth::analysis {

enum class TokenKind {
    Keyword,      // recognized SQLite keyword (text preserved as written)
    Identifier,   // bare identifier
    QuotedIdent,  // "x", `x`, [x]
    String,       // 'text'
    Number,       // 42, 1.5, .5, 1e9, 0x1F
    Blob,         // x'ABCD'
    Parameter,    // ?, ?1, :name, @name, $name
    Operator,     // punctuation and operators, including ( ) , ; . *
};

struct Token {
    TokenKind kind;
    std::string text;

    bool is(std::string_view t) const { return text == t; }
    // Case-insensitive keyword check.
    bool is_keyword(std::string_view upper_name) const;
};

// Lexes one SQL statement in the SQLite dialect. Comments are skipped.
// Throws ParseError on unterminated strings/quotes or stray bytes.
std::vector<Token> tokenize(std::string_view sql);

// True if `word` is an SQLite keyword (case-insensitive).
bool is_sqlite_keyword(std::string_view word);

// Joins tokens back into a statement with canonical spacing: single spaces
// everywhere except around '.', after '(', before ')' ',' ';', and between a
// function name and its '(' .
std::string render_tokens(const std::vector<Token>& tokens);

}  // namespace sqlsynth::analysis
