#include <doctest.h>

#include "sqlsynth/analysis/tokenizer.hpp"
#include "sqlsynth/errors.hpp"

using namespace sqlsynth;
using analysis::Token;
using analysis::TokenKind;
using analysis::tokenize;

static std::vector<std::string> texts(const std::vector<Token>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) out.push_back(t.text);
    return out;
}

TEST_CASE("tokenize splits keywords, identifiers, numbers, operators") {
    auto tokens = tokenize("SELECT name FROM school WHERE age > 18");
    CHECK(texts(tokens) ==
          std::vector<std::string>{"SELECT", "name", "FROM", "school", "WHERE", "age", ">", "18"});
    CHECK(tokens[0].kind == TokenKind::Keyword);
    CHECK(tokens[1].kind == TokenKind::Identifier);
    CHECK(tokens[6].kind == TokenKind::Operator);
    CHECK(tokens[7].kind == TokenKind::Number);
}

TEST_CASE("keywords are recognized case-insensitively but text is preserved") {
    auto tokens = tokenize("select From wHeRe");
    for (const auto& t : tokens) CHECK(t.kind == TokenKind::Keyword);
    CHECK(tokens[0].text == "select");
    CHECK(tokens[0].is_keyword("SELECT"));
}

TEST_CASE("string literals keep quotes and handle doubled-quote escapes") {
    auto tokens = tokenize("SELECT 'it''s', 'plain'");
    CHECK(tokens[1].kind == TokenKind::String);
    CHECK(tokens[1].text == "'it''s'");
    CHECK(tokens[3].kind == TokenKind::String);
}

TEST_CASE("quoted identifiers in three styles") {
    auto tokens = tokenize("SELECT \"a b\", `c`, [d e]");
    CHECK(tokens[1].kind == TokenKind::QuotedIdent);
    CHECK(tokens[1].text == "\"a b\"");
    CHECK(tokens[3].kind == TokenKind::QuotedIdent);
    CHECK(tokens[5].kind == TokenKind::QuotedIdent);
    CHECK(tokens[5].text == "[d e]");
}

TEST_CASE("numbers: ints, decimals, leading dot, exponents, hex") {
    auto tokens = tokenize("SELECT 42, 1.5, .5, 2e10, 3E-7, 0x1F");
    std::vector<std::string> nums;
    for (const auto& t : tokens)
        if (t.kind == TokenKind::Number) nums.push_back(t.text);
    CHECK(nums == std::vector<std::string>{"42", "1.5", ".5", "2e10", "3E-7", "0x1F"});
}

TEST_CASE("a bare dot stays an operator; bad exponents backtrack") {
    auto tokens = tokenize("SELECT t.x");
    CHECK(tokens[2].is("."));
    // "1e+" is not an exponent, so the number ends at "1"
    auto backtracked = tokenize("SELECT 1e+");
    CHECK(texts(backtracked) == std::vector<std::string>{"SELECT", "1", "e", "+"});
    CHECK(backtracked[1].kind == TokenKind::Number);
    CHECK(backtracked[2].kind == TokenKind::Identifier);
}

TEST_CASE("blob literals") {
    auto tokens = tokenize("SELECT x'DEADBEEF'");
    CHECK(tokens[1].kind == TokenKind::Blob);
    CHECK(tokens[1].text == "x'DEADBEEF'");
}

TEST_CASE("bound parameters") {
    auto tokens = tokenize("SELECT ?, ?3, :name, @n, $v");
    int params = 0;
    for (const auto& t : tokens)
        if (t.kind == TokenKind::Parameter) ++params;
    CHECK(params == 5);
}

TEST_CASE("comments are skipped") {
    auto tokens = tokenize("SELECT 1 -- trailing\n+ 2 /* block\n comment */ + 3");
    CHECK(texts(tokens) == std::vector<std::string>{"SELECT", "1", "+", "2", "+", "3"});
}

TEST_CASE("multi-character operators lex greedily") {
    auto tokens = tokenize("a <= b >= c <> d != e || f << g >> h -> i ->> j");
    std::vector<std::string> ops;
    for (const auto& t : tokens)
        if (t.kind == TokenKind::Operator) ops.push_back(t.text);
    CHECK(ops == std::vector<std::string>{"<=", ">=", "<>", "!=", "||", "<<", ">>", "->", "->>"});
}

TEST_CASE("unterminated tokens are parse errors") {
    CHECK_THROWS_AS(tokenize("SELECT 'oops"), ParseError);
    CHECK_THROWS_AS(tokenize("SELECT \"oops"), ParseError);
    CHECK_THROWS_AS(tokenize("SELECT x'AB"), ParseError);
    // an open block comment runs to end of input, matching the engine
    CHECK(texts(tokenize("SELECT 1 /* open")) == std::vector<std::string>{"SELECT", "1"});
}

TEST_CASE("render_tokens spacing rules") {
    using analysis::render_tokens;
    CHECK(render_tokens(tokenize("SELECT  a ,b  FROM t ;")) == "SELECT a, b FROM t;");
    CHECK(render_tokens(tokenize("SELECT count( * ) FROM t")) == "SELECT count(*) FROM t");
    CHECK(render_tokens(tokenize("SELECT t . x FROM t")) == "SELECT t.x FROM t");
    CHECK(render_tokens(tokenize("SELECT a FROM (SELECT 1) x")) == "SELECT a FROM (SELECT 1) x");
    CHECK(render_tokens(tokenize("SELECT CAST(a AS TEXT)")) == "SELECT CAST(a AS TEXT)");
}

TEST_CASE("render of a tokenized render is a fixed point") {
    const char* samples[] = {
        "SELECT a, b FROM t WHERE x > 5 AND y IN (1, 2, 3)",
        "SELECT count(*) FROM t GROUP BY a HAVING count(*) > 2",
        "WITH c AS (SELECT 1) SELECT * FROM c",
    };
    for (const char* sql : samples) {
        auto once = analysis::render_tokens(tokenize(sql));
        auto twice = analysis::render_tokens(tokenize(once));
        CHECK(once == twice);
    }
}
