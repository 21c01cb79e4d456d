#include "sqlsynth/analysis/fingerprint.hpp"

#include "sqlsynth/analysis/tokenizer.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::analysis {

namespace {

const std::string kMask = "[MASK]";

bool is_value_literal(const Token& tok) {
    switch (tok.kind) {
        case TokenKind::Number:
        case TokenKind::String:
        case TokenKind::Blob:
        case TokenKind::Parameter:
            return true;
        case TokenKind::Keyword:
            return tok.is_keyword("TRUE") || tok.is_keyword("FALSE");
        default:
            return false;
    }
}

// True when tokens[idx] is a '+'/'-' acting as a numeric sign rather than a
// binary operator (previous token cannot end an expression).
bool is_unary_sign(const std::vector<Token>& tokens, size_t idx) {
    if (!(tokens[idx].is("-") || tokens[idx].is("+"))) return false;
    if (idx == 0) return true;
    const Token& prev = tokens[idx - 1];
    switch (prev.kind) {
        case TokenKind::Identifier:
        case TokenKind::QuotedIdent:
        case TokenKind::Number:
        case TokenKind::String:
        case TokenKind::Blob:
        case TokenKind::Parameter:
            return false;
        case TokenKind::Keyword:
            // `x IS NULL - 1` style corner cases read as binary; every other
            // keyword (WHERE, AND, THEN, ...) precedes a fresh expression.
            return !(prev.is_keyword("NULL") || prev.is_keyword("TRUE") || prev.is_keyword("FALSE"));
        case TokenKind::Operator:
            return !prev.is(")") && !prev.is("*");
    }
    return false;
}

std::vector<Token> drop_trailing_semicolons(std::vector<Token> tokens) {
    while (!tokens.empty() && tokens.back().is(";")) tokens.pop_back();
    return tokens;
}

std::vector<Token> mask_literals(const std::vector<Token>& tokens) {
    std::vector<Token> out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        if (is_value_literal(tok)) {
            // fold unary sign(s) before the literal into the mask: `> -5` -> `> [MASK]`
            size_t first_sign = i;
            while (first_sign > 0 && (tokens[first_sign - 1].is("-") || tokens[first_sign - 1].is("+")) &&
                   is_unary_sign(tokens, first_sign - 1)) {
                --first_sign;
            }
            for (size_t k = first_sign; k < i && !out.empty(); ++k) out.pop_back();
            if (!out.empty() && out.back().text == kMask) continue;  // merge adjacent masks
            out.push_back(Token{tok.kind, kMask});
            continue;
        }
        out.push_back(tok);
    }
    return out;
}

std::vector<Token> mask_identifiers(const std::vector<Token>& tokens) {
    std::vector<Token> out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        bool is_ident = tok.kind == TokenKind::Identifier || tok.kind == TokenKind::QuotedIdent;
        if (is_ident && tok.text != kMask) {
            bool function_call = i + 1 < tokens.size() && tokens[i + 1].is("(");
            if (!function_call) {
                // collapse qualified names: [MASK] . ident -> [MASK]
                if (out.size() >= 2 && out.back().is(".") && out[out.size() - 2].text == kMask) {
                    out.pop_back();
                    continue;
                }
                out.push_back(Token{TokenKind::Identifier, kMask});
                continue;
            }
        }
        out.push_back(tok);
    }
    return out;
}

}  // namespace

std::string template_of(std::string_view sql) {
    auto tokens = drop_trailing_semicolons(tokenize(sql));
    if (tokens.empty()) throw ParseError("empty SQL statement");
    return render_tokens(mask_literals(tokens));
}

std::string skeleton_of(std::string_view sql) {
    auto tokens = drop_trailing_semicolons(tokenize(sql));
    if (tokens.empty()) throw ParseError("empty SQL statement");
    return render_tokens(mask_identifiers(mask_literals(tokens)));
}

}  // namespace sqlsynth::analysis
