#include "sqlsynth/analysis/features.hpp"

#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "sqlsynth/analysis/fingerprint.hpp"
#include "sqlsynth/analysis/tokenizer.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::analysis {

namespace {

const std::unordered_set<std::string> kAggregates = {
    "count", "sum", "avg", "min", "max", "group_concat", "total"};

bool is_name(const Token& tok) {
    return tok.kind == TokenKind::Identifier || tok.kind == TokenKind::QuotedIdent;
}

std::string bare_name(const Token& tok) {
    if (tok.kind == TokenKind::Identifier) return util::to_lower(tok.text);
    // strip one layer of quoting
    std::string t = tok.text;
    if (t.size() >= 2) {
        char open = t.front();
        if (open == '"' || open == '`' || open == '[') t = t.substr(1, t.size() - 2);
    }
    return util::to_lower(t);
}

// Matching close-paren index for every open paren; npos when unbalanced.
std::vector<size_t> match_parens(const std::vector<Token>& tokens) {
    std::vector<size_t> match(tokens.size(), std::string::npos);
    std::vector<size_t> stack;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].is("(")) {
            stack.push_back(i);
        } else if (tokens[i].is(")") && !stack.empty()) {
            match[stack.back()] = i;
            stack.pop_back();
        }
    }
    return match;
}

// Paren depth per token position (depth of the context the token sits in).
std::vector<int> depths_of(const std::vector<Token>& tokens) {
    std::vector<int> depths(tokens.size(), 0);
    int depth = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].is(")")) depth = std::max(0, depth - 1);
        depths[i] = depth;
        if (tokens[i].is("(")) ++depth;
    }
    return depths;
}

struct CteInfo {
    std::unordered_set<std::string> names;
    // body paren spans (open, close) of CTEs defined at depth 0
    std::vector<std::pair<size_t, size_t>> top_level_bodies;
};

// Walk every WITH list: `WITH [RECURSIVE] name [(cols)] AS (body) [, ...]`.
CteInfo collect_cte_info(const std::vector<Token>& tokens,
                         const std::vector<int>& depths,
                         const std::vector<size_t>& match) {
    CteInfo info;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (!tokens[i].is_keyword("WITH")) continue;
        size_t j = i + 1;
        if (j < tokens.size() && tokens[j].is_keyword("RECURSIVE")) ++j;
        for (;;) {
            if (j >= tokens.size() || !is_name(tokens[j])) break;
            std::string name = bare_name(tokens[j]);
            ++j;
            if (j < tokens.size() && tokens[j].is("(")) {  // column list
                if (match[j] == std::string::npos) break;
                j = match[j] + 1;
            }
            if (j >= tokens.size() || !tokens[j].is_keyword("AS")) break;
            ++j;
            if (j < tokens.size() && tokens[j].is_keyword("MATERIALIZED")) ++j;
            if (j + 1 < tokens.size() && tokens[j].is_keyword("NOT") && tokens[j + 1].is_keyword("MATERIALIZED")) j += 2;
            if (j >= tokens.size() || !tokens[j].is("(") || match[j] == std::string::npos) break;
            info.names.insert(name);
            if (depths[i] == 0) info.top_level_bodies.emplace_back(j, match[j]);
            j = match[j] + 1;
            if (j < tokens.size() && tokens[j].is(",")) {
                ++j;
                continue;
            }
            break;
        }
    }
    return info;
}

}  // namespace

bool is_select_statement(std::string_view sql) {
    std::vector<Token> tokens;
    try {
        tokens = tokenize(sql);
    } catch (const ParseError&) {
        return false;
    }
    while (!tokens.empty() && tokens.back().is(";")) tokens.pop_back();
    if (tokens.empty()) return false;
    if (!(tokens[0].is_keyword("SELECT") || tokens[0].is_keyword("WITH"))) return false;
    static const std::unordered_set<std::string> kWriteKeywords = {
        "INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ALTER", "REPLACE",
        "PRAGMA", "ATTACH", "DETACH", "VACUUM", "REINDEX", "ANALYZE",
        "BEGIN", "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE"};
    int depth = 0;
    bool saw_top_select = tokens[0].is_keyword("SELECT");
    for (const Token& tok : tokens) {
        if (tok.is("(")) ++depth;
        if (tok.is(")")) --depth;
        if (depth == 0 && tok.is(";")) return false;  // multiple statements
        if (depth == 0 && tok.kind == TokenKind::Keyword) {
            if (kWriteKeywords.count(util::to_upper(tok.text))) return false;
            if (tok.is_keyword("SELECT")) saw_top_select = true;
        }
    }
    return saw_top_select;
}

SqlFeatures features_of(std::string_view sql) {
    auto tokens = tokenize(sql);
    while (!tokens.empty() && tokens.back().is(";")) tokens.pop_back();
    if (tokens.empty()) throw ParseError("empty SQL statement");

    SqlFeatures f;
    f.n_tokens = static_cast<int>(util::whitespace_token_count(sql));

    const auto match = match_parens(tokens);
    const auto depths = depths_of(tokens);
    const auto cte = collect_cte_info(tokens, depths, match);

    // Selects sitting directly inside a top-level CTE body belong to the CTE,
    // not to the subquery count.
    auto is_cte_body_select = [&](size_t idx) {
        for (auto [open, close] : cte.top_level_bodies) {
            if (idx > open && idx < close && depths[idx] == depths[open] + 1) return true;
        }
        return false;
    };

    for (size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        if (is_name(tok) && i + 1 < tokens.size() && tokens[i + 1].is("(")) {
            ++f.n_functions;
            std::string name = bare_name(tok);
            f.function_names.insert(name);
            if (kAggregates.count(name)) f.has_aggregation = true;
            continue;
        }
        if (tok.kind != TokenKind::Keyword) continue;
        std::string kw = util::to_upper(tok.text);
        if (kw == "JOIN") ++f.n_joins;
        if (kw == "OVER") f.has_window_function = true;
        if (kw == "WITH") f.has_cte = true;
        if (kw == "UNION" || kw == "INTERSECT" || kw == "EXCEPT") f.has_set_operator = true;
        if (kw == "SELECT" && depths[i] > 0 && !is_cte_body_select(i)) f.has_subquery = true;

        // table references: FROM starts a comma-separated source list, JOIN
        // adds exactly one more source
        if (kw == "FROM" || kw == "JOIN") {
            size_t j = i + 1;
            bool list_allowed = (kw == "FROM");
            for (;;) {
                if (j >= tokens.size()) break;
                if (tokens[j].is("(")) {
                    // derived table or nested join; its own FROMs are counted
                    // when the scan reaches them
                    if (match[j] == std::string::npos) break;
                    j = match[j] + 1;
                } else if (is_name(tokens[j])) {
                    bool table_valued_fn = j + 1 < tokens.size() && tokens[j + 1].is("(");
                    if (table_valued_fn) {
                        j = (match[j + 1] == std::string::npos) ? tokens.size() : match[j + 1] + 1;
                    } else {
                        if (!cte.names.count(bare_name(tokens[j]))) ++f.n_tables;
                        ++j;
                    }
                } else {
                    break;
                }
                // optional alias
                if (j < tokens.size() && tokens[j].is_keyword("AS")) ++j;
                if (j < tokens.size() && is_name(tokens[j])) ++j;
                if (list_allowed && j < tokens.size() && tokens[j].is(",") && depths[j] == depths[i]) {
                    ++j;
                    continue;
                }
                break;
            }
        }
    }
    return f;
}

CorpusStats corpus_stats(const std::vector<std::string>& queries) {
    CorpusStats stats;
    std::unordered_set<std::string> skeletons;
    std::unordered_set<std::string> functions;
    double sum_tables = 0, sum_joins = 0, sum_functions = 0, sum_tokens = 0;
    for (const auto& sql : queries) {
        SqlFeatures f;
        std::string skel;
        try {
            f = features_of(sql);
            skel = skeleton_of(sql);
        } catch (const ParseError&) {
            ++stats.n_parse_failures;
            continue;
        }
        ++stats.n_queries;
        sum_tables += f.n_tables;
        sum_joins += f.n_joins;
        sum_functions += f.n_functions;
        sum_tokens += f.n_tokens;
        if (f.has_aggregation) ++stats.n_with_aggregation;
        if (f.has_set_operator) ++stats.n_with_set_operator;
        if (f.has_subquery) ++stats.n_with_subquery;
        if (f.has_window_function) ++stats.n_with_window_function;
        if (f.has_cte) ++stats.n_with_cte;
        skeletons.insert(skel);
        for (const auto& name : f.function_names) functions.insert(name);
    }
    if (stats.n_queries > 0) {
        stats.avg_tables = sum_tables / static_cast<double>(stats.n_queries);
        stats.avg_joins = sum_joins / static_cast<double>(stats.n_queries);
        stats.avg_functions = sum_functions / static_cast<double>(stats.n_queries);
        stats.avg_tokens = sum_tokens / static_cast<double>(stats.n_queries);
    }
    stats.n_unique_skeletons = skeletons.size();
    stats.n_unique_functions = functions.size();
    return stats;
}

std::string format_corpus_stats(const CorpusStats& stats) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    auto row = [&](const std::string& label, auto value) {
        os << std::left << std::setw(28) << label << value << "\n";
    };
    row("# Queries", stats.n_queries);
    row("# Parse failures", stats.n_parse_failures);
    row("# Tables per SQL", stats.avg_tables);
    row("# Joins per SQL", stats.avg_joins);
    row("# Functions per SQL", stats.avg_functions);
    row("# Tokens per SQL", stats.avg_tokens);
    row("# Aggregations", stats.n_with_aggregation);
    row("# Set operators", stats.n_with_set_operator);
    row("# Subqueries", stats.n_with_subquery);
    row("# Window functions", stats.n_with_window_function);
    row("# CTEs", stats.n_with_cte);
    row("# Unique skeletons", stats.n_unique_skeletons);
    row("# Unique functions", stats.n_unique_functions);
    return os.str();
}

}  // namespace sqlsynth::analysis
