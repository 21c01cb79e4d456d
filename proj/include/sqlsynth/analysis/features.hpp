#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sqlsynth::analysis {

// Structural feature counts for a single query.
struct SqlFeatures {
    int n_tables = 0;     // base-table references in FROM/JOIN, per occurrence
    int n_joins = 0;      // explicit JOIN operators
    int n_functions = 0;  // function-call sites
    int n_tokens = 0;     // whitespace-separated chunks of the raw text
    bool has_aggregation = false;
    bool has_set_operator = false;
    bool has_subquery = false;
    bool has_window_function = false;
    bool has_cte = false;

    // distinct function names used, lowercased (feeds corpus uniqueness)
    std::set<std::string> function_names;
};

// Token-stream structural analysis of one SQLite query.
//
// Table counting is per reference, not per distinct name (a self-join counts
// 2). Derived tables, table-valued functions, and references to CTE names are
// not base tables. Subqueries are nested SELECTs except the body selects of
// top-level CTEs, which are billed to the CTE count instead.
SqlFeatures features_of(std::string_view sql);

// True when the statement's top-level form is SELECT (or WITH ... SELECT)
// and it contains no data- or schema-changing statement at the top level.
bool is_select_statement(std::string_view sql);

struct CorpusStats {
    size_t n_queries = 0;
    size_t n_parse_failures = 0;
    double avg_tables = 0.0;
    double avg_joins = 0.0;
    double avg_functions = 0.0;
    double avg_tokens = 0.0;
    size_t n_with_aggregation = 0;
    size_t n_with_set_operator = 0;
    size_t n_with_subquery = 0;
    size_t n_with_window_function = 0;
    size_t n_with_cte = 0;
    size_t n_unique_skeletons = 0;
    size_t n_unique_functions = 0;
};

CorpusStats corpus_stats(const std::vector<std::string>& queries);

// Fixed-width text table of the stats, one metric per row.
std::string format_corpus_stats(const CorpusStats& stats);

}  // namespace sqlsynth::analysis
