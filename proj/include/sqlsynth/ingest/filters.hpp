#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sqlsynth/ingest/web_table.hpp"
#include "sqlsynth/llm/gateway.hpp"

namespace sqlsynth::ingest {

// Accounting for one filtering run. Every input table lands either in
// kept_count or in exactly one rejection bucket (its first failing stage).
struct FilterReport {
    size_t input_count = 0;
    size_t kept_count = 0;
    std::map<std::string, size_t> rejections;  // stage -> count
    std::vector<std::pair<std::string, std::string>> per_table_verdicts;  // (id, stage|"kept")
};

void to_json(nlohmann::json& j, const FilterReport& r);

// English check: weighted blend of Latin-script character ratio and English
// stop-word rate over headers plus the first row. Deterministic by design.
bool filter_language(const WebTable& table);
double english_score(const WebTable& table);  // exposed for threshold tests

// Keep tables with at least 5 columns and at least 5 rows.
bool filter_size(const WebTable& table);

// Normalized header key: lowercased, whitespace-collapsed, sorted.
std::string header_key(const WebTable& table);

// One table per normalized header key; first occurrence wins.
std::vector<WebTable> dedup_headers(const std::vector<WebTable>& tables);

llm::ChatRequest build_judge_prompt(const WebTable& table, const std::string& model_id);

// Binary semantic-richness verdict from the model. Anything that is not a
// clear yes parses as a rejection.
bool judge_semantics(const WebTable& table, llm::Gateway& gateway, const std::string& model_id);

struct IngestResult {
    std::vector<WebTable> kept;
    FilterReport report;
};

// Full pipeline in fixed stage order: language, size, header dedup, semantic
// judgment. Judging parallelizes across tables; output order follows input.
IngestResult run_ingest(const std::vector<WebTable>& tables, llm::Gateway& gateway,
                        const std::string& model_id, size_t workers = 4);

}  // namespace sqlsynth::ingest
