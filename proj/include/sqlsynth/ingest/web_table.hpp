#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace sqlsynth::ingest {

// A raw table scraped from the web: the seed input for database synthesis.
struct WebTable {
    std::string table_id;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;  // row-major cells
    std::string source_ref;
};

// Throws PreconditionError when headers are empty or a row length differs
// from the header count.
void validate(const WebTable& table);

void to_json(nlohmann::json& j, const WebTable& t);
void from_json(const nlohmann::json& j, WebTable& t);

// One JSON table per line.
std::vector<WebTable> load_tables_jsonl(const std::filesystem::path& path);
void write_tables_jsonl(const std::filesystem::path& path, const std::vector<WebTable>& tables);

// First line is the header row; quoted fields with "" escapes are handled.
// table_id defaults to the file stem.
WebTable load_table_csv(const std::filesystem::path& path);

// Markdown-ish rendering used inside prompts: header row, separator, data rows.
std::string render_table(const WebTable& table, size_t max_rows);

}  // namespace sqlsynth::ingest
