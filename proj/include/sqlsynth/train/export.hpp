#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/cot/synth.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::train {

// Tuning knobs for question-relevant value matching. A stored text value
// matches when its lowercase form shares a common substring with the
// lowercase question of length >= max(floor, ratio * value length); the
// floor suppresses stop-word false positives.
struct MatchParams {
    size_t floor = 4;
    double ratio = 0.8;
    size_t per_column = 2;
};

// The two most frequent distinct non-NULL values of the column, rendered as
// SQL literals; frequency ties break lexicographically on the rendering.
// Fewer than two distinct values -> all of them.
std::vector<std::string> representative_values(const std::filesystem::path& db_path,
                                               const std::string& table,
                                               const std::string& column);

struct ValueMatch {
    std::string table;
    std::string column;
    std::string value;      // raw text, unquoted
    size_t match_len = 0;   // longest common substring with the question

    bool operator==(const ValueMatch&) const = default;
};

// Scans every text value in the database for question overlap; at most
// per_column matches per column, longest match first.
std::vector<ValueMatch> relevant_values(const std::string& question_text,
                                        const std::filesystem::path& db_path,
                                        const MatchParams& params = {});

// One column's enrichment, mirrored in the comment the rendering attaches.
struct ColumnComment {
    std::string table;
    std::string column;
    std::string description;
    std::vector<std::string> representative;  // SQL literals
    std::vector<std::string> matched;          // SQL literals

    bool operator==(const ColumnComment&) const = default;
};

struct SchemaRendering {
    std::string ddl_text;
    std::vector<ColumnComment> comments;  // one per column, schema order
};

// CREATE TABLE statements in schema order with one trailing "--" comment per
// column carrying its description, representative values, and question
// matches when present. The output stays a parsable DDL document.
SchemaRendering render_schema(const schema::SchemaDef& schema,
                              const std::filesystem::path& db_path,
                              const std::string& question_text,
                              const MatchParams& params = {});

struct TrainExample {
    std::string input_text;   // schema rendering + question (+ knowledge)
    std::string output_text;  // reasoning trace ending in the SQL
    nlohmann::json meta = nlohmann::json::object();

    bool operator==(const TrainExample&) const = default;
    nlohmann::json to_json() const;
    static TrainExample from_json(const nlohmann::json& j);
};

// Builds the training pair for one data sample. Throws InvariantError when
// the sample's reasoning trace does not end in its SQL.
TrainExample make_example(const cot::DataSample& sample, const schema::SchemaDef& schema,
                          const MatchParams& params = {});

struct ExportReport {
    size_t n_input = 0;
    size_t n_written = 0;
    size_t n_gated = 0;                  // samples failing the final-SQL invariant
    std::vector<std::string> gate_log;   // one reason per gated sample
};

// Writes one TrainExample JSON line per sample that passes the invariant
// gate; gated samples are counted and logged, never silently dropped.
ExportReport export_examples(const std::vector<cot::DataSample>& samples,
                             const std::map<std::string, schema::SchemaDef>& schemas,
                             const std::filesystem::path& out_path,
                             const MatchParams& params = {});

std::vector<TrainExample> load_examples(const std::filesystem::path& path);

}  // namespace sqlsynth::train
