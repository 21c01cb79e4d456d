#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::query {

// One of the four target difficulty levels a prompt can ask for. Criteria
// and example texts live in a bundled data file, not in code.
struct ComplexityLevel {
    std::string name;
    std::string criteria;
    std::string example;
};

// Loads the level list; throws ConfigError unless there are exactly four
// fully populated levels.
std::vector<ComplexityLevel> load_complexity_levels(const std::filesystem::path& path);

// Engine functions offered to the model, each with a usage description.
struct FunctionCatalog {
    struct Entry {
        std::string name;
        std::string description;
    };
    std::vector<Entry> entries;
};

// Throws ConfigError on duplicate names or an empty catalog.
FunctionCatalog load_function_catalog(const std::filesystem::path& path);

// A retained synthetic query plus the labels it was generated under.
struct SqlSample {
    std::string sql_text;
    std::string db_name;
    std::string complexity;  // level name; empty when unlabeled
    int requested_select_count = 1;
    std::string template_text;
    std::string skeleton_text;
    std::string result_fingerprint;  // execution-result digest at retention time

    bool operator==(const SqlSample&) const = default;
};

void to_json(nlohmann::json& j, const SqlSample& s);
void from_json(const nlohmann::json& j, SqlSample& s);

std::vector<SqlSample> load_samples(const std::filesystem::path& path);
void write_samples(const std::vector<SqlSample>& samples, const std::filesystem::path& path);

inline constexpr double kSelectCountP = 0.6;
inline constexpr int kSelectCountCap = 8;

// Geometric draw on {1, 2, ...} with P(k) = 0.6 * 0.4^(k-1), no cap; feeds
// the distribution checks.
int sample_select_count_raw(std::mt19937_64& rng);

// The production sampler: the raw draw capped at 8 so small schemas stay
// satisfiable.
int sample_select_count(std::mt19937_64& rng);

// Uniform level choice; exposed so the frequency contract is testable.
size_t sample_complexity_index(std::mt19937_64& rng, size_t n_levels);

struct PromptParams {
    int n_functions = 4;         // catalog entries shown per prompt
    int n_value_columns = 5;     // (column, values) exhibits per prompt
    int max_values_per_column = 3;
};

// Assembles the generation request: task instruction, schema DDL, sampled
// functions, sampled column values, the level's criteria + example, and the
// numeric select-count constraint, in that order. Values are read from the
// materialized database. Throws EmptyDatabase when the schema has no tables.
llm::ChatRequest build_sql_prompt(const schema::SchemaDef& schema,
                                  const std::filesystem::path& db_path,
                                  const FunctionCatalog& catalog,
                                  const ComplexityLevel& level,
                                  int select_count,
                                  std::mt19937_64& rng,
                                  const PromptParams& params = {});

// Raw model output plus the labels its prompt carried.
struct Candidate {
    std::string sql_text;
    std::string complexity;
    int requested_select_count = 1;
};

struct PostprocessStats {
    size_t n_candidates = 0;
    size_t n_non_select = 0;
    size_t n_exec_failures = 0;
    size_t n_template_dupes = 0;
    size_t n_retained = 0;
};

// Quality pipeline over raw candidates: keep SELECT-form statements, drop
// ones that error or time out against the database, then keep the first
// occurrence per template. Empty output is legal.
std::vector<SqlSample> postprocess(const std::vector<Candidate>& candidates,
                                   const std::string& db_name,
                                   const std::filesystem::path& db_path,
                                   int64_t timeout_ms,
                                   PostprocessStats* stats = nullptr);

std::vector<SqlSample> postprocess(const std::vector<std::string>& candidates,
                                   const std::string& db_name,
                                   const std::filesystem::path& db_path,
                                   int64_t timeout_ms,
                                   PostprocessStats* stats = nullptr);

struct GenerateParams {
    int budget = 300;    // raw candidates drawn before post-processing
    int n_samples = 8;   // completions per request
    double temperature = 0.8;
    int max_output_tokens = 2048;
    int64_t timeout_ms = 30000;
    int max_consecutive_failures = 10;
    uint64_t seed = 0;
    std::string model_id = "default";
    PromptParams prompt;
};

struct GenerateStats {
    size_t n_requests = 0;
    size_t n_raw_candidates = 0;
    size_t n_request_failures = 0;
    PostprocessStats post;
};

// Draws prompts with freshly sampled complexity / select-count until the
// candidate budget is met, then post-processes. A run of consecutive request
// failures beyond the limit abandons this database with StageError.
std::vector<SqlSample> generate_for_db(const schema::SchemaDef& schema,
                                       const std::filesystem::path& db_path,
                                       llm::Gateway& gateway,
                                       const std::vector<ComplexityLevel>& levels,
                                       const FunctionCatalog& catalog,
                                       const GenerateParams& params,
                                       GenerateStats* stats = nullptr);

// The last ``` block whose tag is empty, "sql", or "sqlite"; fences and tag
// stripped, body trimmed.
std::optional<std::string> last_fenced_sql(const std::string& text);

// One completion -> one query: last fenced block when present, else the
// whole text trimmed.
std::string extract_sql(const std::string& llm_text);

}  // namespace sqlsynth::query
