#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sqlsynth/ingest/web_table.hpp"
#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::schema {

// Table-count distribution: N(10, 4^2), rounded, clamped into [2, 20].
inline constexpr double kTableCountMean = 10.0;
inline constexpr double kTableCountStddev = 4.0;
inline constexpr int kTableCountMin = 2;
inline constexpr int kTableCountMax = 20;

struct SynthesisParams {
    int k_target = 0;
    double mean = kTableCountMean;
    double stddev = kTableCountStddev;
    int k_min = kTableCountMin;
    int k_max = kTableCountMax;
};

// The raw normal draw, before rounding and clamping.
double sample_table_count_raw(std::mt19937_64& rng);

int sample_table_count(std::mt19937_64& rng);

// One worked example the generation prompt shows: a web table and the full
// response text (scenario plus fenced schema JSON) the model should imitate.
struct Demonstration {
    ingest::WebTable table;
    std::string response;
};

// Loads the two bundled demonstrations. Throws ConfigError when missing.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& demo_dir);

// Task instruction, the two demonstrations, then the seed table, in that
// order, with k interpolated into the instruction.
llm::ChatRequest build_generation_prompt(const ingest::WebTable& table, int k,
                                         const std::string& model_id,
                                         const std::filesystem::path& demo_dir);

struct SchemaParse {
    SchemaDef schema;
    std::vector<std::string> warnings;  // salvage notes: dropped FKs, columns, ...
};

// Pulls the last fenced JSON block out of a model response and lifts it into
// a validated SchemaDef. Dangling foreign keys and duplicate columns are
// dropped with a warning; duplicate tables and a missing block are fatal.
SchemaParse parse_schema(const std::string& llm_text);

llm::ChatRequest build_enhancement_prompt(const SchemaDef& schema, const std::string& model_id);

// Asks the model to add relevant columns and complete missing key
// relationships. The result is accepted only if it preserves every original
// table and column by name and keeps the foreign-key set a superset;
// otherwise (or on parse failure) the original schema is returned and the
// reason appended to `log`.
SchemaDef enhance(const SchemaDef& schema, llm::Gateway& gateway, const std::string& model_id,
                  std::vector<std::string>* log = nullptr);

}  // namespace sqlsynth::schema
