#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/query/synth.hpp"
#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::question {

// One of the nine phrasing styles; description and example live in a bundled
// data file.
struct StyleSpec {
    std::string name;
    std::string description;
    std::string example;
};

// Loads the style list; throws ConfigError unless all nine styles are present
// in canonical order with text.
std::vector<StyleSpec> load_styles(const std::filesystem::path& path);

// Vague and metaphorical questions carry the literal intent separately.
bool style_needs_knowledge(const std::string& style_name);

// Conversational questions are multi-turn dialogues.
bool style_is_dialogue(const std::string& style_name);

struct DialogueTurn {
    std::string speaker;  // User | Assistant
    std::string text;

    bool operator==(const DialogueTurn&) const = default;
};

struct StylizedQuestion {
    std::string text;  // the question; for dialogues, the flattened turns
    std::string style;
    std::optional<std::string> external_knowledge;
    std::vector<DialogueTurn> dialogue;

    bool operator==(const StylizedQuestion&) const = default;
};

// Field rules: non-empty text, knowledge iff the style needs it, dialogue iff
// the style is conversational. Throws InvariantError.
void validate_question(const StylizedQuestion& q);

void to_json(nlohmann::json& j, const StylizedQuestion& q);
void from_json(const nlohmann::json& j, StylizedQuestion& q);

// A column mention found in a query, resolved against the schema.
struct ColumnRef {
    std::string table;
    std::string column;

    bool operator==(const ColumnRef&) const = default;
};

// Walks the parsed query and resolves every column mention: qualified names
// through table aliases, bare names preferentially against the query's source
// tables, and stars against the tables they cover. Output aliases and CTE
// names are understood and skipped. Unresolvable mentions throw
// ColumnResolutionError. Results are deduplicated in schema order.
std::vector<ColumnRef> referenced_columns(const std::string& sql,
                                          const schema::SchemaDef& schema);

// Assembles the back-translation request: task instruction with the response
// format, the SQL, the referenced columns with their descriptions, and the
// style's description + example.
llm::ChatRequest build_question_prompt(const query::SqlSample& sample,
                                       const schema::SchemaDef& schema,
                                       const StyleSpec& style);

// Extracts the question (plus knowledge or dialogue, per style) from one
// completion. Contract violations throw ParseError; candidates are discarded,
// never repaired.
StylizedQuestion parse_question(const std::string& llm_text, const StyleSpec& style);

// Index of the candidate closest to the semantic center: the one whose mean
// cosine similarity to all other candidates is highest (ties -> lowest
// index). A single candidate selects itself.
size_t select_consistent(const std::vector<StylizedQuestion>& candidates,
                         llm::Gateway& gateway, const std::string& embed_model_id);

struct CandidateSet {
    std::vector<StylizedQuestion> candidates;
    size_t selected_index = 0;

    const StylizedQuestion& selected() const { return candidates[selected_index]; }
};

struct QuestionParams {
    int n_candidates = 8;
    double temperature = 0.8;
    int max_output_tokens = 2048;
    std::string model_id = "default";
    std::string embed_model_id = "all-mpnet-base-v2";
};

struct QuestionStats {
    size_t n_candidates = 0;
    size_t n_parse_failures = 0;
};

// One sample end to end: prompt -> n candidates -> parse -> centroid
// selection. Returns nothing when every candidate fails parsing (the sample
// is then dropped: no question, no pair).
std::optional<CandidateSet> generate_question(const query::SqlSample& sample,
                                              const schema::SchemaDef& schema,
                                              llm::Gateway& gateway,
                                              const StyleSpec& style,
                                              const QuestionParams& params,
                                              QuestionStats* stats = nullptr);

// A query joined with its selected question; the question-stage output row.
struct QuestionedSample {
    query::SqlSample sample;
    StylizedQuestion question;

    bool operator==(const QuestionedSample&) const = default;
};

void to_json(nlohmann::json& j, const QuestionedSample& s);
void from_json(const nlohmann::json& j, QuestionedSample& s);

std::vector<QuestionedSample> load_questioned(const std::filesystem::path& path);
void write_questioned(const std::vector<QuestionedSample>& rows,
                      const std::filesystem::path& path);

}  // namespace sqlsynth::question
