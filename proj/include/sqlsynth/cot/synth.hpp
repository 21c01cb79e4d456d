#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/question/synth.hpp"
#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::cot {

// One sampled reasoning trace plus the SQL pulled from its last fenced block
// and the outcome of running that SQL.
struct CotCandidate {
    std::string cot_text;
    std::optional<std::string> extracted_sql;
    exec::ExecOutcome exec;
};

// Outcome of the execution-grouped vote over a candidate set.
struct CotResult {
    CotCandidate chosen;
    size_t chosen_index = 0;        // index into the original candidate list
    std::string final_sql;          // == chosen.extracted_sql
    std::string result_fingerprint; // fingerprint of the winning group
    bool corrected = false;         // winning result differs from the original query's
    size_t group_size = 0;
    size_t valid_count = 0;         // candidates that survived extraction + execution
};

// Terminal dataset record; one line of the output JSONL.
struct DataSample {
    std::string db_name;
    std::string db_path;
    std::string question;            // flattened text, dialogue turns included
    std::string external_knowledge;  // empty when the style carries none
    std::string style;
    std::string sql;
    std::string cot;
    std::string complexity;
    nlohmann::json provenance = nlohmann::json::object();

    bool operator==(const DataSample& other) const;
    nlohmann::json to_json() const;
    static DataSample from_json(const nlohmann::json& j);
};

std::vector<DataSample> load_data_samples(const std::filesystem::path& path);
void write_data_samples(const std::vector<DataSample>& rows,
                        const std::filesystem::path& path);

// Prompt with three sections: the task instruction, CREATE TABLE statements
// for every table, and the question/SQL pair (external knowledge included
// when the question carries it). Asks for stepwise reasoning that ends with
// the complete SQL in a fenced block.
llm::ChatRequest build_cot_prompt(const schema::SchemaDef& schema,
                                  const question::StylizedQuestion& q,
                                  const std::string& sql);

// Last fenced SQL block of a reasoning trace; absent when none closes.
std::optional<std::string> extract_final_sql(const std::string& cot_text);

// Executes every candidate's extracted SQL against db_path (concurrently, one
// connection each), recording the outcome on the candidate, then discards
// extraction failures and execution errors, groups survivors by result
// fingerprint, and picks the largest group; ties go to the group holding the
// lowest candidate index, and the chosen candidate is that lowest index.
// When original_fingerprint is non-empty the corrected flag records whether
// the winning result differs from it. Every candidate invalid -> VoteFailed.
CotResult majority_select(std::vector<CotCandidate>& candidates,
                          const std::filesystem::path& db_path, int64_t timeout_ms,
                          const std::string& original_fingerprint = "");

// Assembles the terminal record for one questioned sample. Re-executes the
// voted SQL as a final gate (failure -> InvariantError) and persists the
// corrected flag and vote sizes in provenance.
DataSample finalize_sample(const question::QuestionedSample& qs,
                           const std::filesystem::path& db_path,
                           const CotResult& vote, int64_t timeout_ms);

struct CotParams {
    int n_candidates = 8;
    double temperature = 0.8;
    int max_output_tokens = 4096;
    std::string model_id = "default";
    int64_t exec_timeout_ms = 30000;
};

struct CotStats {
    size_t n_candidates = 0;
    size_t n_no_final_sql = 0;   // traces without a fenced SQL block
    size_t n_exec_failures = 0;  // extracted SQL that errored or timed out
};

// Samples n_candidates reasoning traces for the pair, votes, and finalizes.
// Returns nullopt when the vote fails (sample dropped downstream).
std::optional<DataSample> generate_cot(const question::QuestionedSample& qs,
                                       const schema::SchemaDef& schema,
                                       const std::filesystem::path& db_path,
                                       llm::Gateway& gateway, const CotParams& params,
                                       CotStats* stats = nullptr);

// Correction audit: for sampled (question, original SQL, voted SQL) pairs,
// asks a judge model which query answers the question better and counts how
// often the voted one wins.
struct CorrectionPair {
    std::string question;
    std::string original_sql;
    std::string final_sql;
};

struct CorrectionAudit {
    size_t n_audited = 0;
    size_t n_prefer_final = 0;
    size_t n_unparsable = 0;
};

CorrectionAudit audit_corrections(const std::vector<CorrectionPair>& pairs,
                                  llm::Gateway& gateway, const std::string& model_id);

}  // namespace sqlsynth::cot
