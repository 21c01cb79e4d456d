#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/cot/synth.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/llm/gateway.hpp"

namespace sqlsynth::eval {

struct BenchmarkItem {
    std::string item_id;
    std::filesystem::path db_path;
    std::string question;
    std::optional<std::string> external_knowledge;
    std::string gold_sql;
};

struct BenchmarkSet {
    std::vector<BenchmarkItem> items;        // every gold validated at load
    std::vector<std::string> skipped_items;  // ids whose gold failed to execute
};

// Loads a benchmark directory. Native layout: items.jsonl with item_id /
// db_path / question / external_knowledge / gold_sql, paths relative to the
// directory. Published layouts: dev.json plus database/<db_id>/<db_id>.sqlite
// (fields question + query) or dev_databases/<db_id>/<db_id>.sqlite (fields
// question + SQL + evidence). Items whose gold SQL fails are skipped and
// reported, never scored.
BenchmarkSet load_benchmark(const std::filesystem::path& dir, int64_t timeout_ms);

// Predictions file: JSON object, item_id -> list of candidate SQL strings.
std::map<std::string, std::vector<std::string>> load_predictions(
    const std::filesystem::path& path);

// Execution accuracy for one prediction: run both queries and compare result
// multisets. A failing prediction scores false; a failing gold is a
// benchmark defect -> GoldExecutionError.
bool eval_ex(const std::string& pred_sql, const std::string& gold_sql,
             const std::filesystem::path& db_path, int64_t timeout_ms);

// Executes all candidates and returns the text of the one elected by the
// same grouping and tie rules the reasoning-trace vote uses (largest result
// group, ties toward the lowest index). Every candidate failing -> VoteFailed.
std::string majority_vote_infer(const std::vector<std::string>& candidate_sqls,
                                const std::filesystem::path& db_path, int64_t timeout_ms);

// Houses the per-criterion judge counts.
struct RatingTally {
    uint64_t n_excellent = 0;
    uint64_t n_good = 0;
    uint64_t n_average = 0;
    uint64_t n_poor = 0;

    uint64_t sum() const { return n_excellent + n_good + n_average + n_poor; }
    bool operator==(const RatingTally&) const = default;
};

inline constexpr double kWeightExcellent = 1.0;
inline constexpr double kWeightGood = 0.75;
inline constexpr double kWeightAverage = 0.5;
inline constexpr double kWeightPoor = 0.25;

// Weighted average of the tally; ranges over [0.25, 1.0] and throws
// EmptyTally on an all-zero tally.
double quality_score(const RatingTally& tally);

struct ItemVerdict {
    std::string item_id;
    bool greedy_correct = false;
    bool majority_correct = false;
    std::string majority_sql;  // elected candidate, empty when the vote failed
    std::string note;          // "", "no_prediction", "vote_failed", "gold_failed"
};

struct EvalReport {
    size_t n_items = 0;
    size_t n_scored = 0;    // items with a valid gold at evaluation time
    double ex_greedy = 0;   // fraction of scored items, greedy = first candidate
    double ex_majority = 0; // fraction of scored items, majority vote over candidates
    std::vector<ItemVerdict> verdicts;  // one per item, benchmark order

    nlohmann::json to_json() const;
};

// Scores every item under both inference strategies. Items without a
// prediction or whose vote fails count as wrong; items whose gold fails at
// evaluation time are reported but excluded from the fractions.
EvalReport evaluate(const std::vector<BenchmarkItem>& items,
                    const std::map<std::string, std::vector<std::string>>& predictions,
                    int64_t timeout_ms);

// --- LLM-as-judge scoring ----------------------------------------------------

struct JudgeCriterion {
    std::string name;
    std::string description;
};

struct JudgeAspect {
    std::string name;
    std::string subject;  // what the judge is asked to look at
    std::vector<JudgeCriterion> criteria;
};

// Bundled rubric: exactly four aspects of four criteria each (ConfigError).
std::vector<JudgeAspect> load_rubric(const std::filesystem::path& path);

struct AspectJudgement {
    RatingTally tally;
    size_t n_skipped = 0;  // criteria whose rating could not be parsed
};

// One judge call per aspect; each reply is parsed for one rating line per
// criterion (excellent / good / average / poor, in criterion order).
// Unparsable ratings are skipped and counted, never guessed.
std::map<std::string, AspectJudgement> judge_sample(const cot::DataSample& sample,
                                                    const std::vector<JudgeAspect>& rubric,
                                                    llm::Gateway& gateway,
                                                    const std::string& model_id);

}  // namespace sqlsynth::eval
