#include "sqlsynth/eval/quality.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/exec/vote.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::eval {

namespace {

std::string json_id(const nlohmann::json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<int64_t>());
    return value.dump();
}

std::filesystem::path benchmark_db(const std::filesystem::path& dir,
                                   const std::string& db_id) {
    for (const char* root : {"database", "dev_databases", "databases", "test_database"}) {
        auto candidate = dir / root / db_id / (db_id + ".sqlite");
        if (std::filesystem::exists(candidate)) return candidate;
    }
    throw ConfigError("no database file for db_id " + db_id + " under " + dir.string());
}

std::vector<BenchmarkItem> load_native(const std::filesystem::path& dir) {
    std::vector<BenchmarkItem> items;
    for (const auto& line : util::read_lines(dir / "items.jsonl")) {
        if (util::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        BenchmarkItem item;
        item.item_id = json_id(j.at("item_id"));
        std::filesystem::path db = j.at("db_path").get<std::string>();
        item.db_path = db.is_absolute() ? db : dir / db;
        item.question = j.at("question").get<std::string>();
        if (j.contains("external_knowledge") && j["external_knowledge"].is_string() &&
            !j["external_knowledge"].get<std::string>().empty()) {
            item.external_knowledge = j["external_knowledge"].get<std::string>();
        }
        item.gold_sql = j.at("gold_sql").get<std::string>();
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<BenchmarkItem> load_published(const std::filesystem::path& dir) {
    auto j = nlohmann::json::parse(util::read_file(dir / "dev.json"));
    if (!j.is_array()) throw ConfigError("dev.json must hold an array of items");

    std::vector<BenchmarkItem> items;
    for (size_t i = 0; i < j.size(); ++i) {
        const auto& entry = j[i];
        BenchmarkItem item;
        item.question = entry.at("question").get<std::string>();
        item.db_path = benchmark_db(dir, entry.at("db_id").get<std::string>());
        if (entry.contains("SQL")) {
            // BIRD layout: question_id, evidence, SQL
            item.gold_sql = entry.at("SQL").get<std::string>();
            item.item_id = entry.contains("question_id") ? json_id(entry["question_id"])
                                                         : std::to_string(i);
            if (entry.contains("evidence") && entry["evidence"].is_string() &&
                !entry["evidence"].get<std::string>().empty()) {
                item.external_knowledge = entry["evidence"].get<std::string>();
            }
        } else {
            // Spider layout: question + query, no ids
            item.gold_sql = entry.at("query").get<std::string>();
            item.item_id = std::to_string(i);
        }
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace

BenchmarkSet load_benchmark(const std::filesystem::path& dir, int64_t timeout_ms) {
    std::vector<BenchmarkItem> raw;
    if (std::filesystem::exists(dir / "items.jsonl")) {
        raw = load_native(dir);
    } else if (std::filesystem::exists(dir / "dev.json")) {
        raw = load_published(dir);
    } else {
        throw ConfigError("no items.jsonl or dev.json in " + dir.string());
    }

    std::vector<bool> gold_ok(raw.size(), false);
    util::parallel_for(raw.size(), 8, [&](size_t i) {
        gold_ok[i] = exec::execute(raw[i].db_path, raw[i].gold_sql, timeout_ms).ok();
    });

    BenchmarkSet set;
    for (size_t i = 0; i < raw.size(); ++i) {
        if (gold_ok[i])
            set.items.push_back(std::move(raw[i]));
        else
            set.skipped_items.push_back(raw[i].item_id);
    }
    return set;
}

std::map<std::string, std::vector<std::string>> load_predictions(
    const std::filesystem::path& path) {
    auto j = nlohmann::json::parse(util::read_file(path));
    if (!j.is_object()) throw ConfigError("predictions file must map item_id to SQL lists");
    std::map<std::string, std::vector<std::string>> predictions;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            predictions[key] = {value.get<std::string>()};
        } else {
            predictions[key] = value.get<std::vector<std::string>>();
        }
    }
    return predictions;
}

bool eval_ex(const std::string& pred_sql, const std::string& gold_sql,
             const std::filesystem::path& db_path, int64_t timeout_ms) {
    auto gold = exec::execute(db_path, gold_sql, timeout_ms);
    if (!gold.ok()) {
        throw GoldExecutionError("gold query failed on " + db_path.string() + ": " +
                                 gold.error_text);
    }
    auto pred = exec::execute(db_path, pred_sql, timeout_ms);
    if (!pred.ok()) return false;
    return exec::same_result(pred, gold);
}

std::string majority_vote_infer(const std::vector<std::string>& candidate_sqls,
                                const std::filesystem::path& db_path, int64_t timeout_ms) {
    if (candidate_sqls.empty()) throw PreconditionError("vote needs at least one candidate");

    std::vector<exec::ExecOutcome> outcomes(candidate_sqls.size());
    util::parallel_for(candidate_sqls.size(), 8, [&](size_t i) {
        outcomes[i] = exec::execute(db_path, candidate_sqls[i], timeout_ms);
    });

    try {
        return candidate_sqls[exec::majority_vote(outcomes).winner_index];
    } catch (const EmptyTally&) {
        throw VoteFailed("every candidate failed execution");
    }
}

double quality_score(const RatingTally& tally) {
    uint64_t n = tally.sum();
    if (n == 0) throw EmptyTally("no ratings to score");
    double weighted = kWeightExcellent * tally.n_excellent + kWeightGood * tally.n_good +
                      kWeightAverage * tally.n_average + kWeightPoor * tally.n_poor;
    return weighted / static_cast<double>(n);
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json verdict_rows = nlohmann::json::array();
    for (const auto& v : verdicts) {
        verdict_rows.push_back({{"item_id", v.item_id},
                                {"greedy_correct", v.greedy_correct},
                                {"majority_correct", v.majority_correct},
                                {"majority_sql", v.majority_sql},
                                {"note", v.note}});
    }
    return nlohmann::json{{"n_items", n_items},
                          {"n_scored", n_scored},
                          {"ex_greedy", ex_greedy},
                          {"ex_majority", ex_majority},
                          {"verdicts", verdict_rows}};
}

EvalReport evaluate(const std::vector<BenchmarkItem>& items,
                    const std::map<std::string, std::vector<std::string>>& predictions,
                    int64_t timeout_ms) {
    EvalReport report;
    report.n_items = items.size();
    report.verdicts.resize(items.size());

    util::parallel_for(items.size(), 8, [&](size_t i) {
        const auto& item = items[i];
        auto& verdict = report.verdicts[i];
        verdict.item_id = item.item_id;

        auto it = predictions.find(item.item_id);
        if (it == predictions.end() || it->second.empty()) {
            verdict.note = "no_prediction";
            return;
        }
        const auto& candidates = it->second;
        try {
            verdict.greedy_correct =
                eval_ex(candidates.front(), item.gold_sql, item.db_path, timeout_ms);
            try {
                verdict.majority_sql =
                    majority_vote_infer(candidates, item.db_path, timeout_ms);
                verdict.majority_correct =
                    eval_ex(verdict.majority_sql, item.gold_sql, item.db_path, timeout_ms);
            } catch (const VoteFailed&) {
                verdict.note = "vote_failed";
            }
        } catch (const GoldExecutionError&) {
            verdict.note = "gold_failed";
            verdict.greedy_correct = false;
            verdict.majority_correct = false;
        }
    });

    size_t scored = 0, greedy_hits = 0, majority_hits = 0;
    for (const auto& verdict : report.verdicts) {
        if (verdict.note == "gold_failed") continue;
        ++scored;
        if (verdict.greedy_correct) ++greedy_hits;
        if (verdict.majority_correct) ++majority_hits;
    }
    report.n_scored = scored;
    if (scored > 0) {
        report.ex_greedy = static_cast<double>(greedy_hits) / static_cast<double>(scored);
        report.ex_majority =
            static_cast<double>(majority_hits) / static_cast<double>(scored);
    }
    return report;
}

std::vector<JudgeAspect> load_rubric(const std::filesystem::path& path) {
    auto j = nlohmann::json::parse(util::read_file(path));
    std::vector<JudgeAspect> rubric;
    for (const auto& aspect_json : j.at("aspects")) {
        JudgeAspect aspect;
        aspect.name = aspect_json.at("name").get<std::string>();
        aspect.subject = aspect_json.at("subject").get<std::string>();
        for (const auto& criterion_json : aspect_json.at("criteria")) {
            aspect.criteria.push_back({criterion_json.at("name").get<std::string>(),
                                       criterion_json.at("description").get<std::string>()});
        }
        if (aspect.criteria.size() != 4) {
            throw ConfigError("aspect " + aspect.name + " must carry exactly 4 criteria");
        }
        rubric.push_back(std::move(aspect));
    }
    if (rubric.size() != 4) throw ConfigError("rubric must carry exactly 4 aspects");
    return rubric;
}

namespace {

std::string schema_dump(const std::filesystem::path& db_path) {
    auto outcome = exec::execute(db_path,
                                 "SELECT sql FROM sqlite_master WHERE type = 'table' AND "
                                 "name NOT LIKE 'sqlite!_%' ESCAPE '!' ORDER BY name",
                                 5000);
    if (!outcome.ok()) return "-- schema unavailable --";
    std::string ddl;
    for (const auto& row : outcome.rows) {
        if (auto text = row[0].text_value()) {
            ddl += *text;
            ddl += ";\n";
        }
    }
    return ddl.empty() ? "-- schema unavailable --" : ddl;
}

// Rating words recognized on a "Rating:" line; anything else is skipped.
std::optional<int> rating_level(const std::string& word) {
    if (word == "excellent") return 0;
    if (word == "good") return 1;
    if (word == "average") return 2;
    if (word == "poor") return 3;
    return std::nullopt;
}

std::vector<std::optional<int>> parse_ratings(const std::string& text, size_t expected) {
    std::vector<std::optional<int>> ratings;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line) && ratings.size() < expected) {
        std::string stripped = util::trim(line);
        size_t skip = 0;
        while (skip < stripped.size() &&
               (stripped[skip] == '#' || stripped[skip] == '*' || stripped[skip] == '-' ||
                stripped[skip] == '>' || stripped[skip] == ' ')) {
            ++skip;
        }
        stripped = stripped.substr(skip);
        if (!util::starts_with_ci(stripped, "rating:")) continue;

        std::string rest = stripped.substr(7);
        std::string word;
        for (char c : rest) {
            if (std::isalpha(static_cast<unsigned char>(c))) {
                word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else if (!word.empty()) {
                break;
            }
        }
        ratings.push_back(rating_level(word));
    }
    ratings.resize(expected, std::nullopt);  // missing lines -> skipped criteria
    return ratings;
}

}  // namespace

std::map<std::string, AspectJudgement> judge_sample(const cot::DataSample& sample,
                                                    const std::vector<JudgeAspect>& rubric,
                                                    llm::Gateway& gateway,
                                                    const std::string& model_id) {
    std::string ddl = schema_dump(sample.db_path);

    std::map<std::string, AspectJudgement> judgements;
    for (const auto& aspect : rubric) {
        std::ostringstream body;
        body << "## Task Instruction\n"
             << "You are reviewing one synthetic text-to-SQL training sample. Rate "
             << aspect.subject << " against each criterion below. For every criterion, in "
             << "order, output a block of exactly this shape:\n"
             << "### <criterion name>\n"
             << "Rating: one of excellent, good, average, poor\n"
             << "Explanation: one or two sentences.\n\n";
        body << "## Database Schema\n\n" << ddl << "\n";
        body << "## Question\n\n" << sample.question << "\n";
        if (!sample.external_knowledge.empty())
            body << "\nExternal knowledge: " << sample.external_knowledge << "\n";
        body << "\n## SQL Query\n\n```sql\n" << sample.sql << "\n```\n";
        body << "\n## Reasoning Solution\n\n" << sample.cot << "\n";
        body << "\n## Criteria\n";
        for (const auto& criterion : aspect.criteria) {
            body << "- " << criterion.name << ": " << criterion.description << "\n";
        }

        llm::ChatRequest request;
        request.model_id = model_id;
        request.messages = {
            {"system", "You are an exacting data-quality reviewer for text-to-SQL corpora."},
            {"user", body.str()}};

        auto response = gateway.complete(request);
        std::string text = response.texts.empty() ? std::string() : response.texts.front();

        AspectJudgement judgement;
        for (const auto& rating : parse_ratings(text, aspect.criteria.size())) {
            if (!rating) {
                ++judgement.n_skipped;
                continue;
            }
            switch (*rating) {
                case 0: ++judgement.tally.n_excellent; break;
                case 1: ++judgement.tally.n_good; break;
                case 2: ++judgement.tally.n_average; break;
                case 3: ++judgement.tally.n_poor; break;
            }
        }
        judgements[aspect.name] = judgement;
    }
    return judgements;
}

}  // namespace sqlsynth::eval
