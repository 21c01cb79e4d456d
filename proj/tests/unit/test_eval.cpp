#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "sqlsynth/cot/synth.hpp"
#include "sqlsynth/eval/quality.hpp"
#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/llm/provider.hpp"
#include "support/test_db.hpp"

using namespace sqlsynth;
using namespace sqlsynth::eval;

namespace {

const std::filesystem::path kDataDir = std::filesystem::path(SQLSYNTH_SOURCE_DIR) / "data";

std::filesystem::path league_db() {
    static auto path = testing::make_db(
        testing::test_dir("eval") / "league.db",
        "CREATE TABLE teams (team_id INTEGER PRIMARY KEY, name TEXT, pts INTEGER);"
        "INSERT INTO teams VALUES (1, 'reds', 10), (2, 'blues', 7), (3, 'greens', 7);"
        "CREATE TABLE players (player_id INTEGER PRIMARY KEY, team_id INTEGER, "
        "goals INTEGER);"
        "INSERT INTO players VALUES (1, 1, 4), (2, 1, 2), (3, 2, 5);");
    return path;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << text;
}

const std::string kGoldNames = "SELECT name FROM teams ORDER BY name";
const std::string kWrongPts = "SELECT pts FROM teams ORDER BY pts";

}  // namespace

TEST_CASE("execution accuracy compares result multisets") {
    auto db = league_db();

    SUBCASE("identical query text scores true") {
        CHECK(eval_ex(kGoldNames, kGoldNames, db, 5000));
    }
    SUBCASE("an extra selected column scores false") {
        CHECK_FALSE(eval_ex("SELECT name, pts FROM teams ORDER BY name", kGoldNames, db,
                            5000));
    }
    SUBCASE("syntactically different but equivalent queries score true") {
        // hand-check on this 3-row db: both joins pair reds with 4 and 2,
        // blues with 5, so the result multisets coincide
        std::string gold = "SELECT t.name, p.goals FROM teams t JOIN players p "
                           "ON t.team_id = p.team_id";
        std::string pred = "SELECT t.name, p.goals FROM players p JOIN teams t "
                           "ON p.team_id = t.team_id";
        auto gold_out = exec::execute(db, gold, 5000);
        auto pred_out = exec::execute(db, pred, 5000);
        REQUIRE(gold_out.ok());
        REQUIRE(pred_out.ok());
        REQUIRE(exec::same_result(pred_out, gold_out));  // oracle
        CHECK(eval_ex(pred, gold, db, 5000));
    }
    SUBCASE("row order never matters") {
        CHECK(eval_ex("SELECT name FROM teams ORDER BY pts DESC", kGoldNames, db, 5000));
    }
    SUBCASE("failing predictions score false") {
        CHECK_FALSE(eval_ex("SELECT wingspan FROM teams", kGoldNames, db, 5000));
    }
    SUBCASE("failing gold is a benchmark defect") {
        CHECK_THROWS_AS(eval_ex(kGoldNames, "SELECT wingspan FROM teams", db, 5000),
                        GoldExecutionError);
    }
}

TEST_CASE("majority-vote inference elects the largest result group") {
    auto db = league_db();

    SUBCASE("five of eight sharing a result win") {
        std::vector<std::string> candidates = {
            kWrongPts,
            kGoldNames,
            "SELECT name FROM teams ORDER BY name ASC",  // same result as kGoldNames
            kGoldNames,
            kWrongPts,
            "SELECT name FROM teams",                    // unordered, same multiset
            kGoldNames,
            "SELECT name FROM teams ORDER BY team_id",
        };
        auto chosen = majority_vote_infer(candidates, db, 5000);
        CHECK(chosen == kGoldNames);  // index 1, lowest member of the 6-strong group

        auto chosen_out = exec::execute(db, chosen, 5000);
        auto gold_out = exec::execute(db, kGoldNames, 5000);
        CHECK(exec::same_result(chosen_out, gold_out));
    }
    SUBCASE("two singleton groups tie toward index 0") {
        std::vector<std::string> candidates = {kWrongPts, kGoldNames};
        CHECK(majority_vote_infer(candidates, db, 5000) == kWrongPts);
    }
    SUBCASE("all candidates failing is a failed vote") {
        std::vector<std::string> candidates = {"SELECT wingspan FROM teams",
                                               "SELECT * FROM ghosts"};
        CHECK_THROWS_AS(majority_vote_infer(candidates, db, 5000), VoteFailed);
        std::vector<std::string> none;
        CHECK_THROWS_AS(majority_vote_infer(none, db, 5000), PreconditionError);
    }
    SUBCASE("inference vote agrees with the reasoning-trace vote") {
        std::vector<std::string> sqls = {kWrongPts, kGoldNames, kGoldNames, kWrongPts};
        std::vector<cot::CotCandidate> traces;
        for (const auto& sql : sqls) {
            cot::CotCandidate candidate;
            candidate.cot_text = "t\n```sql\n" + sql + "\n```\n";
            candidate.extracted_sql = sql;
            traces.push_back(candidate);
        }
        auto trace_vote = cot::majority_select(traces, db, 5000);
        CHECK(majority_vote_infer(sqls, db, 5000) == sqls[trace_vote.chosen_index]);
    }
}

TEST_CASE("quality score is the pinned weighted average") {
    CHECK(quality_score({1, 1, 1, 1}) == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(quality_score({10, 0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(quality_score({0, 0, 0, 7}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(quality_score({0, 0, 0, 0}), EmptyTally);
}

TEST_CASE("quality score matches the formula and stays in bounds") {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 1000; ++round) {
        RatingTally tally{rng() % 6, rng() % 6, rng() % 6, rng() % 6};
        if (tally.sum() == 0) tally.n_average = 1;

        double expected = (1.0 * tally.n_excellent + 0.75 * tally.n_good +
                           0.5 * tally.n_average + 0.25 * tally.n_poor) /
                          static_cast<double>(tally.sum());
        double score = quality_score(tally);
        CHECK(score == doctest::Approx(expected).epsilon(1e-12));
        CHECK(score >= 0.25);
        CHECK(score <= 1.0);
    }
}

TEST_CASE("promoting any single rating strictly raises the score") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 200; ++round) {
        RatingTally tally{rng() % 4, rng() % 4, rng() % 4, rng() % 4};
        if (tally.sum() == 0) tally.n_poor = 1;
        double base = quality_score(tally);

        if (tally.n_poor > 0) {
            RatingTally up = tally;
            --up.n_poor;
            ++up.n_average;
            CHECK(quality_score(up) > base);
        }
        if (tally.n_average > 0) {
            RatingTally up = tally;
            --up.n_average;
            ++up.n_good;
            CHECK(quality_score(up) > base);
        }
        if (tally.n_good > 0) {
            RatingTally up = tally;
            --up.n_good;
            ++up.n_excellent;
            CHECK(quality_score(up) > base);
        }
    }
}

TEST_CASE("benchmark loaders cover the native and published layouts") {
    auto db = league_db();

    SUBCASE("native jsonl layout with gold validation") {
        auto dir = testing::test_dir("eval_native");
        write_text(dir / "items.jsonl",
                   nlohmann::json{{"item_id", "a"},
                                  {"db_path", db.string()},
                                  {"question", "Team names?"},
                                  {"gold_sql", kGoldNames}}
                           .dump() +
                       "\n" +
                       nlohmann::json{{"item_id", "b"},
                                      {"db_path", db.string()},
                                      {"question", "Big teams?"},
                                      {"external_knowledge", "Big means over 8 points."},
                                      {"gold_sql", "SELECT name FROM teams WHERE pts > 8"}}
                           .dump() +
                       "\n" +
                       nlohmann::json{{"item_id", "c"},
                                      {"db_path", db.string()},
                                      {"question", "Broken gold"},
                                      {"gold_sql", "SELECT wingspan FROM teams"}}
                           .dump() +
                       "\n");

        auto set = load_benchmark(dir, 5000);
        REQUIRE(set.items.size() == 2);
        CHECK(set.items[0].item_id == "a");
        CHECK(!set.items[0].external_knowledge.has_value());
        CHECK(set.items[1].external_knowledge ==
              std::optional<std::string>("Big means over 8 points."));
        REQUIRE(set.skipped_items.size() == 1);
        CHECK(set.skipped_items[0] == "c");
    }
    SUBCASE("spider-style dev.json with a database tree") {
        auto dir = testing::test_dir("eval_spider");
        testing::make_db(dir / "database" / "league" / "league.sqlite",
                         "CREATE TABLE teams (name TEXT);"
                         "INSERT INTO teams VALUES ('reds');");
        write_text(dir / "dev.json",
                   nlohmann::json::array({{{"db_id", "league"},
                                           {"question", "Team names?"},
                                           {"query", "SELECT name FROM teams"}}})
                       .dump());

        auto set = load_benchmark(dir, 5000);
        REQUIRE(set.items.size() == 1);
        CHECK(set.items[0].item_id == "0");
        CHECK(set.items[0].gold_sql == "SELECT name FROM teams");
        CHECK(!set.items[0].external_knowledge.has_value());
    }
    SUBCASE("bird-style dev.json carries evidence and question ids") {
        auto dir = testing::test_dir("eval_bird");
        testing::make_db(dir / "dev_databases" / "league" / "league.sqlite",
                         "CREATE TABLE teams (name TEXT, pts INTEGER);"
                         "INSERT INTO teams VALUES ('reds', 10);");
        write_text(dir / "dev.json",
                   nlohmann::json::array(
                       {{{"question_id", 7},
                         {"db_id", "league"},
                         {"question", "Which teams are big?"},
                         {"evidence", "Big means pts over 8."},
                         {"SQL", "SELECT name FROM teams WHERE pts > 8"}}})
                       .dump());

        auto set = load_benchmark(dir, 5000);
        REQUIRE(set.items.size() == 1);
        CHECK(set.items[0].item_id == "7");
        CHECK(set.items[0].external_knowledge ==
              std::optional<std::string>("Big means pts over 8."));
    }
    SUBCASE("directories without a recognized layout are rejected") {
        CHECK_THROWS_AS(load_benchmark(testing::test_dir("eval_none"), 5000), ConfigError);
    }
}

TEST_CASE("prediction files map item ids to candidate lists") {
    auto dir = testing::test_dir("eval_preds");
    write_text(dir / "preds.json",
               nlohmann::json{{"a", {"SELECT 1", "SELECT 2"}}, {"b", "SELECT 3"}}.dump());

    auto predictions = load_predictions(dir / "preds.json");
    REQUIRE(predictions.size() == 2);
    CHECK(predictions["a"] == std::vector<std::string>{"SELECT 1", "SELECT 2"});
    CHECK(predictions["b"] == std::vector<std::string>{"SELECT 3"});
}

TEST_CASE("evaluation reports both strategies with per-item verdicts") {
    auto db = league_db();
    std::vector<BenchmarkItem> items;
    for (const std::string& id : {"a", "b", "c", "d"}) {
        BenchmarkItem item;
        item.item_id = id;
        item.db_path = db;
        item.question = "Team names?";
        item.gold_sql = kGoldNames;
        items.push_back(item);
    }

    std::map<std::string, std::vector<std::string>> predictions = {
        {"a", {kGoldNames}},
        {"b", {kWrongPts, "SELECT name FROM teams", "SELECT name FROM teams ORDER BY 1"}},
        {"c", {"SELECT wingspan FROM teams"}},
    };

    auto report = evaluate(items, predictions, 5000);

    CHECK(report.n_items == 4);
    CHECK(report.n_scored == 4);
    CHECK(report.ex_greedy == doctest::Approx(0.25));
    CHECK(report.ex_majority == doctest::Approx(0.5));
    REQUIRE(report.verdicts.size() == 4);

    CHECK(report.verdicts[0].greedy_correct);
    CHECK(report.verdicts[0].majority_correct);
    CHECK_FALSE(report.verdicts[1].greedy_correct);  // wrong first candidate
    CHECK(report.verdicts[1].majority_correct);      // two matching candidates outvote it
    CHECK_FALSE(report.verdicts[2].greedy_correct);
    CHECK(report.verdicts[2].note == "vote_failed");
    CHECK(report.verdicts[3].note == "no_prediction");

    // accounting identity: the greedy fraction is the mean of per-item checks
    size_t hits = 0;
    for (const auto& item : items) {
        auto it = predictions.find(item.item_id);
        if (it == predictions.end() || it->second.empty()) continue;
        if (eval_ex(it->second.front(), item.gold_sql, item.db_path, 5000)) ++hits;
    }
    CHECK(report.ex_greedy ==
          doctest::Approx(static_cast<double>(hits) / static_cast<double>(items.size())));

    auto j = report.to_json();
    CHECK(j["n_items"] == 4);
    CHECK(j["verdicts"].size() == 4);
}

TEST_CASE("the bundled rubric holds four aspects of four criteria") {
    auto rubric = load_rubric(kDataDir / "judge_rubric.json");
    REQUIRE(rubric.size() == 4);
    CHECK(rubric[0].name == "database");
    CHECK(rubric[1].name == "question");
    CHECK(rubric[2].name == "sql_query");
    CHECK(rubric[3].name == "data_sample");
    for (const auto& aspect : rubric) REQUIRE(aspect.criteria.size() == 4);
    CHECK(rubric[0].criteria[0].name == "normalization compliance");
    CHECK(rubric[1].criteria[0].name == "unambiguous phrasing");
    CHECK(rubric[2].criteria[0].name == "correctness");
    CHECK(rubric[3].criteria[0].name == "result alignment");

    auto dir = testing::test_dir("eval_rubric");
    write_text(dir / "broken.json",
               R"({"aspects": [{"name": "database", "subject": "x",
                   "criteria": [{"name": "a", "description": "d"}]}]})");
    CHECK_THROWS_AS(load_rubric(dir / "broken.json"), ConfigError);
}

TEST_CASE("the judge tallies scripted ratings per aspect") {
    cot::DataSample sample;
    sample.db_name = "league";
    sample.db_path = league_db().string();
    sample.question = "Team names?";
    sample.style = "Formal";
    sample.sql = kGoldNames;
    sample.cot = "reason\n```sql\n" + kGoldNames + "\n```\n";
    sample.complexity = "Simple";

    auto rubric = load_rubric(kDataDir / "judge_rubric.json");

    auto provider = std::make_shared<llm::MockProvider>(
        llm::MockProvider::Script{}, [](const llm::ChatRequest& request) {
            const std::string& body = request.messages[1].text;
            std::string reply;
            if (body.find("- normalization compliance:") != std::string::npos) {
                for (int i = 0; i < 4; ++i)
                    reply += "### c\nRating: excellent\nExplanation: fine.\n";
            } else if (body.find("- unambiguous phrasing:") != std::string::npos) {
                reply = "### a\nRating: excellent\nExplanation: e.\n"
                        "### b\nRating: good\nExplanation: e.\n"
                        "### c\nRating: average\nExplanation: e.\n"
                        "### d\nRating: poor\nExplanation: e.\n";
            } else if (body.find("- correctness:") != std::string::npos) {
                reply = "I cannot assess this sample.";
            } else {
                reply = "Rating: **Good** overall\n"
                        "Rating: good.\n"
                        "Rating: POOR!\n"
                        "Rating: magnificent\n";
            }
            return std::vector<std::string>{reply};
        });
    llm::Gateway gateway(provider, {});

    auto judgements = judge_sample(sample, rubric, gateway, "judge");
    REQUIRE(judgements.size() == 4);

    CHECK(judgements["database"].tally == RatingTally{4, 0, 0, 0});
    CHECK(judgements["database"].n_skipped == 0);
    CHECK(judgements["question"].tally == RatingTally{1, 1, 1, 1});
    CHECK(quality_score(judgements["question"].tally) ==
          doctest::Approx(0.625).epsilon(1e-12));
    CHECK(judgements["sql_query"].tally.sum() == 0);
    CHECK(judgements["sql_query"].n_skipped == 4);
    CHECK(judgements["data_sample"].tally == RatingTally{0, 2, 0, 1});
    CHECK(judgements["data_sample"].n_skipped == 1);
}
