#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/util.hpp"
#include "support/test_db.hpp"

using namespace sqlsynth;
using exec::Cell;
using exec::ExecOutcome;
using exec::ExecStatus;
using exec::execute;

namespace {

std::filesystem::path sample_db() {
    static auto path = testing::make_db(
        testing::test_dir("exec") / "sample.db",
        "CREATE TABLE people (id INTEGER PRIMARY KEY, name TEXT, score REAL);"
        "INSERT INTO people VALUES (1, 'ann', 80.5), (2, 'bob', 92.0), (3, NULL, NULL);");
    return path;
}

}  // namespace

TEST_CASE("select constant") {
    auto out = execute(sample_db(), "SELECT 1", 1000);
    REQUIRE(out.status == ExecStatus::Rows);
    CHECK(out.column_count == 1);
    REQUIRE(out.rows.size() == 1);
    CHECK(out.rows[0][0] == Cell::integer(1));
}

TEST_CASE("typed cells round through canonical encoding") {
    auto out = execute(sample_db(), "SELECT id, name, score FROM people ORDER BY id", 1000);
    REQUIRE(out.status == ExecStatus::Rows);
    REQUIRE(out.rows.size() == 3);
    CHECK(out.rows[0][1] == Cell::text("ann"));
    CHECK(out.rows[0][2] == Cell::real(80.5));
    CHECK(out.rows[1][2] == Cell::integer(92));  // 92.0 collapses to the integer
    CHECK(out.rows[2][1] == Cell::null());
    CHECK(out.rows[2][2] == Cell::null());
}

TEST_CASE("integral reals collapse so 92.0 equals 92") {
    CHECK(Cell::real(92.0) == Cell::integer(92));
    CHECK(Cell::real(-3.0) == Cell::integer(-3));
    CHECK(Cell::real(0.5) != Cell::integer(0));
}

TEST_CASE("reals compare at six decimal places") {
    CHECK(Cell::real(1.00000004) == Cell::real(1.00000006));
    CHECK(Cell::real(1.0000004) != Cell::real(1.0000006));
}

TEST_CASE("syntax errors report Error") {
    auto out = execute(sample_db(), "SELEKT 1", 1000);
    CHECK(out.status == ExecStatus::Error);
    CHECK(!out.error_text.empty());
}

TEST_CASE("runtime errors report Error") {
    auto out = execute(sample_db(), "SELECT * FROM missing_table", 1000);
    CHECK(out.status == ExecStatus::Error);
}

TEST_CASE("multiple statements are rejected") {
    auto out = execute(sample_db(), "SELECT 1; SELECT 2", 1000);
    CHECK(out.status == ExecStatus::Error);
    CHECK(out.error_class == "multi_statement");
    // trailing semicolon alone is fine
    CHECK(execute(sample_db(), "SELECT 1;", 1000).status == ExecStatus::Rows);
    CHECK(execute(sample_db(), "SELECT 1; -- done", 1000).status == ExecStatus::Rows);
}

TEST_CASE("unbounded recursion times out") {
    auto out = execute(sample_db(),
                       "WITH RECURSIVE r(n) AS (SELECT 1 UNION ALL SELECT n + 1 FROM r) "
                       "SELECT sum(n) FROM r",
                       100);
    CHECK(out.status == ExecStatus::Timeout);
    CHECK(out.elapsed_ms >= 90);
}

TEST_CASE("writes are refused by the read-only connection") {
    auto db = testing::make_db(testing::test_dir("exec") / "readonly.db",
                               "CREATE TABLE t (x); INSERT INTO t VALUES (1);");
    auto before = util::read_file(db);
    CHECK(execute(db, "INSERT INTO t VALUES (2)", 1000).status == ExecStatus::Error);
    CHECK(execute(db, "DROP TABLE t", 1000).status == ExecStatus::Error);
    CHECK(execute(db, "UPDATE t SET x = 9", 1000).status == ExecStatus::Error);
    auto after = util::read_file(db);
    CHECK(util::fnv1a64(before) == util::fnv1a64(after));
}

TEST_CASE("oversized results are refused") {
    // 100k cap: cross join builds 400^3 = 6.4e7 rows, far past the cap
    auto db = testing::make_db(testing::test_dir("exec") / "big.db",
                               "CREATE TABLE n (x INTEGER);"
                               "WITH RECURSIVE g(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM g "
                               "WHERE x < 400) INSERT INTO n SELECT x FROM g;");
    auto out = execute(db, "SELECT a.x FROM n a, n b, n c", 30000);
    CHECK(out.status == ExecStatus::Error);
    CHECK(out.error_class == "oversized");
}

TEST_CASE("row order does not matter, column order does") {
    auto a = execute(sample_db(), "SELECT id, name FROM people ORDER BY id", 1000);
    auto b = execute(sample_db(), "SELECT id, name FROM people ORDER BY id DESC", 1000);
    CHECK(exec::same_result(a, b));

    auto c = execute(sample_db(), "SELECT name, id FROM people", 1000);
    CHECK(!exec::same_result(a, c));
}

TEST_CASE("duplicates are significant") {
    auto once = execute(sample_db(), "SELECT 1 FROM people WHERE id = 1", 1000);
    auto thrice = execute(sample_db(), "SELECT 1 FROM people", 1000);
    CHECK(!exec::same_result(once, thrice));
}

TEST_CASE("errors never equal anything") {
    auto err = execute(sample_db(), "SELEKT", 1000);
    auto err2 = execute(sample_db(), "SELEKT", 1000);
    auto ok = execute(sample_db(), "SELECT 1", 1000);
    CHECK(!exec::same_result(err, err2));
    CHECK(!exec::same_result(err, ok));
    CHECK(!exec::same_result(ok, err));
}

TEST_CASE("NULL equals NULL in result comparison") {
    auto a = execute(sample_db(), "SELECT name FROM people WHERE id = 3", 1000);
    auto b = execute(sample_db(), "SELECT score FROM people WHERE id = 3", 1000);
    REQUIRE(a.status == ExecStatus::Rows);
    CHECK(exec::same_result(a, b));
}

TEST_CASE("fingerprint tracks same_result") {
    auto a = execute(sample_db(), "SELECT id FROM people ORDER BY id", 1000);
    auto b = execute(sample_db(), "SELECT id FROM people ORDER BY id DESC", 1000);
    auto c = execute(sample_db(), "SELECT id FROM people WHERE id < 3", 1000);
    CHECK(exec::fingerprint(a) == exec::fingerprint(b));
    CHECK(exec::fingerprint(a) != exec::fingerprint(c));

    auto timeout = execute(sample_db(),
                           "WITH RECURSIVE r(n) AS (SELECT 1 UNION ALL SELECT n + 1 FROM r) "
                           "SELECT max(n) FROM r",
                           50);
    REQUIRE(timeout.status == ExecStatus::Timeout);
    CHECK(exec::fingerprint(a) != exec::fingerprint(timeout));
}

TEST_CASE("same_result is an equivalence relation on row outcomes") {
    std::vector<ExecOutcome> outcomes;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        ExecOutcome o;
        o.status = ExecStatus::Rows;
        o.column_count = 1 + int(rng() % 2);
        size_t rows = rng() % 4;
        for (size_t r = 0; r < rows; ++r) {
            std::vector<Cell> row;
            for (int c = 0; c < o.column_count; ++c) row.push_back(Cell::integer(int64_t(rng() % 3)));
            o.rows.push_back(std::move(row));
        }
        outcomes.push_back(std::move(o));
    }
    for (const auto& a : outcomes) CHECK(exec::same_result(a, a));
    for (const auto& a : outcomes)
        for (const auto& b : outcomes) {
            CHECK(exec::same_result(a, b) == exec::same_result(b, a));
            CHECK((exec::fingerprint(a) == exec::fingerprint(b)) == exec::same_result(a, b));
            for (const auto& c : outcomes) {
                if (exec::same_result(a, b) && exec::same_result(b, c)) {
                    CHECK(exec::same_result(a, c));
                }
            }
        }
}
