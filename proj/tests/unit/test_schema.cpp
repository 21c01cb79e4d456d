#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/schema/materialize.hpp"
#include "sqlsynth/schema/schema_def.hpp"
#include "sqlsynth/schema/synth.hpp"
#include "sqlsynth/util.hpp"
#include "support/test_db.hpp"

using namespace sqlsynth;
using namespace sqlsynth::schema;

namespace {

const std::filesystem::path kDemoDir = std::filesystem::path(SQLSYNTH_SOURCE_DIR) / "data/demos";

SchemaDef two_table_schema() {
    SchemaDef s;
    s.db_name = "shop";
    s.scenario = "a tiny shop";
    TableDef customers;
    customers.name = "customers";
    customers.description = "people who buy";
    customers.columns = {
        {"customer_id", "INTEGER", "unique id", {"1", "2"}},
        {"name", "TEXT", "display name", {"ann", "bob"}},
    };
    customers.primary_key = {"customer_id"};
    TableDef orders;
    orders.name = "orders";
    orders.description = "purchases";
    orders.columns = {
        {"order_id", "INTEGER", "unique id", {"10", "11"}},
        {"customer_id", "INTEGER", "buyer", {"1", "2"}},
        {"total", "REAL", "order total", {"9.99", "24.50"}},
    };
    orders.primary_key = {"order_id"};
    s.tables = {customers, orders};
    s.foreign_keys = {{"orders", "customer_id", "customers", "customer_id"}};
    return s;
}

ingest::WebTable seed_table() {
    ingest::WebTable t;
    t.table_id = "seed";
    t.headers = {"product", "category", "price", "stock", "supplier"};
    t.rows = {
        {"lamp", "home", "12.99", "40", "Brightco"},
        {"mug", "kitchen", "4.50", "120", "Cupworks"},
        {"desk", "office", "89.00", "8", "Planks"},
        {"pen", "office", "1.20", "500", "Inkline"},
        {"rug", "home", "35.00", "14", "Weaveline"},
    };
    return t;
}

}  // namespace

TEST_CASE("table counts stay inside the clamp") {
    auto rng = util::rng_for(1, "clamp");
    for (int i = 0; i < 20000; ++i) {
        int k = sample_table_count(rng);
        CHECK(k >= 2);
        CHECK(k <= 20);
    }
}

TEST_CASE("table count is the rounded clamped raw draw") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        auto rng_a = util::rng_for(seed, "pair");
        auto rng_b = rng_a;  // same state, consumed by the two variants
        double raw = sample_table_count_raw(rng_a);
        int k = sample_table_count(rng_b);
        int expect = std::clamp(static_cast<int>(std::lround(raw)), 2, 20);
        CHECK(k == expect);
    }
}

TEST_CASE("raw draws look like the intended distribution") {
    auto rng = util::rng_for(7, "stats");
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double draw = sample_table_count_raw(rng);
        sum += draw;
        sq += draw * draw;
    }
    double mean = sum / n;
    double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(mean == doctest::Approx(10.0).epsilon(0.01));
    CHECK(stddev == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("bundled demonstrations load and parse") {
    auto demos = load_demonstrations(kDemoDir);
    REQUIRE(demos.size() == 2);
    for (const auto& demo : demos) {
        validate(demo.table);
        auto parsed = parse_schema(demo.response);
        CHECK(parsed.warnings.empty());
        CHECK(parsed.schema.tables.size() >= 4);
        CHECK(!parsed.schema.foreign_keys.empty());
    }
    CHECK_THROWS_AS(load_demonstrations("/nonexistent/demos"), ConfigError);
}

TEST_CASE("generation prompt interpolates the table count and shows both demos") {
    auto req = build_generation_prompt(seed_table(), 7, "synth-model", kDemoDir);
    const auto& text = req.messages.back().text;
    CHECK(text.find("exactly 7 related tables") != std::string::npos);
    CHECK(text.find("bookstore_chain") != std::string::npos);
    CHECK(text.find("league_operations") != std::string::npos);
    // instruction, demos, then the seed table, in order
    auto instruction = text.find("## Task Instruction");
    auto demos = text.find("## Demonstrations");
    auto table = text.find("## Web Table");
    REQUIRE(instruction != std::string::npos);
    REQUIRE(demos != std::string::npos);
    REQUIRE(table != std::string::npos);
    CHECK(instruction < demos);
    CHECK(demos < table);
    CHECK(text.find("lamp | home | 12.99") != std::string::npos);

    auto again = build_generation_prompt(seed_table(), 7, "synth-model", kDemoDir);
    CHECK(again.messages.back().text == text);  // byte-stable
}

TEST_CASE("schema json round-trips through the parser") {
    auto schema = two_table_schema();
    auto parsed = parse_schema(render_schema(schema));
    CHECK(parsed.schema == schema);
    CHECK(parsed.warnings.empty());
}

TEST_CASE("dangling foreign keys are dropped with a warning") {
    auto schema = two_table_schema();
    schema.foreign_keys.push_back({"orders", "customer_id", "ghosts", "ghost_id"});
    auto text = render_schema(schema);
    auto parsed = parse_schema(text);
    CHECK(parsed.schema.foreign_keys.size() == 1);
    REQUIRE(parsed.warnings.size() == 1);
    CHECK(parsed.warnings[0].find("ghosts") != std::string::npos);
}

TEST_CASE("duplicate tables are fatal, duplicate columns are salvaged") {
    std::string dup_tables = R"(```json
{"db_name": "x", "tables": [
  {"name": "t", "columns": [{"name": "a", "type": "TEXT"}]},
  {"name": "t", "columns": [{"name": "b", "type": "TEXT"}]}
]}
```)";
    CHECK_THROWS_AS(parse_schema(dup_tables), InvariantError);

    std::string dup_columns = R"(```json
{"db_name": "x", "tables": [
  {"name": "t", "columns": [
    {"name": "a", "type": "TEXT"},
    {"name": "a", "type": "INTEGER"},
    {"name": "b", "type": "TEXT"}
  ]}
]}
```)";
    auto parsed = parse_schema(dup_columns);
    CHECK(parsed.schema.tables[0].columns.size() == 2);
    CHECK(parsed.schema.tables[0].columns[0].sql_type == "TEXT");  // first wins
    CHECK(parsed.warnings.size() == 1);
}

TEST_CASE("free text with no schema block is a parse error") {
    CHECK_THROWS_AS(parse_schema("I could not design a database for this."), ParseError);
    CHECK_THROWS_AS(parse_schema("```json\n[1,2,3]\n```"), ParseError);
}

TEST_CASE("the last fenced block wins") {
    auto schema = two_table_schema();
    std::string text = "First a draft:\n```json\n{\"draft\": true}\n```\nFinal answer:\n" +
                       render_schema(schema);
    auto parsed = parse_schema(text);
    CHECK(parsed.schema == schema);
}

TEST_CASE("enhancement accepts grown schemas") {
    auto schema = two_table_schema();
    auto enhanced = schema;
    enhanced.tables[0].columns.push_back({"email", "TEXT", "contact address", {}});
    enhanced.tables[1].columns.push_back({"placed_at", "TEXT", "order timestamp", {}});
    enhanced.foreign_keys.push_back({"orders", "order_id", "orders", "order_id"});

    llm::MockProvider::Script script;
    auto req = build_enhancement_prompt(schema, "synth-model");
    script.chat[llm::request_fingerprint(req)] = {render_schema(enhanced)};
    llm::Gateway gw(std::make_shared<llm::MockProvider>(script), llm::ProviderConfig{});

    std::vector<std::string> log;
    auto result = enhance(schema, gw, "synth-model", &log);
    CHECK(result.tables[0].columns.size() == 3);
    CHECK(result.tables[1].columns.size() == 4);
    CHECK(result.foreign_keys.size() == 2);
}

TEST_CASE("enhancement that drops a column is rejected") {
    auto schema = two_table_schema();
    auto shrunk = schema;
    shrunk.tables[1].columns.erase(shrunk.tables[1].columns.begin() + 1);
    shrunk.foreign_keys.clear();

    llm::MockProvider::Script script;
    auto req = build_enhancement_prompt(schema, "synth-model");
    script.chat[llm::request_fingerprint(req)] = {render_schema(shrunk)};
    llm::Gateway gw(std::make_shared<llm::MockProvider>(script), llm::ProviderConfig{});

    std::vector<std::string> log;
    auto result = enhance(schema, gw, "synth-model", &log);
    CHECK(result == schema);
    REQUIRE(!log.empty());
    CHECK(log.back().find("keeping original schema") != std::string::npos);
}

TEST_CASE("unusable enhancement responses keep the original") {
    auto schema = two_table_schema();
    llm::Gateway gw(std::make_shared<llm::MockProvider>(), llm::ProviderConfig{});
    std::vector<std::string> log;
    auto result = enhance(schema, gw, "synth-model", &log);  // unscripted marker text
    CHECK(result == schema);
    CHECK(!log.empty());
}

TEST_CASE("materialized files reproduce the declared structure") {
    auto schema = two_table_schema();
    auto path = testing::test_dir("schema") / "shop.db";
    auto report = materialize(schema, path);
    CHECK(report.warnings.empty());

    auto back = introspect(path);
    REQUIRE(back.tables.size() == 2);
    // same table set with same columns, keys, and types
    for (const auto& t : schema.tables) {
        const auto* got = back.find_table(t.name);
        REQUIRE(got != nullptr);
        REQUIRE(got->columns.size() == t.columns.size());
        for (size_t i = 0; i < t.columns.size(); ++i) {
            CHECK(got->columns[i].name == t.columns[i].name);
            CHECK(got->columns[i].sql_type == t.columns[i].sql_type);
        }
        CHECK(got->primary_key == t.primary_key);
    }
    CHECK(back.foreign_keys == schema.foreign_keys);

    // example rows landed and are queryable through the engine
    auto out = exec::execute(path, "SELECT count(*) FROM orders", 1000);
    REQUIRE(out.status == exec::ExecStatus::Rows);
    CHECK(out.rows[0][0] == exec::Cell::integer(2));
    auto join = exec::execute(
        path, "SELECT c.name FROM customers c JOIN orders o ON c.customer_id = o.customer_id",
        1000);
    CHECK(join.rows.size() == 2);
}

TEST_CASE("referencing tables are created after their parents") {
    auto schema = two_table_schema();
    std::swap(schema.tables[0], schema.tables[1]);  // declare child first
    auto order = fk_dependency_order(schema);
    REQUIRE(order.size() == 2);
    CHECK(order[0] == "customers");
    CHECK(order[1] == "orders");

    auto path = testing::test_dir("schema") / "swapped.db";
    CHECK_NOTHROW(materialize(schema, path));
}

TEST_CASE("foreign key cycles fall back to declaration order") {
    SchemaDef s;
    s.db_name = "cyc";
    TableDef a, b;
    a.name = "a";
    a.columns = {{"id", "INTEGER", "", {}}, {"b_id", "INTEGER", "", {}}};
    a.primary_key = {"id"};
    b.name = "b";
    b.columns = {{"id", "INTEGER", "", {}}, {"a_id", "INTEGER", "", {}}};
    b.primary_key = {"id"};
    s.tables = {a, b};
    s.foreign_keys = {{"a", "b_id", "b", "id"}, {"b", "a_id", "a", "id"}};
    auto order = fk_dependency_order(s);
    CHECK(order == std::vector<std::string>{"a", "b"});
    auto path = testing::test_dir("schema") / "cycle.db";
    CHECK_NOTHROW(materialize(s, path));
}

TEST_CASE("duplicate primary keys in example rows abort materialization") {
    auto schema = two_table_schema();
    schema.tables[0].columns[0].example_values = {"1", "1"};  // pk collision
    auto path = testing::test_dir("schema") / "dup.db";
    CHECK_THROWS_AS(materialize(schema, path), MaterializeError);
    CHECK(!std::filesystem::exists(path));  // partial file cleaned up
}

TEST_CASE("example rows that break a foreign key abort materialization") {
    auto schema = two_table_schema();
    schema.tables[1].columns[1].example_values = {"1", "999"};  // no customer 999
    auto path = testing::test_dir("schema") / "fkviol.db";
    CHECK_THROWS_AS(materialize(schema, path), MaterializeError);
}

TEST_CASE("non-numeric text in numeric columns is inserted but flagged") {
    auto schema = two_table_schema();
    schema.tables[1].columns[2].example_values = {"cheap", "24.50"};
    auto path = testing::test_dir("schema") / "affinity.db";
    auto report = materialize(schema, path);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("cheap") != std::string::npos);
    auto out = exec::execute(path, "SELECT total FROM orders WHERE order_id = 10", 1000);
    CHECK(out.rows[0][0] == exec::Cell::text("cheap"));
}

TEST_CASE("NULL example markers insert real NULLs") {
    auto schema = two_table_schema();
    schema.tables[0].columns[1].example_values = {"NULL", "bob"};
    auto path = testing::test_dir("schema") / "nulls.db";
    materialize(schema, path);
    auto out = exec::execute(path, "SELECT name FROM customers WHERE customer_id = 1", 1000);
    CHECK(out.rows[0][0] == exec::Cell::null());
}

TEST_CASE("ddl rendering carries descriptions as comments") {
    auto ddl = ddl_of(two_table_schema(), /*with_comments=*/true);
    CHECK(ddl.find("-- people who buy") != std::string::npos);
    CHECK(ddl.find("-- unique id") != std::string::npos);
    CHECK(ddl.find("FOREIGN KEY (\"customer_id\") REFERENCES \"customers\"") != std::string::npos);
    auto bare = ddl_of(two_table_schema(), /*with_comments=*/false);
    CHECK(bare.find("--") == std::string::npos);
}

TEST_CASE("schema validation catches broken invariants") {
    auto ok = two_table_schema();
    CHECK_NOTHROW(validate(ok));

    auto unnamed = ok;
    unnamed.db_name = "";
    CHECK_THROWS_AS(validate(unnamed), InvariantError);

    auto dup = ok;
    dup.tables.push_back(dup.tables[0]);
    CHECK_THROWS_AS(validate(dup), InvariantError);

    auto bad_pk = ok;
    bad_pk.tables[0].primary_key = {"missing"};
    CHECK_THROWS_AS(validate(bad_pk), InvariantError);

    auto bad_fk = ok;
    bad_fk.foreign_keys.push_back({"orders", "nope", "customers", "customer_id"});
    CHECK_THROWS_AS(validate(bad_fk), InvariantError);
}
