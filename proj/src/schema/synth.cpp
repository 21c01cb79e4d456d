#include "sqlsynth/schema/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::schema {

using nlohmann::json;

double sample_table_count_raw(std::mt19937_64& rng) {
    std::normal_distribution<double> dist(kTableCountMean, kTableCountStddev);
    return dist(rng);
}

int sample_table_count(std::mt19937_64& rng) {
    int k = static_cast<int>(std::lround(sample_table_count_raw(rng)));
    return std::clamp(k, kTableCountMin, kTableCountMax);
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& demo_dir) {
    std::vector<Demonstration> demos;
    for (const char* name : {"schema_demo_1.json", "schema_demo_2.json"}) {
        auto path = demo_dir / name;
        if (!std::filesystem::exists(path)) {
            throw ConfigError("missing demonstration file: " + path.string());
        }
        json j = json::parse(util::read_file(path));
        Demonstration demo;
        demo.table = j.at("web_table").get<ingest::WebTable>();
        demo.response = j.at("response").get<std::string>();
        demos.push_back(std::move(demo));
    }
    return demos;
}

llm::ChatRequest build_generation_prompt(const ingest::WebTable& table, int k,
                                         const std::string& model_id,
                                         const std::filesystem::path& demo_dir) {
    auto demos = load_demonstrations(demo_dir);

    std::string body;
    body += "## Task Instruction\n";
    body +=
        "You are given a web table. Imagine a realistic business scenario this table could come "
        "from, then design a database of exactly " +
        std::to_string(k) +
        " related tables for that scenario. For every table give a name, a description, columns "
        "(each with a name, a SQL data type, a description, and two example values), and a "
        "primary key. Declare primary and foreign key relationships between the tables. Answer "
        "with a short scenario paragraph followed by one fenced ```json block with the keys "
        "db_name, scenario, tables, and foreign_keys.\n\n";
    body += "## Demonstrations\n";
    for (size_t i = 0; i < demos.size(); ++i) {
        body += "### Example " + std::to_string(i + 1) + "\nWeb table:\n";
        body += ingest::render_table(demos[i].table, 3);
        body += "\nResponse:\n" + demos[i].response + "\n\n";
    }
    body += "## Web Table\n";
    body += ingest::render_table(table, 5);

    llm::ChatRequest request;
    request.model_id = model_id;
    request.temperature = 0.8;
    request.n_samples = 1;
    request.messages = {
        {"system", "You are an experienced database architect."},
        {"user", body},
    };
    return request;
}

namespace {

// Last fenced block that parses as a JSON object. Accepts ```json and bare ```.
json last_fenced_json(const std::string& text) {
    std::vector<std::string> blocks;
    size_t pos = 0;
    while (true) {
        size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        size_t body_start = text.find('\n', open);
        if (body_start == std::string::npos) break;
        size_t close = text.find("```", body_start);
        if (close == std::string::npos) break;
        blocks.push_back(text.substr(body_start + 1, close - body_start - 1));
        pos = close + 3;
    }
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        json parsed = json::parse(*it, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    // fall back to a bare top-level JSON object covering the whole text
    json parsed = json::parse(util::trim(text), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    throw ParseError("no JSON schema block in response");
}

}  // namespace

SchemaParse parse_schema(const std::string& llm_text) {
    json j = last_fenced_json(llm_text);
    if (!j.contains("tables") || !j.at("tables").is_array() || j.at("tables").empty()) {
        throw ParseError("schema block has no tables");
    }

    SchemaParse out;
    SchemaDef& schema = out.schema;
    schema.db_name = j.value("db_name", "");
    if (schema.db_name.empty()) throw ParseError("schema block has no db_name");
    schema.scenario = j.value("scenario", "");

    std::set<std::string> table_names;
    for (const auto& tj : j.at("tables")) {
        TableDef t = tj.get<TableDef>();
        if (t.name.empty()) {
            out.warnings.push_back("dropped an unnamed table");
            continue;
        }
        if (!table_names.insert(t.name).second) {
            throw InvariantError("duplicate table name: " + t.name);
        }
        // drop duplicate columns, keeping the first of each name
        std::set<std::string> column_names;
        std::vector<ColumnDef> unique_columns;
        for (auto& c : t.columns) {
            if (c.name.empty()) {
                out.warnings.push_back("dropped an unnamed column in " + t.name);
                continue;
            }
            if (!column_names.insert(c.name).second) {
                out.warnings.push_back("dropped duplicate column " + t.name + "." + c.name);
                continue;
            }
            if (c.sql_type.empty()) c.sql_type = "TEXT";
            unique_columns.push_back(std::move(c));
        }
        t.columns = std::move(unique_columns);
        if (t.columns.empty()) {
            out.warnings.push_back("dropped table " + t.name + ": no usable columns");
            table_names.erase(t.name);
            continue;
        }
        // primary-key names must resolve
        std::vector<std::string> pk;
        for (auto& name : t.primary_key) {
            if (column_names.count(name)) {
                pk.push_back(name);
            } else {
                out.warnings.push_back("dropped primary key " + t.name + "." + name +
                                       ": not a column");
            }
        }
        t.primary_key = std::move(pk);
        schema.tables.push_back(std::move(t));
    }
    if (schema.tables.empty()) throw ParseError("schema block has no usable tables");

    if (j.contains("foreign_keys")) {
        for (const auto& fj : j.at("foreign_keys")) {
            ForeignKey fk;
            try {
                fk = fj.get<ForeignKey>();
            } catch (const json::exception&) {
                out.warnings.push_back("dropped malformed foreign key entry");
                continue;
            }
            const auto* from = schema.find_table(fk.table);
            const auto* to = schema.find_table(fk.ref_table);
            if (!from || !from->find_column(fk.column) || !to || !to->find_column(fk.ref_column)) {
                out.warnings.push_back("dropped dangling foreign key " + fk.table + "." +
                                       fk.column + " -> " + fk.ref_table + "." + fk.ref_column);
                continue;
            }
            if (std::find(schema.foreign_keys.begin(), schema.foreign_keys.end(), fk) ==
                schema.foreign_keys.end()) {
                schema.foreign_keys.push_back(fk);
            }
        }
    }

    validate(schema);
    return out;
}

llm::ChatRequest build_enhancement_prompt(const SchemaDef& schema, const std::string& model_id) {
    std::string body;
    body +=
        "Below is a database schema. Enhance it: add relevant columns to each table where the "
        "design would benefit, and complete any missing primary and foreign key relationships. "
        "Keep every existing table and column unchanged by name; never remove anything. Answer "
        "with the complete updated schema as one fenced ```json block in the same format.\n\n";
    body += render_schema(schema);

    llm::ChatRequest request;
    request.model_id = model_id;
    request.temperature = 0.8;
    request.n_samples = 1;
    request.messages = {
        {"system", "You are an experienced database architect."},
        {"user", body},
    };
    return request;
}

namespace {

// The enhanced schema must keep everything the original had.
bool preserves_original(const SchemaDef& before, const SchemaDef& after, std::string* why) {
    for (const auto& t : before.tables) {
        const auto* after_table = after.find_table(t.name);
        if (!after_table) {
            *why = "enhancement dropped table " + t.name;
            return false;
        }
        for (const auto& c : t.columns) {
            if (!after_table->find_column(c.name)) {
                *why = "enhancement dropped column " + t.name + "." + c.name;
                return false;
            }
        }
        if (after_table->columns.size() < t.columns.size()) {
            *why = "enhancement shrank table " + t.name;
            return false;
        }
    }
    for (const auto& fk : before.foreign_keys) {
        if (std::find(after.foreign_keys.begin(), after.foreign_keys.end(), fk) ==
            after.foreign_keys.end()) {
            *why = "enhancement dropped foreign key " + fk.table + "." + fk.column;
            return false;
        }
    }
    return true;
}

}  // namespace

SchemaDef enhance(const SchemaDef& schema, llm::Gateway& gateway, const std::string& model_id,
                  std::vector<std::string>* log) {
    auto note = [&](const std::string& message) {
        if (log) log->push_back(message);
    };
    std::string response_text;
    try {
        auto response = gateway.complete(build_enhancement_prompt(schema, model_id));
        if (response.texts.empty()) {
            note("enhancement returned no text; keeping original schema");
            return schema;
        }
        response_text = response.texts.front();
    } catch (const Error& e) {
        note(std::string("enhancement request failed: ") + e.what());
        return schema;
    }

    SchemaParse parsed;
    try {
        parsed = parse_schema(response_text);
    } catch (const Error& e) {
        note(std::string("enhancement response unusable: ") + e.what());
        return schema;
    }
    for (const auto& w : parsed.warnings) note("enhancement: " + w);

    std::string why;
    if (!preserves_original(schema, parsed.schema, &why)) {
        note(why + "; keeping original schema");
        return schema;
    }
    // identity fields stay pinned to the original
    parsed.schema.db_name = schema.db_name;
    if (parsed.schema.scenario.empty()) parsed.schema.scenario = schema.scenario;
    return parsed.schema;
}

}  // namespace sqlsynth::schema
