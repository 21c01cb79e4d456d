#include "sqlsynth/pipeline/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <set>

#include "sqlsynth/analysis/features.hpp"
#include "sqlsynth/cot/synth.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/ingest/filters.hpp"
#include "sqlsynth/ingest/web_table.hpp"
#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/query/synth.hpp"
#include "sqlsynth/question/synth.hpp"
#include "sqlsynth/schema/materialize.hpp"
#include "sqlsynth/schema/schema_def.hpp"
#include "sqlsynth/schema/synth.hpp"
#include "sqlsynth/train/export.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string choose_model(const ModelPool& pool, uint64_t seed, const std::string& stage,
                         const std::string& item_key) {
    if (pool.empty()) throw PreconditionError("empty model pool for stage " + stage);
    if (pool.size() == 1) return pool.front().model_id;
    auto rng = util::rng_for(seed, "model:" + stage + ":" + item_key);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    for (const auto& choice : pool) {
        cumulative += choice.weight;
        if (u < cumulative) return choice.model_id;
    }
    return pool.back().model_id;
}

const ModelPool& PipelineConfig::pool_for(const std::string& stage) const {
    static const ModelPool default_pool = {{"default", 1.0}};
    auto it = models.find(stage);
    return it == models.end() ? default_pool : it->second;
}

namespace {

fs::path resolve_path(const fs::path& base, const fs::path& p) {
    return (p.is_absolute() ? p : base / p).lexically_normal();
}

ModelPool parse_pool(const std::string& stage, const json& entries) {
    if (!entries.is_array() || entries.empty()) {
        throw ConfigError("model pool for stage " + stage + " must be a non-empty array");
    }
    ModelPool pool;
    size_t n_weighted = 0;
    for (const auto& entry : entries) {
        ModelChoice choice;
        if (!entry.contains("model_id") || !entry.at("model_id").is_string()) {
            throw ConfigError("model pool entry for stage " + stage + " needs a model_id");
        }
        choice.model_id = entry.at("model_id").get<std::string>();
        if (entry.contains("weight")) {
            choice.weight = entry.at("weight").get<double>();
            ++n_weighted;
        }
        pool.push_back(std::move(choice));
    }
    if (n_weighted == 0) {
        for (auto& choice : pool) choice.weight = 1.0 / double(pool.size());
    } else if (n_weighted != pool.size()) {
        throw ConfigError("model pool for stage " + stage +
                          " mixes weighted and unweighted entries");
    }
    return pool;
}

}  // namespace

PipelineConfig load_config(const fs::path& path) {
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config is not a JSON object: " + path.string());
    }

    PipelineConfig c;
    c.config_path = fs::absolute(path).lexically_normal();
    fs::path base = c.config_path.parent_path();

    auto need_path = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw ConfigError(std::string("config is missing required path: ") + key);
        }
        return resolve_path(base, fs::path(j.at(key).get<std::string>()));
    };
    c.tables_dir = need_path("tables_dir");
    c.work_dir = need_path("work_dir");
    c.output_dir = need_path("output_dir");
    c.data_dir = j.contains("data_dir")
                     ? resolve_path(base, fs::path(j.at("data_dir").get<std::string>()))
                     : base / "data";

    c.seed = j.value("seed", uint64_t(0));
    c.budget_per_db = j.value("budget_per_db", 300);
    c.n_samples = j.value("n_samples", 8);
    c.temperature = j.value("temperature", 0.8);
    c.timeout_ms = j.value("timeout_ms", int64_t(30000));
    c.workers = j.value("workers", 4);
    c.embed_model_id = j.value("embed_model_id", std::string("all-mpnet-base-v2"));

    if (j.contains("provider")) {
        const json& p = j.at("provider");
        c.provider.endpoint_url = p.value("endpoint_url", std::string());
        c.provider.api_key_env = p.value("api_key_env", std::string());
        c.provider.max_in_flight = p.value("max_in_flight", c.provider.max_in_flight);
        c.provider.retry_limit = p.value("retry_limit", c.provider.retry_limit);
        c.provider.backoff_base_ms = p.value("backoff_base_ms", c.provider.backoff_base_ms);
    }
    if (j.contains("models")) {
        for (const auto& [stage, entries] : j.at("models").items()) {
            c.models[stage] = parse_pool(stage, entries);
        }
    }
    validate(c);
    return c;
}

void validate(const PipelineConfig& config) {
    if (config.tables_dir.empty()) throw ConfigError("tables_dir is required");
    if (config.work_dir.empty()) throw ConfigError("work_dir is required");
    if (config.output_dir.empty()) throw ConfigError("output_dir is required");
    if (config.budget_per_db < 1) throw ConfigError("budget_per_db must be at least 1");
    if (config.n_samples < 1) throw ConfigError("n_samples must be at least 1");
    if (config.temperature < 0.0) throw ConfigError("temperature must be non-negative");
    if (config.timeout_ms < 1) throw ConfigError("timeout_ms must be positive");
    if (config.workers < 1) throw ConfigError("workers must be at least 1");
    if (config.embed_model_id.empty()) throw ConfigError("embed_model_id is required");

    for (const auto& [stage, pool] : config.models) {
        if (std::find(stage_order().begin(), stage_order().end(), stage) == stage_order().end()) {
            throw ConfigError("model pool for unknown stage: " + stage);
        }
        if (pool.empty()) throw ConfigError("model pool for stage " + stage + " is empty");
        double sum = 0.0;
        for (const auto& choice : pool) {
            if (choice.model_id.empty()) {
                throw ConfigError("model pool for stage " + stage + " has an unnamed entry");
            }
            if (choice.weight <= 0.0) {
                throw ConfigError("model weight for " + stage + "/" + choice.model_id +
                                  " must be positive");
            }
            sum += choice.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ConfigError("model weights for stage " + stage + " sum to " +
                              std::to_string(sum) + ", expected 1");
        }
    }
}

json config_to_json(const PipelineConfig& config) {
    json models = json::object();
    for (const auto& [stage, pool] : config.models) {
        json entries = json::array();
        for (const auto& choice : pool) {
            entries.push_back({{"model_id", choice.model_id}, {"weight", choice.weight}});
        }
        models[stage] = std::move(entries);
    }
    return json{{"tables_dir", config.tables_dir.string()},
                {"work_dir", config.work_dir.string()},
                {"output_dir", config.output_dir.string()},
                {"data_dir", config.data_dir.string()},
                {"seed", config.seed},
                {"budget_per_db", config.budget_per_db},
                {"n_samples", config.n_samples},
                {"temperature", config.temperature},
                {"timeout_ms", config.timeout_ms},
                {"workers", config.workers},
                {"embed_model_id", config.embed_model_id},
                {"provider",
                 {{"endpoint_url", config.provider.endpoint_url},
                  {"api_key_env", config.provider.api_key_env},
                  {"max_in_flight", config.provider.max_in_flight},
                  {"retry_limit", config.provider.retry_limit},
                  {"backoff_base_ms", config.provider.backoff_base_ms}}},
                {"models", std::move(models)}};
}

std::string config_hash(const PipelineConfig& config) {
    return util::to_hex(util::fnv1a64(config_to_json(config).dump()));
}

StageCheckpoint& RunManifest::checkpoint(const std::string& stage) {
    for (auto& cp : checkpoints) {
        if (cp.stage == stage) return cp;
    }
    checkpoints.push_back(StageCheckpoint{stage});
    return checkpoints.back();
}

const StageCheckpoint* RunManifest::find_checkpoint(const std::string& stage) const {
    for (const auto& cp : checkpoints) {
        if (cp.stage == stage) return &cp;
    }
    return nullptr;
}

void to_json(json& j, const RunManifest& m) {
    json checkpoints = json::array();
    for (const auto& cp : m.checkpoints) {
        checkpoints.push_back({{"stage", cp.stage},
                               {"items_done", cp.items_done},
                               {"items_failed", cp.items_failed},
                               {"complete", cp.complete}});
    }
    j = json{{"run_id", m.run_id},
             {"config_hash", m.config_hash},
             {"config_path", m.config_path.string()},
             {"requested_stages", m.requested_stages},
             {"checkpoints", std::move(checkpoints)},
             {"artifacts", m.artifacts}};
}

void from_json(const json& j, RunManifest& m) {
    j.at("run_id").get_to(m.run_id);
    j.at("config_hash").get_to(m.config_hash);
    m.config_path = fs::path(j.at("config_path").get<std::string>());
    m.requested_stages = j.value("requested_stages", std::vector<std::string>{});
    m.checkpoints.clear();
    for (const auto& cj : j.at("checkpoints")) {
        StageCheckpoint cp;
        cj.at("stage").get_to(cp.stage);
        cp.items_done = cj.value("items_done", size_t(0));
        cp.items_failed = cj.value("items_failed", size_t(0));
        cp.complete = cj.value("complete", false);
        m.checkpoints.push_back(std::move(cp));
    }
    if (j.contains("artifacts")) {
        j.at("artifacts").get_to(m.artifacts);
    } else {
        m.artifacts.clear();
    }
}

RunManifest load_manifest(const fs::path& path) {
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError("manifest is not a JSON object: " + path.string());
    }
    return j.get<RunManifest>();
}

void save_manifest(const RunManifest& manifest, const fs::path& path) {
    util::write_file_atomic(path, json(manifest).dump(2) + "\n");
}

const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order = {"ingest", "schema",   "query",
                                                   "question", "cot",    "export"};
    return order;
}

namespace {

constexpr int kMaxItemAttempts = 2;  // one initial try plus one retry on resume

std::string sanitize_name(const std::string& name) {
    std::string out;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_';
        out += ok ? c : '_';
    }
    if (out.empty()) out = "db";
    return out;
}

std::optional<json> read_json_file(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    util::write_file_atomic(path, j.dump(2) + "\n");
}

// One row of the schema-stage index tying a seed table to its database.
struct IndexEntry {
    std::string table_id;
    std::string db_name;
    fs::path schema_path;
    fs::path db_path;
};

std::vector<IndexEntry> load_index(const fs::path& path) {
    json j = json::parse(util::read_file(path));
    std::vector<IndexEntry> entries;
    for (const auto& ej : j) {
        entries.push_back({ej.at("table_id").get<std::string>(),
                           ej.at("db_name").get<std::string>(),
                           fs::path(ej.at("schema_path").get<std::string>()),
                           fs::path(ej.at("db_path").get<std::string>())});
    }
    return entries;
}

// Orchestrates one run: owns the gateway, the manifest, and the per-item
// checkpoint discipline shared by all stages.
class Runner {
  public:
    Runner(PipelineConfig config, std::shared_ptr<llm::Provider> provider, RunManifest manifest,
           fs::path manifest_path)
        : config_(std::move(config)),
          gateway_(std::move(provider), config_.provider),
          manifest_(std::move(manifest)),
          manifest_path_(std::move(manifest_path)) {}

    RunManifest execute(const std::vector<std::string>& stages) {
        save();
        for (const auto& stage : stages) {
            if (stage == "ingest") stage_ingest();
            else if (stage == "schema") stage_schema();
            else if (stage == "query") stage_query();
            else if (stage == "question") stage_question();
            else if (stage == "cot") stage_cot();
            else if (stage == "export") stage_export();
            else throw ConfigError("unknown stage: " + stage);
        }
        save();
        return manifest_;
    }

  private:
    void save() { save_manifest(manifest_, manifest_path_); }

    fs::path work() const { return config_.work_dir; }
    fs::path items_dir(const std::string& stage) const { return work() / stage / "items"; }

    uint64_t seed() const { return config_.seed; }

    std::string model_for(const std::string& stage, const std::string& item_key) const {
        return choose_model(config_.pool_for(stage), seed(), stage, item_key);
    }

    // In-flight count updates never lower what the manifest already shows;
    // exact values land at stage completion.
    void bump(const std::string& stage, size_t done, size_t failed) {
        auto& cp = manifest_.checkpoint(stage);
        cp.items_done = std::max(cp.items_done, done);
        cp.items_failed = std::max(cp.items_failed, failed);
        save();
    }

    void finalize(const std::string& stage, size_t done, size_t failed, const fs::path& artifact) {
        auto& cp = manifest_.checkpoint(stage);
        if (done < cp.items_done && cp.complete) {
            throw InvariantError("checkpoint for stage " + stage + " would regress from " +
                                 std::to_string(cp.items_done) + " to " + std::to_string(done));
        }
        cp.items_done = std::max(cp.items_done, done);
        cp.items_failed = failed;
        cp.complete = true;
        manifest_.artifacts[stage] = artifact.string();
        save();
    }

    // Runs one item under the checkpoint protocol: existing results are
    // reused, permanent failures are skipped, and a first failure is retried
    // exactly once by a later pass. compute() returns {"ok": ...} or
    // {"dropped": reason}; configuration and precondition problems abort the
    // stage, every other error marks just this item.
    json run_item(const std::string& stage, const std::string& key, size_t& done, size_t& failed,
                  const std::function<json()>& compute) {
        fs::path path = items_dir(stage) / (key + ".json");
        auto existing = read_json_file(path);
        if (existing) {
            if (existing->contains("ok") || existing->contains("dropped")) {
                ++done;
                bump(stage, done, failed);
                return *existing;
            }
            if (existing->value("attempts", 1) >= kMaxItemAttempts) {
                ++failed;
                bump(stage, done, failed);
                return *existing;
            }
        }
        json record{{"key", key},
                    {"attempts", existing ? existing->value("attempts", 1) + 1 : 1}};
        try {
            record.update(compute());
        } catch (const ConfigError&) {
            throw;
        } catch (const PreconditionError&) {
            throw;
        } catch (const StageError& e) {
            record["failed"] = e.what();
            write_json_file(path, record);
            ++failed;
            bump(stage, done, failed);
            throw;
        } catch (const Error& e) {
            record["failed"] = e.what();
        }
        write_json_file(path, record);
        record.contains("failed") ? ++failed : ++done;
        bump(stage, done, failed);
        return record;
    }

    // Item records of one stage in canonical (sorted key) order.
    std::vector<json> sorted_items(const std::string& stage) const {
        std::vector<fs::path> paths;
        fs::path dir = items_dir(stage);
        if (fs::exists(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() == ".json") paths.push_back(entry.path());
            }
        }
        std::sort(paths.begin(), paths.end());
        std::vector<json> records;
        for (const auto& p : paths) {
            if (auto j = read_json_file(p)) records.push_back(std::move(*j));
        }
        return records;
    }

    void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
        fs::create_directories(path.parent_path());
        std::string text;
        for (const auto& line : lines) {
            text += line;
            text += '\n';
        }
        util::write_file_atomic(path, text);
    }

    // Key joining a query to everything downstream of it: stable under
    // reruns because it depends only on content, not on file positions.
    static std::string sample_key(const query::SqlSample& sample) {
        return sample.db_name + "-" + util::to_hex(util::fnv1a64(sample.sql_text));
    }

    fs::path kept_tables_path() const { return work() / "ingest" / "kept.jsonl"; }
    fs::path index_path() const { return work() / "schema" / "index.json"; }
    fs::path sql_samples_path() const { return work() / "sql_samples.jsonl"; }
    fs::path questions_path() const { return work() / "questions.jsonl"; }
    fs::path data_samples_path() const { return config_.output_dir / "data_samples.jsonl"; }

    std::map<std::string, schema::SchemaDef> load_schemas() const {
        std::map<std::string, schema::SchemaDef> schemas;
        for (const auto& entry : load_index(index_path())) {
            json j = json::parse(util::read_file(entry.schema_path));
            schemas[entry.db_name] = j.get<schema::SchemaDef>();
        }
        return schemas;
    }

    std::map<std::string, fs::path> load_db_paths() const {
        std::map<std::string, fs::path> paths;
        for (const auto& entry : load_index(index_path())) {
            paths[entry.db_name] = entry.db_path;
        }
        return paths;
    }

    void stage_ingest() {
        if (!fs::exists(config_.tables_dir)) {
            throw PreconditionError("tables directory missing: " + config_.tables_dir.string());
        }
        if (manifest_.checkpoint("ingest").complete && fs::exists(kept_tables_path())) {
            return;  // batch stage: the output either exists in full or not at all
        }

        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(config_.tables_dir)) {
            auto ext = entry.path().extension();
            if (ext == ".jsonl" || ext == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<ingest::WebTable> tables;
        for (const auto& file : files) {
            if (file.extension() == ".jsonl") {
                auto batch = ingest::load_tables_jsonl(file);
                tables.insert(tables.end(), batch.begin(), batch.end());
            } else {
                tables.push_back(ingest::load_table_csv(file));
            }
        }
        if (tables.empty()) {
            throw PreconditionError("no web tables under " + config_.tables_dir.string());
        }

        ingest::IngestResult result;
        try {
            result = ingest::run_ingest(tables, gateway_, model_for("ingest", "batch"),
                                        static_cast<size_t>(config_.workers));
        } catch (const Error& e) {
            throw StageError(std::string("ingest failed: ") + e.what());
        }

        fs::create_directories(kept_tables_path().parent_path());
        fs::path tmp = kept_tables_path();
        tmp += ".tmp";
        ingest::write_tables_jsonl(tmp, result.kept);
        fs::rename(tmp, kept_tables_path());
        write_json_file(work() / "ingest" / "report.json", json(result.report));
        finalize("ingest", result.kept.size(), 0, kept_tables_path());
    }

    void stage_schema() {
        if (!fs::exists(kept_tables_path())) {
            throw PreconditionError("ingest output missing: run the ingest stage first");
        }
        auto tables = ingest::load_tables_jsonl(kept_tables_path());
        fs::path demo_dir = config_.data_dir / "demos";

        std::set<std::string> seen_keys;
        for (const auto& table : tables) {
            if (!seen_keys.insert(sanitize_name(table.table_id)).second) {
                throw StageError("table ids collide in ingest output: " + table.table_id);
            }
        }

        size_t done = 0, failed = 0;
        for (const auto& table : tables) {
            run_item("schema", sanitize_name(table.table_id), done, failed, [&]() -> json {
                auto rng = util::rng_for(seed(), "schema:" + table.table_id);
                int k = schema::sample_table_count(rng);
                std::string model = model_for("schema", table.table_id);
                auto response =
                    gateway_.complete(schema::build_generation_prompt(table, k, model, demo_dir));
                if (response.texts.empty() || response.texts.front().empty()) {
                    throw ProviderError("schema generation returned no text");
                }
                auto parse = schema::parse_schema(response.texts.front());
                std::vector<std::string> enhance_log;
                auto enhanced = schema::enhance(parse.schema, gateway_, model, &enhance_log);
                return json{{"ok",
                             {{"table_id", table.table_id},
                              {"schema", json(enhanced)},
                              {"warnings", parse.warnings},
                              {"enhance_log", enhance_log},
                              {"model_id", model}}}};
            });
        }

        // Combine: unique database names in sorted item order, then schema
        // files and materialized databases, swept of leftovers from earlier
        // passes whose items have since changed.
        fs::path schemas_dir = work() / "schemas";
        fs::path dbs_dir = work() / "databases";
        fs::create_directories(schemas_dir);
        fs::create_directories(dbs_dir);

        std::set<std::string> used_names;
        std::vector<IndexEntry> entries;
        for (const auto& record : sorted_items("schema")) {
            if (!record.contains("ok")) continue;
            auto schema = record.at("ok").at("schema").get<schema::SchemaDef>();
            std::string base = sanitize_name(schema.db_name);
            std::string name = base;
            for (int n = 2; !used_names.insert(name).second; ++n) {
                name = base + "_" + std::to_string(n);
            }
            schema.db_name = name;

            fs::path schema_path = schemas_dir / (name + ".json");
            fs::path db_path = dbs_dir / (name + ".sqlite");
            std::string text = json(schema).dump(2) + "\n";
            bool fresh = !fs::exists(schema_path) || util::read_file(schema_path) != text;
            if (fresh) {
                util::write_file_atomic(schema_path, text);
                fs::remove(db_path);
            }
            if (!fs::exists(db_path)) schema::materialize(schema, db_path);
            entries.push_back(
                {record.at("ok").at("table_id").get<std::string>(), name, schema_path, db_path});
        }
        for (const auto& dir_entry : fs::directory_iterator(schemas_dir)) {
            if (!used_names.count(dir_entry.path().stem().string())) fs::remove(dir_entry.path());
        }
        for (const auto& dir_entry : fs::directory_iterator(dbs_dir)) {
            if (!used_names.count(dir_entry.path().stem().string())) fs::remove(dir_entry.path());
        }

        std::sort(entries.begin(), entries.end(),
                  [](const IndexEntry& a, const IndexEntry& b) { return a.db_name < b.db_name; });
        json index = json::array();
        for (const auto& entry : entries) {
            index.push_back({{"table_id", entry.table_id},
                             {"db_name", entry.db_name},
                             {"schema_path", entry.schema_path.string()},
                             {"db_path", entry.db_path.string()}});
        }
        write_json_file(index_path(), index);
        finalize("schema", done, failed, index_path());
    }

    void stage_query() {
        if (!fs::exists(index_path())) {
            throw PreconditionError("schema outputs missing: run the schema stage first");
        }
        auto index = load_index(index_path());
        auto levels = query::load_complexity_levels(config_.data_dir / "complexity_levels.json");
        auto catalog = query::load_function_catalog(config_.data_dir / "sqlite_functions.json");

        size_t done = 0, failed = 0;
        for (const auto& entry : index) {
            run_item("query", entry.db_name, done, failed, [&]() -> json {
                json sj = json::parse(util::read_file(entry.schema_path));
                auto schema = sj.get<schema::SchemaDef>();

                query::GenerateParams params;
                params.budget = config_.budget_per_db;
                params.n_samples = config_.n_samples;
                params.temperature = config_.temperature;
                params.timeout_ms = config_.timeout_ms;
                params.seed = seed();
                params.model_id = model_for("query", entry.db_name);

                query::GenerateStats stats;
                auto samples =
                    query::generate_for_db(schema, entry.db_path, gateway_, levels, catalog,
                                           params, &stats);
                json rows = json::array();
                for (const auto& sample : samples) rows.push_back(json(sample));
                return json{{"ok",
                             {{"samples", std::move(rows)},
                              {"model_id", params.model_id},
                              {"stats",
                               {{"n_requests", stats.n_requests},
                                {"n_raw_candidates", stats.n_raw_candidates},
                                {"n_request_failures", stats.n_request_failures},
                                {"n_retained", stats.post.n_retained},
                                {"n_non_select", stats.post.n_non_select},
                                {"n_exec_failures", stats.post.n_exec_failures},
                                {"n_template_dupes", stats.post.n_template_dupes}}}}}};
            });
        }

        std::vector<std::string> lines;
        for (const auto& record : sorted_items("query")) {
            if (!record.contains("ok")) continue;
            for (const auto& row : record.at("ok").at("samples")) lines.push_back(row.dump());
        }
        write_lines(sql_samples_path(), lines);
        finalize("query", done, failed, sql_samples_path());
    }

    void stage_question() {
        if (!fs::exists(sql_samples_path())) {
            throw PreconditionError("query outputs missing: run the query stage first");
        }
        if (!fs::exists(index_path())) {
            throw PreconditionError("schema outputs missing: run the schema stage first");
        }
        auto samples = query::load_samples(sql_samples_path());
        auto schemas = load_schemas();
        auto styles = question::load_styles(config_.data_dir / "language_styles.json");

        size_t done = 0, failed = 0;
        for (const auto& sample : samples) {
            std::string key = sample_key(sample);
            run_item("question", key, done, failed, [&]() -> json {
                auto schema_it = schemas.find(sample.db_name);
                if (schema_it == schemas.end()) {
                    throw StageError("no schema for database " + sample.db_name);
                }
                auto rng = util::rng_for(seed(), "style:" + key);
                const auto& style =
                    styles[std::uniform_int_distribution<size_t>(0, styles.size() - 1)(rng)];

                question::QuestionParams params;
                params.n_candidates = config_.n_samples;
                params.temperature = config_.temperature;
                params.model_id = model_for("question", key);
                params.embed_model_id = config_.embed_model_id;

                question::QuestionStats stats;
                auto candidates = question::generate_question(sample, schema_it->second, gateway_,
                                                              style, params, &stats);
                if (!candidates) {
                    return json{{"dropped", "no candidate parsed in style " + style.name}};
                }
                question::QuestionedSample row{sample, candidates->selected()};
                return json{{"ok",
                             {{"questioned", json(row)},
                              {"style", style.name},
                              {"model_id", params.model_id},
                              {"n_parse_failures", stats.n_parse_failures}}}};
            });
        }

        std::vector<std::string> lines;
        for (const auto& record : sorted_items("question")) {
            if (!record.contains("ok")) continue;
            lines.push_back(record.at("ok").at("questioned").dump());
        }
        write_lines(questions_path(), lines);
        finalize("question", done, failed, questions_path());
    }

    void stage_cot() {
        if (!fs::exists(questions_path())) {
            throw PreconditionError("question outputs missing: run the question stage first");
        }
        if (!fs::exists(index_path())) {
            throw PreconditionError("schema outputs missing: run the schema stage first");
        }
        auto rows = question::load_questioned(questions_path());
        auto schemas = load_schemas();
        auto db_paths = load_db_paths();

        size_t done = 0, failed = 0;
        for (const auto& row : rows) {
            std::string key = sample_key(row.sample);
            run_item("cot", key, done, failed, [&]() -> json {
                auto schema_it = schemas.find(row.sample.db_name);
                auto path_it = db_paths.find(row.sample.db_name);
                if (schema_it == schemas.end() || path_it == db_paths.end()) {
                    throw StageError("no database artifacts for " + row.sample.db_name);
                }

                cot::CotParams params;
                params.n_candidates = config_.n_samples;
                params.temperature = config_.temperature;
                params.model_id = model_for("cot", key);
                params.exec_timeout_ms = config_.timeout_ms;

                cot::CotStats stats;
                auto sample = cot::generate_cot(row, schema_it->second, path_it->second, gateway_,
                                                params, &stats);
                if (!sample) {
                    return json{{"dropped", "no reasoning candidate produced a usable query"}};
                }
                return json{{"ok",
                             {{"sample", sample->to_json()},
                              {"model_id", params.model_id},
                              {"n_no_final_sql", stats.n_no_final_sql},
                              {"n_exec_failures", stats.n_exec_failures}}}};
            });
        }

        std::vector<std::string> lines;
        for (const auto& record : sorted_items("cot")) {
            if (!record.contains("ok")) continue;
            lines.push_back(record.at("ok").at("sample").dump());
        }
        write_lines(data_samples_path(), lines);
        finalize("cot", done, failed, data_samples_path());
    }

    void stage_export() {
        if (!fs::exists(data_samples_path())) {
            throw PreconditionError("reasoning outputs missing: run the cot stage first");
        }
        if (!fs::exists(index_path())) {
            throw PreconditionError("schema outputs missing: run the schema stage first");
        }
        auto samples = cot::load_data_samples(data_samples_path());
        auto schemas = load_schemas();
        fs::path out_path = config_.output_dir / "train.jsonl";

        train::ExportReport report;
        try {
            fs::create_directories(config_.output_dir);
            report = train::export_examples(samples, schemas, out_path);
        } catch (const Error& e) {
            throw StageError(std::string("export failed: ") + e.what());
        }
        write_json_file(work() / "export" / "report.json",
                        json{{"n_input", report.n_input},
                             {"n_written", report.n_written},
                             {"n_gated", report.n_gated},
                             {"gate_log", report.gate_log}});
        finalize("export", report.n_written, report.n_gated, out_path);
    }

    PipelineConfig config_;
    llm::Gateway gateway_;
    RunManifest manifest_;
    fs::path manifest_path_;
};

std::vector<std::string> normalize_stages(const std::vector<std::string>& stages) {
    if (stages.empty()) return stage_order();
    std::set<std::string> requested;
    for (const auto& stage : stages) {
        if (std::find(stage_order().begin(), stage_order().end(), stage) == stage_order().end()) {
            throw ConfigError("unknown stage: " + stage);
        }
        requested.insert(stage);
    }
    std::vector<std::string> ordered;
    for (const auto& stage : stage_order()) {
        if (requested.count(stage)) ordered.push_back(stage);
    }
    return ordered;
}

}  // namespace

RunManifest run(const PipelineConfig& config, std::shared_ptr<llm::Provider> provider,
                const std::vector<std::string>& stages) {
    if (!provider) throw PreconditionError("run requires a provider");
    validate(config);
    fs::create_directories(config.work_dir);
    fs::create_directories(config.output_dir);

    fs::path manifest_path = config.work_dir / "manifest.json";
    std::string hash = config_hash(config);

    RunManifest manifest;
    if (fs::exists(manifest_path)) {
        manifest = load_manifest(manifest_path);
        if (manifest.config_hash != hash) {
            throw ConfigDrift("work dir belongs to config " + manifest.config_hash +
                              ", current config hashes to " + hash);
        }
    } else {
        manifest.run_id = "run-" + hash;
        manifest.config_hash = hash;
        for (const auto& stage : stage_order()) manifest.checkpoint(stage);
    }

    // resume() must be able to reload the exact config; snapshot one when the
    // caller's config never lived in a file.
    manifest.config_path = config.config_path;
    if (manifest.config_path.empty()) {
        fs::path snapshot = config.work_dir / "config.snapshot.json";
        util::write_file_atomic(snapshot, config_to_json(config).dump(2) + "\n");
        manifest.config_path = snapshot;
    }
    manifest.requested_stages = normalize_stages(stages);

    Runner runner(config, std::move(provider), std::move(manifest), manifest_path);
    return runner.execute(normalize_stages(stages));
}

RunManifest resume(const fs::path& manifest_path, std::shared_ptr<llm::Provider> provider) {
    if (!provider) throw PreconditionError("resume requires a provider");
    RunManifest manifest = load_manifest(manifest_path);
    PipelineConfig config = load_config(manifest.config_path);
    std::string hash = config_hash(config);
    if (hash != manifest.config_hash) {
        throw ConfigDrift("manifest pinned to config " + manifest.config_hash +
                          ", file now hashes to " + hash);
    }
    std::vector<std::string> stages =
        manifest.requested_stages.empty() ? stage_order() : manifest.requested_stages;
    Runner runner(std::move(config), std::move(provider), std::move(manifest), manifest_path);
    return runner.execute(stages);
}

json report(const fs::path& work_dir) {
    json out;

    size_t n_dbs = 0, n_tables = 0, n_columns = 0, n_pks = 0, n_fks = 0;
    fs::path schemas_dir = work_dir / "schemas";
    if (fs::exists(schemas_dir)) {
        std::vector<fs::path> paths;
        for (const auto& entry : fs::directory_iterator(schemas_dir)) {
            if (entry.path().extension() == ".json") paths.push_back(entry.path());
        }
        std::sort(paths.begin(), paths.end());
        for (const auto& path : paths) {
            json j = json::parse(util::read_file(path), nullptr, false);
            if (j.is_discarded()) continue;
            auto schema = j.get<schema::SchemaDef>();
            ++n_dbs;
            n_tables += schema.tables.size();
            n_fks += schema.foreign_keys.size();
            for (const auto& table : schema.tables) {
                n_columns += table.columns.size();
                if (!table.primary_key.empty()) ++n_pks;
            }
        }
    }
    auto per_db = [&](size_t total) { return n_dbs == 0 ? 0.0 : double(total) / double(n_dbs); };
    out["databases"] = {{"count", n_dbs},
                        {"tables_per_db", per_db(n_tables)},
                        {"columns_per_db", per_db(n_columns)},
                        {"primary_keys_per_db", per_db(n_pks)},
                        {"foreign_keys_per_db", per_db(n_fks)}};

    std::map<std::string, size_t> complexity;
    analysis::CorpusStats stats;
    fs::path samples_path = work_dir / "sql_samples.jsonl";
    if (fs::exists(samples_path)) {
        auto samples = query::load_samples(samples_path);
        std::vector<std::string> texts;
        for (const auto& sample : samples) {
            texts.push_back(sample.sql_text);
            ++complexity[sample.complexity.empty() ? "unlabeled" : sample.complexity];
        }
        stats = analysis::corpus_stats(texts);
    }
    out["sql"] = {{"count", stats.n_queries},
                  {"parse_failures", stats.n_parse_failures},
                  {"avg_tables", stats.avg_tables},
                  {"avg_joins", stats.avg_joins},
                  {"avg_functions", stats.avg_functions},
                  {"avg_tokens", stats.avg_tokens},
                  {"with_aggregation", stats.n_with_aggregation},
                  {"with_set_operator", stats.n_with_set_operator},
                  {"with_subquery", stats.n_with_subquery},
                  {"with_window_function", stats.n_with_window_function},
                  {"with_cte", stats.n_with_cte},
                  {"unique_skeletons", stats.n_unique_skeletons},
                  {"unique_functions", stats.n_unique_functions}};
    out["complexity"] = complexity;

    std::map<std::string, size_t> styles;
    size_t n_questions = 0;
    fs::path questions_path = work_dir / "questions.jsonl";
    if (fs::exists(questions_path)) {
        for (const auto& row : question::load_questioned(questions_path)) {
            ++styles[row.question.style];
            ++n_questions;
        }
    }
    out["styles"] = styles;
    out["questions"] = {{"count", n_questions}};
    return out;
}

}  // namespace sqlsynth::pipeline
