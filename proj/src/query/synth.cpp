#include "sqlsynth/query/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

#include "sqlsynth/analysis/features.hpp"
#include "sqlsynth/analysis/fingerprint.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::query {

namespace {

constexpr int64_t kValueProbeTimeoutMs = 5000;

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

// First k positions of a Fisher-Yates pass; preserves the rng-driven order.
std::vector<size_t> pick_indices(std::mt19937_64& rng, size_t n, size_t k) {
    std::vector<size_t> indices(n);
    for (size_t i = 0; i < n; ++i) indices[i] = i;
    k = std::min(k, n);
    for (size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<size_t> pick(i, n - 1);
        std::swap(indices[i], indices[pick(rng)]);
    }
    indices.resize(k);
    return indices;
}

}  // namespace

std::vector<ComplexityLevel> load_complexity_levels(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad complexity level file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array() || doc.size() != 4) {
        throw ConfigError("complexity level file must hold exactly four levels: " + path.string());
    }
    std::vector<ComplexityLevel> levels;
    for (const auto& item : doc) {
        ComplexityLevel level;
        level.name = item.value("name", "");
        level.criteria = item.value("criteria", "");
        level.example = item.value("example", "");
        if (level.name.empty() || level.criteria.empty() || level.example.empty()) {
            throw ConfigError("complexity level missing name, criteria, or example");
        }
        levels.push_back(std::move(level));
    }
    return levels;
}

FunctionCatalog load_function_catalog(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad function catalog " + path.string() + ": " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw ConfigError("function catalog must be a non-empty array: " + path.string());
    }
    FunctionCatalog catalog;
    std::unordered_set<std::string> seen;
    for (const auto& item : doc) {
        FunctionCatalog::Entry entry{item.value("name", ""), item.value("description", "")};
        if (entry.name.empty() || entry.description.empty()) {
            throw ConfigError("catalog entry missing name or description");
        }
        if (!seen.insert(entry.name).second) {
            throw ConfigError("duplicate catalog function: " + entry.name);
        }
        catalog.entries.push_back(std::move(entry));
    }
    return catalog;
}

void to_json(nlohmann::json& j, const SqlSample& s) {
    j = nlohmann::json{{"sql", s.sql_text},
                       {"db_name", s.db_name},
                       {"complexity", s.complexity},
                       {"requested_select_count", s.requested_select_count},
                       {"template", s.template_text},
                       {"skeleton", s.skeleton_text},
                       {"result_fingerprint", s.result_fingerprint}};
}

void from_json(const nlohmann::json& j, SqlSample& s) {
    s.sql_text = j.at("sql").get<std::string>();
    s.db_name = j.value("db_name", "");
    s.complexity = j.value("complexity", "");
    s.requested_select_count = j.value("requested_select_count", 1);
    s.template_text = j.value("template", "");
    s.skeleton_text = j.value("skeleton", "");
    s.result_fingerprint = j.value("result_fingerprint", "");
}

std::vector<SqlSample> load_samples(const std::filesystem::path& path) {
    std::vector<SqlSample> samples;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        try {
            samples.push_back(nlohmann::json::parse(line).get<SqlSample>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad sample line in " + path.string() + ": " + e.what());
        }
    }
    return samples;
}

void write_samples(const std::vector<SqlSample>& samples, const std::filesystem::path& path) {
    std::string body;
    for (const auto& sample : samples) {
        body += nlohmann::json(sample).dump();
        body += '\n';
    }
    util::write_file_atomic(path, body);
}

int sample_select_count_raw(std::mt19937_64& rng) {
    std::geometric_distribution<int> failures(kSelectCountP);  // counts on {0, 1, ...}
    return failures(rng) + 1;
}

int sample_select_count(std::mt19937_64& rng) {
    return std::min(sample_select_count_raw(rng), kSelectCountCap);
}

size_t sample_complexity_index(std::mt19937_64& rng, size_t n_levels) {
    std::uniform_int_distribution<size_t> pick(0, n_levels - 1);
    return pick(rng);
}

llm::ChatRequest build_sql_prompt(const schema::SchemaDef& schema,
                                  const std::filesystem::path& db_path,
                                  const FunctionCatalog& catalog,
                                  const ComplexityLevel& level,
                                  int select_count,
                                  std::mt19937_64& rng,
                                  const PromptParams& params) {
    if (schema.tables.empty()) {
        throw EmptyDatabase("no tables to generate queries for: " + schema.db_name);
    }

    std::ostringstream body;
    body << "## Task Instruction\n\n"
         << "Write one SQL query for the SQLite database described below. The query should "
         << "answer a realistic analytical question a user of this data might ask, and it must "
         << "follow the complexity level and the column constraint given in the sections that "
         << "follow. Use only tables and columns that exist in the schema.\n\n"
         << "Respond with a brief explanation followed by the final query in a fenced "
         << "```sql code block.\n\n";

    body << "## Database Schema\n\n" << schema::ddl_of(schema, /*with_comments=*/true) << "\n";

    body << "## Advanced SQL Functions\n\n"
         << "You may use these engine functions where they fit:\n\n";
    for (size_t idx : pick_indices(rng, catalog.entries.size(),
                                   static_cast<size_t>(params.n_functions))) {
        const auto& entry = catalog.entries[idx];
        body << "- " << entry.name << ": " << entry.description << "\n";
    }
    body << "\n";

    body << "## Database Values\n\n"
         << "Sampled stored values, useful for writing realistic predicates:\n\n";
    std::vector<std::pair<std::string, std::string>> columns;
    for (const auto& table : schema.tables) {
        for (const auto& column : table.columns) {
            columns.emplace_back(table.name, column.name);
        }
    }
    for (size_t idx : pick_indices(rng, columns.size(),
                                   static_cast<size_t>(params.n_value_columns))) {
        const auto& [table, column] = columns[idx];
        std::string probe = "SELECT DISTINCT " + quote_ident(column) + " FROM " +
                            quote_ident(table) + " WHERE " + quote_ident(column) +
                            " IS NOT NULL ORDER BY 1 LIMIT " +
                            std::to_string(params.max_values_per_column);
        auto outcome = exec::execute(db_path, probe, kValueProbeTimeoutMs);
        body << "- " << quote_ident(table) << "." << quote_ident(column) << ": ";
        if (!outcome.ok() || outcome.rows.empty()) {
            body << "(no stored values)";
        } else {
            for (size_t i = 0; i < outcome.rows.size(); ++i) {
                if (i > 0) body << ", ";
                body << outcome.rows[i][0].display();
            }
        }
        body << "\n";
    }
    body << "\n";

    body << "## SQL Complexity\n\n"
         << "Target level: " << level.name << ". " << level.criteria << "\n\n"
         << "Example:\n```sql\n" << level.example << "\n```\n\n";

    body << "## Column Selection Constraint\n\n"
         << "The outermost SELECT of the query must return exactly " << select_count
         << " column" << (select_count == 1 ? "" : "s") << ".\n";

    llm::ChatRequest request;
    request.messages = {
        {"system", "You are a senior data analyst who writes meaningful, production-quality "
                   "SQLite queries."},
        {"user", body.str()}};
    request.temperature = 0.8;
    request.n_samples = 1;
    return request;
}

std::vector<SqlSample> postprocess(const std::vector<Candidate>& candidates,
                                   const std::string& db_name,
                                   const std::filesystem::path& db_path,
                                   int64_t timeout_ms,
                                   PostprocessStats* stats) {
    PostprocessStats local;
    local.n_candidates = candidates.size();

    std::vector<const Candidate*> selects;
    for (const auto& candidate : candidates) {
        if (analysis::is_select_statement(candidate.sql_text)) {
            selects.push_back(&candidate);
        } else {
            ++local.n_non_select;
        }
    }

    // Execution filter runs concurrently (one connection each); survivors keep
    // their input position so the later dedup stays order-stable.
    struct Executed {
        const Candidate* candidate = nullptr;
        std::string fingerprint;
        bool ok = false;
    };
    std::vector<Executed> executed(selects.size());
    util::parallel_for(selects.size(), 8, [&](size_t i) {
        auto outcome = exec::execute(db_path, selects[i]->sql_text, timeout_ms);
        executed[i].candidate = selects[i];
        executed[i].ok = outcome.ok();
        if (outcome.ok()) executed[i].fingerprint = exec::fingerprint(outcome);
    });

    std::vector<SqlSample> retained;
    std::unordered_set<std::string> seen_templates;
    for (const auto& entry : executed) {
        if (!entry.ok) {
            ++local.n_exec_failures;
            continue;
        }
        std::string tpl = analysis::template_of(entry.candidate->sql_text);
        if (!seen_templates.insert(tpl).second) {
            ++local.n_template_dupes;
            continue;
        }
        SqlSample sample;
        sample.sql_text = entry.candidate->sql_text;
        sample.db_name = db_name;
        sample.complexity = entry.candidate->complexity;
        sample.requested_select_count = entry.candidate->requested_select_count;
        sample.template_text = std::move(tpl);
        sample.skeleton_text = analysis::skeleton_of(entry.candidate->sql_text);
        sample.result_fingerprint = entry.fingerprint;
        retained.push_back(std::move(sample));
    }
    local.n_retained = retained.size();
    if (stats) *stats = local;
    return retained;
}

std::vector<SqlSample> postprocess(const std::vector<std::string>& candidates,
                                   const std::string& db_name,
                                   const std::filesystem::path& db_path,
                                   int64_t timeout_ms,
                                   PostprocessStats* stats) {
    std::vector<Candidate> wrapped;
    wrapped.reserve(candidates.size());
    for (const auto& sql : candidates) wrapped.push_back({sql, "", 1});
    return postprocess(wrapped, db_name, db_path, timeout_ms, stats);
}

std::vector<SqlSample> generate_for_db(const schema::SchemaDef& schema,
                                       const std::filesystem::path& db_path,
                                       llm::Gateway& gateway,
                                       const std::vector<ComplexityLevel>& levels,
                                       const FunctionCatalog& catalog,
                                       const GenerateParams& params,
                                       GenerateStats* stats) {
    if (params.budget < 1) throw PreconditionError("budget must be at least 1");
    if (levels.empty()) throw PreconditionError("no complexity levels configured");

    GenerateStats local;
    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<size_t>(params.budget));

    int consecutive_failures = 0;
    for (size_t request_index = 0;
         candidates.size() < static_cast<size_t>(params.budget); ++request_index) {
        auto rng = util::rng_for(params.seed,
                                 schema.db_name + ":sqlgen:" + std::to_string(request_index));
        const auto& level = levels[sample_complexity_index(rng, levels.size())];
        int select_count = sample_select_count(rng);

        auto request = build_sql_prompt(schema, db_path, catalog, level, select_count, rng,
                                        params.prompt);
        request.model_id = params.model_id;
        request.temperature = params.temperature;
        request.max_output_tokens = params.max_output_tokens;
        size_t want = static_cast<size_t>(params.budget) - candidates.size();
        request.n_samples =
            static_cast<int>(std::min<size_t>(want, static_cast<size_t>(params.n_samples)));

        ++local.n_requests;
        std::vector<std::string> texts;
        try {
            texts = gateway.complete(request).texts;
        } catch (const Error&) {
            texts.clear();
        }
        if (texts.empty()) {
            ++local.n_request_failures;
            if (++consecutive_failures >= params.max_consecutive_failures) {
                throw StageError("abandoning " + schema.db_name + " after " +
                                 std::to_string(consecutive_failures) +
                                 " consecutive generation failures");
            }
            continue;
        }
        consecutive_failures = 0;
        if (texts.size() > static_cast<size_t>(request.n_samples)) {
            texts.resize(static_cast<size_t>(request.n_samples));
        }
        for (const auto& text : texts) {
            candidates.push_back({extract_sql(text), level.name, select_count});
        }
    }

    local.n_raw_candidates = candidates.size();
    auto samples =
        postprocess(candidates, schema.db_name, db_path, params.timeout_ms, &local.post);
    if (stats) *stats = local;
    return samples;
}

std::optional<std::string> last_fenced_sql(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::optional<std::string> last;
    bool inside = false;
    bool tag_ok = false;
    std::string block;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = util::trim(line);
        if (stripped.rfind("```", 0) == 0) {
            if (!inside) {
                inside = true;
                std::string tag = util::to_lower(util::trim(stripped.substr(3)));
                tag_ok = tag.empty() || tag == "sql" || tag == "sqlite";
                block.clear();
            } else {
                inside = false;
                if (tag_ok) {
                    std::string trimmed = util::trim(block);
                    if (!trimmed.empty()) last = trimmed;
                }
            }
            continue;
        }
        if (inside) {
            block += line;
            block += '\n';
        }
    }
    return last;
}

std::string extract_sql(const std::string& llm_text) {
    if (auto block = last_fenced_sql(llm_text)) return *block;
    return util::trim(llm_text);
}

}  // namespace sqlsynth::query
