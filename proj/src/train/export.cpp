#include "sqlsynth/train/export.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>

#include "sqlsynth/exec/exec_engine.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::train {

namespace {

constexpr int64_t kProbeTimeoutMs = 5000;
constexpr size_t kMaxProbedValues = 500;  // distinct text values scanned per column
constexpr size_t kMaxLiteralLen = 64;     // comment rendering cap per literal

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

std::string quote_text(const std::string& name) {
    std::string out = "'";
    for (char c : name) {
        out += c;
        if (c == '\'') out += '\'';
    }
    return out + "'";
}

exec::ExecOutcome probe(const std::filesystem::path& db_path, const std::string& sql) {
    auto outcome = exec::execute(db_path, sql, kProbeTimeoutMs);
    if (!outcome.ok()) {
        throw PreconditionError("value probe failed on " + db_path.string() + ": " +
                                outcome.error_text);
    }
    return outcome;
}

// Comments must stay on one line and reasonably short to keep the DDL readable.
std::string comment_safe(const std::string& literal) {
    std::string out;
    for (char c : literal) out += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
    if (out.size() > kMaxLiteralLen) out = out.substr(0, kMaxLiteralLen - 3) + "...";
    return out;
}

}  // namespace

std::vector<std::string> representative_values(const std::filesystem::path& db_path,
                                               const std::string& table,
                                               const std::string& column) {
    // An unknown double-quoted name silently degrades to a string literal, so
    // the column's existence has to be checked up front.
    auto known = probe(db_path, "SELECT name FROM pragma_table_info(" + quote_text(table) +
                                    ") WHERE name = " + quote_text(column));
    if (known.rows.empty()) {
        throw PreconditionError("no column " + table + "." + column + " in " +
                                db_path.string());
    }

    std::string sql = "SELECT " + quote_ident(column) + ", COUNT(*) FROM " +
                      quote_ident(table) + " WHERE " + quote_ident(column) +
                      " IS NOT NULL GROUP BY " + quote_ident(column);
    auto outcome = probe(db_path, sql);

    std::vector<std::pair<uint64_t, std::string>> counted;  // (count, literal)
    counted.reserve(outcome.rows.size());
    for (const auto& row : outcome.rows) {
        counted.emplace_back(std::stoull(row[1].display()), row[0].display());
    }
    std::sort(counted.begin(), counted.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    std::vector<std::string> values;
    for (size_t i = 0; i < counted.size() && i < 2; ++i) values.push_back(counted[i].second);
    return values;
}

std::vector<ValueMatch> relevant_values(const std::string& question_text,
                                        const std::filesystem::path& db_path,
                                        const MatchParams& params) {
    const std::string question = util::to_lower(question_text);
    std::vector<ValueMatch> matches;

    auto tables = probe(db_path,
                        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT "
                        "LIKE 'sqlite!_%' ESCAPE '!' ORDER BY name");
    for (const auto& table_row : tables.rows) {
        auto table = table_row[0].text_value();
        if (!table) continue;

        auto columns = probe(db_path, "SELECT name FROM pragma_table_info(" +
                                          quote_text(*table) + ") ORDER BY cid");
        for (const auto& column_row : columns.rows) {
            auto column = column_row[0].text_value();
            if (!column) continue;

            auto values = probe(db_path, "SELECT DISTINCT " + quote_ident(*column) +
                                             " FROM " + quote_ident(*table) + " WHERE " +
                                             quote_ident(*column) +
                                             " IS NOT NULL ORDER BY 1 LIMIT " +
                                             std::to_string(kMaxProbedValues));
            std::vector<ValueMatch> column_matches;
            for (const auto& value_row : values.rows) {
                auto text = value_row[0].text_value();
                if (!text || text->empty()) continue;
                std::string lowered = util::to_lower(*text);
                size_t overlap = util::longest_common_substring(lowered, question);
                double threshold = std::max(static_cast<double>(params.floor),
                                            params.ratio * lowered.size());
                if (static_cast<double>(overlap) < threshold) continue;
                column_matches.push_back({*table, *column, *text, overlap});
            }
            std::sort(column_matches.begin(), column_matches.end(),
                      [](const ValueMatch& a, const ValueMatch& b) {
                          if (a.match_len != b.match_len) return a.match_len > b.match_len;
                          return a.value < b.value;
                      });
            if (column_matches.size() > params.per_column)
                column_matches.resize(params.per_column);
            matches.insert(matches.end(), column_matches.begin(), column_matches.end());
        }
    }
    return matches;
}

SchemaRendering render_schema(const schema::SchemaDef& schema,
                              const std::filesystem::path& db_path,
                              const std::string& question_text, const MatchParams& params) {
    auto matches = relevant_values(question_text, db_path, params);

    SchemaRendering rendering;
    std::string out;
    for (const auto& table : schema.tables) {
        if (!out.empty()) out += "\n";
        out += "CREATE TABLE " + quote_ident(table.name) + " (";
        if (!table.description.empty()) out += " -- " + comment_safe(table.description);
        out += "\n";

        std::vector<std::string> body;
        std::vector<std::string> comments;
        for (const auto& column : table.columns) {
            ColumnComment comment;
            comment.table = table.name;
            comment.column = column.name;
            comment.description = column.description;
            comment.representative = representative_values(db_path, table.name, column.name);
            for (const auto& match : matches) {
                if (match.table == table.name && match.column == column.name)
                    comment.matched.push_back(quote_text(match.value));
            }
            rendering.comments.push_back(comment);

            auto safe_list = [](const std::vector<std::string>& literals) {
                std::vector<std::string> out;
                for (const auto& literal : literals) out.push_back(comment_safe(literal));
                return util::join(out, ", ");
            };
            std::vector<std::string> segments;
            if (!comment.description.empty())
                segments.push_back(comment_safe(comment.description));
            if (!comment.representative.empty())
                segments.push_back("values: " + safe_list(comment.representative));
            if (!comment.matched.empty())
                segments.push_back("question matches: " + safe_list(comment.matched));

            body.push_back("  " + quote_ident(column.name) + " " + column.sql_type);
            comments.push_back(util::join(segments, " | "));
        }
        if (!table.primary_key.empty()) {
            std::vector<std::string> quoted;
            for (const auto& name : table.primary_key) quoted.push_back(quote_ident(name));
            body.push_back("  PRIMARY KEY (" + util::join(quoted, ", ") + ")");
            comments.push_back("");
        }
        for (const auto& fk : schema.foreign_keys) {
            if (fk.table != table.name) continue;
            body.push_back("  FOREIGN KEY (" + quote_ident(fk.column) + ") REFERENCES " +
                           quote_ident(fk.ref_table) + " (" + quote_ident(fk.ref_column) +
                           ")");
            comments.push_back("");
        }
        for (size_t i = 0; i < body.size(); ++i) {
            out += body[i];
            if (i + 1 < body.size()) out += ",";
            if (!comments[i].empty()) out += " -- " + comments[i];
            out += "\n";
        }
        out += ");\n";
    }
    rendering.ddl_text = out;
    return rendering;
}

nlohmann::json TrainExample::to_json() const {
    return nlohmann::json{{"input", input_text}, {"output", output_text}, {"meta", meta}};
}

TrainExample TrainExample::from_json(const nlohmann::json& j) {
    TrainExample e;
    e.input_text = j.at("input").get<std::string>();
    e.output_text = j.at("output").get<std::string>();
    e.meta = j.value("meta", nlohmann::json::object());
    return e;
}

TrainExample make_example(const cot::DataSample& sample, const schema::SchemaDef& schema,
                          const MatchParams& params) {
    auto final_sql = cot::extract_final_sql(sample.cot);
    if (final_sql != std::optional<std::string>(sample.sql)) {
        throw InvariantError("reasoning trace for db " + sample.db_name +
                             " does not end in the sample's SQL");
    }

    auto rendering = render_schema(schema, sample.db_path, sample.question, params);

    std::ostringstream input;
    input << "## Database Schema\n\n"
          << rendering.ddl_text << "\n## Question\n\n"
          << sample.question << "\n";
    if (!sample.external_knowledge.empty())
        input << "\nExternal knowledge: " << sample.external_knowledge << "\n";

    TrainExample example;
    example.input_text = input.str();
    example.output_text = sample.cot;
    example.meta = {{"db_name", sample.db_name}, {"db_path", sample.db_path},
                    {"style", sample.style},     {"complexity", sample.complexity},
                    {"sql", sample.sql},         {"provenance", sample.provenance}};
    return example;
}

ExportReport export_examples(const std::vector<cot::DataSample>& samples,
                             const std::map<std::string, schema::SchemaDef>& schemas,
                             const std::filesystem::path& out_path,
                             const MatchParams& params) {
    std::vector<std::optional<TrainExample>> built(samples.size());
    std::vector<std::string> reasons(samples.size());

    util::parallel_for(samples.size(), 8, [&](size_t i) {
        const auto& sample = samples[i];
        auto it = schemas.find(sample.db_name);
        if (it == schemas.end()) {
            reasons[i] = "no schema for db " + sample.db_name;
            return;
        }
        try {
            built[i] = make_example(sample, it->second, params);
        } catch (const Error& e) {
            reasons[i] = e.what();
        }
    });

    ExportReport report;
    report.n_input = samples.size();
    std::string body;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (built[i]) {
            body += built[i]->to_json().dump();
            body += '\n';
            ++report.n_written;
        } else {
            ++report.n_gated;
            report.gate_log.push_back(reasons[i]);
        }
    }
    util::write_file_atomic(out_path, body);
    return report;
}

std::vector<TrainExample> load_examples(const std::filesystem::path& path) {
    std::vector<TrainExample> rows;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        rows.push_back(TrainExample::from_json(nlohmann::json::parse(line)));
    }
    return rows;
}

}  // namespace sqlsynth::train
