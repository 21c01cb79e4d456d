#include "sqlsynth/ingest/web_table.hpp"

#include <fstream>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::ingest {

using nlohmann::json;

void validate(const WebTable& table) {
    if (table.headers.empty()) throw PreconditionError("table " + table.table_id + " has no headers");
    for (const auto& row : table.rows) {
        if (row.size() != table.headers.size()) {
            throw PreconditionError("table " + table.table_id + " has a ragged row (" +
                                    std::to_string(row.size()) + " cells, " +
                                    std::to_string(table.headers.size()) + " headers)");
        }
    }
}

void to_json(json& j, const WebTable& t) {
    j = json{{"table_id", t.table_id},
             {"headers", t.headers},
             {"rows", t.rows},
             {"source_ref", t.source_ref}};
}

void from_json(const json& j, WebTable& t) {
    j.at("table_id").get_to(t.table_id);
    j.at("headers").get_to(t.headers);
    j.at("rows").get_to(t.rows);
    t.source_ref = j.value("source_ref", "");
}

std::vector<WebTable> load_tables_jsonl(const std::filesystem::path& path) {
    std::vector<WebTable> tables;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        WebTable t = json::parse(line).get<WebTable>();
        validate(t);
        tables.push_back(std::move(t));
    }
    return tables;
}

void write_tables_jsonl(const std::filesystem::path& path, const std::vector<WebTable>& tables) {
    std::string out;
    for (const auto& t : tables) {
        out += json(t).dump();
        out += '\n';
    }
    util::write_file_atomic(path, out);
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    size_t i = 0;
    auto end_cell = [&] {
        row.push_back(cell);
        cell.clear();
    };
    auto end_row = [&] {
        end_cell();
        rows.push_back(row);
        row.clear();
    };
    while (i < text.size()) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n') {
            if (!cell.empty() || !row.empty()) end_row();
        } else if (c != '\r') {
            cell += c;
        }
        ++i;
    }
    if (!cell.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace

WebTable load_table_csv(const std::filesystem::path& path) {
    auto rows = parse_csv(util::read_file(path));
    if (rows.empty()) throw ParseError("empty csv: " + path.string());
    WebTable t;
    t.table_id = path.stem().string();
    t.source_ref = path.string();
    t.headers = rows.front();
    for (size_t i = 1; i < rows.size(); ++i) {
        rows[i].resize(t.headers.size());  // pad short rows; csv edges are common
        t.rows.push_back(std::move(rows[i]));
    }
    validate(t);
    return t;
}

std::string render_table(const WebTable& table, size_t max_rows) {
    std::string out = "| " + util::join(table.headers, " | ") + " |\n|";
    for (size_t i = 0; i < table.headers.size(); ++i) out += " --- |";
    out += "\n";
    size_t limit = std::min(max_rows, table.rows.size());
    for (size_t i = 0; i < limit; ++i) {
        out += "| " + util::join(table.rows[i], " | ") + " |\n";
    }
    return out;
}

}  // namespace sqlsynth::ingest
