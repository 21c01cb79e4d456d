#include "sqlsynth/schema/schema_def.hpp"

#include <unordered_set>

#include "sqlsynth/errors.hpp"

namespace sqlsynth::schema {

using nlohmann::json;

const ColumnDef* TableDef::find_column(const std::string& target) const {
    for (const auto& c : columns) {
        if (c.name == target) return &c;
    }
    return nullptr;
}

const TableDef* SchemaDef::find_table(const std::string& target) const {
    for (const auto& t : tables) {
        if (t.name == target) return &t;
    }
    return nullptr;
}

void validate(const SchemaDef& schema) {
    if (schema.db_name.empty()) throw InvariantError("schema has no db_name");
    if (schema.tables.empty()) throw InvariantError("schema " + schema.db_name + " has no tables");

    std::unordered_set<std::string> table_names;
    for (const auto& t : schema.tables) {
        if (t.name.empty()) throw InvariantError("unnamed table in " + schema.db_name);
        if (!table_names.insert(t.name).second) {
            throw InvariantError("duplicate table name: " + t.name);
        }
        if (t.columns.empty()) throw InvariantError("table " + t.name + " has no columns");
        std::unordered_set<std::string> column_names;
        for (const auto& c : t.columns) {
            if (c.name.empty()) throw InvariantError("unnamed column in " + t.name);
            if (c.sql_type.empty()) {
                throw InvariantError("column " + t.name + "." + c.name + " has no type");
            }
            if (!column_names.insert(c.name).second) {
                throw InvariantError("duplicate column " + t.name + "." + c.name);
            }
            if (c.example_values.size() > 2) {
                throw InvariantError("column " + t.name + "." + c.name + " has >2 example values");
            }
        }
        for (const auto& pk : t.primary_key) {
            if (!column_names.count(pk)) {
                throw InvariantError("primary key " + t.name + "." + pk + " is not a column");
            }
        }
    }
    for (const auto& fk : schema.foreign_keys) {
        const auto* from = schema.find_table(fk.table);
        const auto* to = schema.find_table(fk.ref_table);
        if (!from || !from->find_column(fk.column) || !to || !to->find_column(fk.ref_column)) {
            throw InvariantError("dangling foreign key " + fk.table + "." + fk.column + " -> " +
                                 fk.ref_table + "." + fk.ref_column);
        }
    }
}

void to_json(json& j, const ColumnDef& c) {
    j = json{{"name", c.name},
             {"type", c.sql_type},
             {"description", c.description},
             {"examples", c.example_values}};
}

void from_json(const json& j, ColumnDef& c) {
    j.at("name").get_to(c.name);
    c.sql_type = j.value("type", "TEXT");
    c.description = j.value("description", "");
    if (j.contains("examples")) {
        for (const auto& v : j.at("examples")) {
            // tolerate numbers/booleans in example slots; store their text
            c.example_values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            if (c.example_values.size() == 2) break;
        }
    }
}

void to_json(json& j, const TableDef& t) {
    j = json{{"name", t.name},
             {"description", t.description},
             {"columns", t.columns},
             {"primary_key", t.primary_key}};
}

void from_json(const json& j, TableDef& t) {
    j.at("name").get_to(t.name);
    t.description = j.value("description", "");
    if (j.contains("columns")) j.at("columns").get_to(t.columns);
    if (j.contains("primary_key")) {
        if (j.at("primary_key").is_string()) {
            t.primary_key = {j.at("primary_key").get<std::string>()};
        } else {
            j.at("primary_key").get_to(t.primary_key);
        }
    }
}

void to_json(json& j, const ForeignKey& f) {
    j = json{{"table", f.table},
             {"column", f.column},
             {"ref_table", f.ref_table},
             {"ref_column", f.ref_column}};
}

void from_json(const json& j, ForeignKey& f) {
    j.at("table").get_to(f.table);
    j.at("column").get_to(f.column);
    j.at("ref_table").get_to(f.ref_table);
    j.at("ref_column").get_to(f.ref_column);
}

void to_json(json& j, const SchemaDef& s) {
    j = json{{"db_name", s.db_name},
             {"scenario", s.scenario},
             {"tables", s.tables},
             {"foreign_keys", s.foreign_keys}};
}

void from_json(const json& j, SchemaDef& s) {
    j.at("db_name").get_to(s.db_name);
    s.scenario = j.value("scenario", "");
    if (j.contains("tables")) j.at("tables").get_to(s.tables);
    if (j.contains("foreign_keys")) j.at("foreign_keys").get_to(s.foreign_keys);
}

std::string render_schema(const SchemaDef& schema) {
    return "```json\n" + json(schema).dump(2) + "\n```";
}

namespace {

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += "\"";
    return out;
}

std::string quoted_list(const std::vector<std::string>& names) {
    std::string out;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += quote_ident(names[i]);
    }
    return out;
}

}  // namespace

std::string ddl_of(const SchemaDef& schema, bool with_comments) {
    std::string out;
    for (const auto& t : schema.tables) {
        if (!out.empty()) out += "\n";
        out += "CREATE TABLE " + quote_ident(t.name) + " (";
        if (with_comments && !t.description.empty()) out += " -- " + t.description;
        out += "\n";

        std::vector<std::string> body;
        for (const auto& c : t.columns) {
            std::string line = "  " + quote_ident(c.name) + " " + c.sql_type;
            body.push_back(line);
        }
        if (!t.primary_key.empty()) {
            body.push_back("  PRIMARY KEY (" + quoted_list(t.primary_key) + ")");
        }
        for (const auto& fk : schema.foreign_keys) {
            if (fk.table != t.name) continue;
            body.push_back("  FOREIGN KEY (" + quote_ident(fk.column) + ") REFERENCES " +
                           quote_ident(fk.ref_table) + " (" + quote_ident(fk.ref_column) + ")");
        }
        for (size_t i = 0; i < body.size(); ++i) {
            out += body[i];
            if (i + 1 < body.size()) out += ",";
            if (with_comments && i < t.columns.size() && !t.columns[i].description.empty()) {
                out += " -- " + t.columns[i].description;
            }
            out += "\n";
        }
        out += ");\n";
    }
    return out;
}

}  // namespace sqlsynth::schema
