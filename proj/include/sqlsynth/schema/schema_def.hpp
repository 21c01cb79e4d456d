#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace sqlsynth::schema {

struct ColumnDef {
    std::string name;
    std::string sql_type;
    std::string description;
    std::vector<std::string> example_values;  // at most two

    bool operator==(const ColumnDef&) const = default;
};

struct TableDef {
    std::string name;
    std::string description;
    std::vector<ColumnDef> columns;
    std::vector<std::string> primary_key;  // subset of column names

    const ColumnDef* find_column(const std::string& name) const;
    bool operator==(const TableDef&) const = default;
};

struct ForeignKey {
    std::string table;
    std::string column;
    std::string ref_table;
    std::string ref_column;

    bool operator==(const ForeignKey&) const = default;
    bool operator<(const ForeignKey& o) const {
        return std::tie(table, column, ref_table, ref_column) <
               std::tie(o.table, o.column, o.ref_table, o.ref_column);
    }
};

struct SchemaDef {
    std::string db_name;
    std::string scenario;  // the business setting the tables model
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;

    const TableDef* find_table(const std::string& name) const;
    bool operator==(const SchemaDef&) const = default;
};

// Enforces the structural invariants: non-empty db_name, unique table names,
// per-table unique column names with at least one column, primary keys that
// resolve, and foreign keys whose endpoints exist. Throws InvariantError.
void validate(const SchemaDef& schema);

void to_json(nlohmann::json& j, const ColumnDef& c);
void from_json(const nlohmann::json& j, ColumnDef& c);
void to_json(nlohmann::json& j, const TableDef& t);
void from_json(const nlohmann::json& j, TableDef& t);
void to_json(nlohmann::json& j, const ForeignKey& f);
void from_json(const nlohmann::json& j, ForeignKey& f);
void to_json(nlohmann::json& j, const SchemaDef& s);
void from_json(const nlohmann::json& j, SchemaDef& s);

// Canonical emitter: the fenced JSON block the prompts teach and the parser
// reads back. parse_schema(render_schema(s)).schema == s for valid s.
std::string render_schema(const SchemaDef& schema);

// CREATE TABLE statements in declaration order. with_comments adds the
// table/column descriptions as trailing "--" comments for prompt display.
std::string ddl_of(const SchemaDef& schema, bool with_comments);

}  // namespace sqlsynth::schema
