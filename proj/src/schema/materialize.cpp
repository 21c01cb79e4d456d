#include "sqlsynth/schema/materialize.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::schema {

namespace {

struct DbHandle {
    sqlite3* db = nullptr;
    ~DbHandle() {
        if (db) sqlite3_close(db);
    }
};

void exec_or_throw(sqlite3* db, const std::string& sql, const std::string& what) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string message = err ? err : "unknown engine error";
        sqlite3_free(err);
        throw MaterializeError(what + ": " + message);
    }
}

// SQLite affinity rules, abbreviated to what the warning needs.
enum class Affinity { Integer, Real, Numeric, Text, Blob };

Affinity affinity_of(const std::string& declared) {
    auto upper = util::to_upper(declared);
    if (upper.find("INT") != std::string::npos) return Affinity::Integer;
    if (upper.find("CHAR") != std::string::npos || upper.find("CLOB") != std::string::npos ||
        upper.find("TEXT") != std::string::npos) {
        return Affinity::Text;
    }
    if (upper.empty() || upper.find("BLOB") != std::string::npos) return Affinity::Blob;
    if (upper.find("REAL") != std::string::npos || upper.find("FLOA") != std::string::npos ||
        upper.find("DOUB") != std::string::npos) {
        return Affinity::Real;
    }
    return Affinity::Numeric;
}

bool looks_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0' && end != s.c_str();
}

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += "\"";
    return out;
}

}  // namespace

std::vector<std::string> fk_dependency_order(const SchemaDef& schema) {
    // edge: referencing table depends on referenced table
    std::map<std::string, std::set<std::string>> depends_on;
    for (const auto& t : schema.tables) depends_on[t.name];
    for (const auto& fk : schema.foreign_keys) {
        if (fk.table != fk.ref_table) depends_on[fk.table].insert(fk.ref_table);
    }

    std::vector<std::string> order;
    std::set<std::string> placed;
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& t : schema.tables) {
            if (placed.count(t.name)) continue;
            bool ready = true;
            for (const auto& dep : depends_on[t.name]) {
                if (!placed.count(dep)) ready = false;
            }
            if (ready) {
                order.push_back(t.name);
                placed.insert(t.name);
                progress = true;
            }
        }
    }
    // cycles: take the rest in declaration order
    for (const auto& t : schema.tables) {
        if (!placed.count(t.name)) order.push_back(t.name);
    }
    return order;
}

MaterializeReport materialize(const SchemaDef& schema, const std::filesystem::path& path) {
    validate(schema);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::remove(path);

    MaterializeReport report;
    try {
        DbHandle handle;
        if (sqlite3_open(path.string().c_str(), &handle.db) != SQLITE_OK) {
            throw MaterializeError("cannot create database at " + path.string());
        }
        sqlite3* db = handle.db;
        exec_or_throw(db, "PRAGMA foreign_keys = ON;", "pragma");

        auto order = fk_dependency_order(schema);
        for (const auto& name : order) {
            const TableDef& t = *schema.find_table(name);
            SchemaDef single;
            single.db_name = schema.db_name;
            single.tables = {t};
            for (const auto& fk : schema.foreign_keys) {
                if (fk.table == name) single.foreign_keys.push_back(fk);
            }
            exec_or_throw(db, ddl_of(single, /*with_comments=*/false),
                          "create table " + name + " failed");
        }

        for (const auto& name : order) {
            const TableDef& t = *schema.find_table(name);
            size_t n_rows = 0;
            for (const auto& c : t.columns) n_rows = std::max(n_rows, c.example_values.size());
            n_rows = std::min<size_t>(n_rows, 2);
            if (n_rows == 0) continue;

            std::string sql = "INSERT INTO " + quote_ident(t.name) + " VALUES (";
            for (size_t i = 0; i < t.columns.size(); ++i) sql += i ? ",?" : "?";
            sql += ")";
            sqlite3_stmt* stmt = nullptr;
            if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
                throw MaterializeError("insert prepare failed for " + t.name + ": " +
                                       sqlite3_errmsg(db));
            }
            for (size_t r = 0; r < n_rows; ++r) {
                sqlite3_reset(stmt);
                sqlite3_clear_bindings(stmt);
                for (size_t c = 0; c < t.columns.size(); ++c) {
                    const auto& examples = t.columns[c].example_values;
                    if (r >= examples.size() || examples[r] == "NULL") {
                        sqlite3_bind_null(stmt, int(c + 1));
                        continue;
                    }
                    const std::string& value = examples[r];
                    sqlite3_bind_text(stmt, int(c + 1), value.c_str(), int(value.size()),
                                      SQLITE_TRANSIENT);
                    auto aff = affinity_of(t.columns[c].sql_type);
                    if ((aff == Affinity::Integer || aff == Affinity::Real ||
                         aff == Affinity::Numeric) &&
                        !looks_numeric(value)) {
                        report.warnings.push_back("value '" + value + "' kept as text in " +
                                                  t.name + "." + t.columns[c].name + " (" +
                                                  t.columns[c].sql_type + ")");
                    }
                }
                if (sqlite3_step(stmt) != SQLITE_DONE) {
                    std::string message = sqlite3_errmsg(db);
                    sqlite3_finalize(stmt);
                    throw MaterializeError("example row insert failed for " + t.name + ": " +
                                           message);
                }
            }
            sqlite3_finalize(stmt);
        }

        // full integrity sweep over the inserted example rows
        sqlite3_stmt* check = nullptr;
        if (sqlite3_prepare_v2(db, "PRAGMA foreign_key_check;", -1, &check, nullptr) !=
            SQLITE_OK) {
            throw MaterializeError(std::string("integrity check failed to run: ") +
                                   sqlite3_errmsg(db));
        }
        std::vector<std::string> violations;
        while (sqlite3_step(check) == SQLITE_ROW) {
            const unsigned char* table = sqlite3_column_text(check, 0);
            const unsigned char* parent = sqlite3_column_text(check, 2);
            violations.push_back(std::string(reinterpret_cast<const char*>(table)) + " -> " +
                                 (parent ? reinterpret_cast<const char*>(parent) : "?"));
        }
        sqlite3_finalize(check);
        if (!violations.empty()) {
            throw MaterializeError("foreign key violations: " + util::join(violations, ", "));
        }
    } catch (...) {
        std::filesystem::remove(path);
        throw;
    }
    return report;
}

SchemaDef introspect(const std::filesystem::path& db_path) {
    DbHandle handle;
    if (sqlite3_open_v2(db_path.string().c_str(), &handle.db, SQLITE_OPEN_READONLY, nullptr) !=
        SQLITE_OK) {
        throw IoError("cannot open database " + db_path.string());
    }
    sqlite3* db = handle.db;

    SchemaDef schema;
    schema.db_name = db_path.stem().string();

    sqlite3_stmt* stmt = nullptr;
    sqlite3_prepare_v2(db,
                       "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE "
                       "'sqlite_%' ORDER BY rowid",
                       -1, &stmt, nullptr);
    std::vector<std::string> names;
    while (sqlite3_step(stmt) == SQLITE_ROW) {
        names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0)));
    }
    sqlite3_finalize(stmt);

    for (const auto& name : names) {
        TableDef t;
        t.name = name;
        std::string info = "PRAGMA table_info(" + quote_ident(name) + ")";
        sqlite3_prepare_v2(db, info.c_str(), -1, &stmt, nullptr);
        std::vector<std::pair<int, std::string>> pk_slots;  // (pk position, column)
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            ColumnDef c;
            c.name = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 1));
            const auto* type = sqlite3_column_text(stmt, 2);
            c.sql_type = type ? reinterpret_cast<const char*>(type) : "";
            int pk = sqlite3_column_int(stmt, 5);
            if (pk > 0) pk_slots.emplace_back(pk, c.name);
            t.columns.push_back(std::move(c));
        }
        sqlite3_finalize(stmt);
        std::sort(pk_slots.begin(), pk_slots.end());
        for (auto& [pos, col] : pk_slots) t.primary_key.push_back(col);

        std::string fks = "PRAGMA foreign_key_list(" + quote_ident(name) + ")";
        sqlite3_prepare_v2(db, fks.c_str(), -1, &stmt, nullptr);
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            ForeignKey fk;
            fk.table = name;
            fk.ref_table = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 2));
            fk.column = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 3));
            const auto* to = sqlite3_column_text(stmt, 4);
            fk.ref_column = to ? reinterpret_cast<const char*>(to) : "";
            schema.foreign_keys.push_back(std::move(fk));
        }
        sqlite3_finalize(stmt);
        schema.tables.push_back(std::move(t));
    }
    return schema;
}

}  // namespace sqlsynth::schema
