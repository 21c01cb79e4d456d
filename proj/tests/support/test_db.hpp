#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace sqlsynth::testing {

// Creates (or replaces) a SQLite file from a DDL/DML script. Test-only:
// production code opens databases read-only.
inline std::filesystem::path make_db(const std::filesystem::path& path,
                                     const std::string& script) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::remove(path);
    sqlite3* db = nullptr;
    if (sqlite3_open(path.string().c_str(), &db) != SQLITE_OK) {
        throw std::runtime_error("test db open failed: " + path.string());
    }
    char* err = nullptr;
    if (sqlite3_exec(db, script.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown";
        sqlite3_free(err);
        sqlite3_close(db);
        throw std::runtime_error("test db script failed: " + msg);
    }
    sqlite3_close(db);
    return path;
}

inline std::filesystem::path test_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sqlsynth_tests" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace sqlsynth::testing
