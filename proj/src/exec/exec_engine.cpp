#include "sqlsynth/exec/exec_engine.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "sqlsynth/util.hpp"

namespace sqlsynth::exec {

namespace {

constexpr double kRealEpsilonScale = 1e6;  // 6 decimal places

std::string encode_real(double v) {
    double rounded = std::round(v * kRealEpsilonScale) / kRealEpsilonScale;
    if (rounded == 0.0) rounded = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "R:%.6f", rounded);
    return buf;
}

struct TimeoutGuard {
    std::chrono::steady_clock::time_point deadline;
    bool fired = false;
};

int progress_callback(void* ctx) {
    auto* guard = static_cast<TimeoutGuard*>(ctx);
    if (std::chrono::steady_clock::now() >= guard->deadline) {
        guard->fired = true;
        return 1;  // interrupt the statement
    }
    return 0;
}

}  // namespace

Cell Cell::null() { return Cell{"N"}; }

Cell Cell::integer(int64_t v) { return Cell{"I:" + std::to_string(v)}; }

Cell Cell::real(double v) {
    // integral reals collapse to integers
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9.007199254740992e15) {
        return integer(static_cast<int64_t>(v));
    }
    if (!std::isfinite(v)) return Cell{std::string("R:") + (v > 0 ? "inf" : (v < 0 ? "-inf" : "nan"))};
    return Cell{encode_real(v)};
}

Cell Cell::text(std::string v) {
    while (!v.empty() && v.back() == '\0') v.pop_back();
    return Cell{"T:" + v};
}

Cell Cell::blob(const void* data, size_t size) {
    static const char* digits = "0123456789abcdef";
    std::string out = "B:";
    const auto* bytes = static_cast<const unsigned char*>(data);
    out.reserve(2 + size * 2);
    for (size_t i = 0; i < size; ++i) {
        out += digits[bytes[i] >> 4];
        out += digits[bytes[i] & 0xf];
    }
    return Cell{out};
}

std::string Cell::display() const {
    if (encoded == "N") return "NULL";
    if (encoded.size() >= 2 && encoded[1] == ':') {
        std::string body = encoded.substr(2);
        switch (encoded[0]) {
            case 'I':
            case 'R':
                return body;
            case 'T': {
                std::string quoted = "'";
                for (char c : body) {
                    quoted += c;
                    if (c == '\'') quoted += '\'';
                }
                return quoted + "'";
            }
            case 'B':
                return "x'" + body + "'";
        }
    }
    return encoded;
}

std::optional<std::string> Cell::text_value() const {
    if (encoded.size() >= 2 && encoded[0] == 'T' && encoded[1] == ':')
        return encoded.substr(2);
    return std::nullopt;
}

ExecOutcome execute(const std::filesystem::path& db_path, const std::string& sql,
                    int64_t timeout_ms) {
    auto started = std::chrono::steady_clock::now();
    ExecOutcome out;

    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(db_path.string().c_str(), &db, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        out.status = ExecStatus::Error;
        out.error_class = "prepare";
        out.error_text = db ? sqlite3_errmsg(db) : "cannot open database";
        if (db) sqlite3_close(db);
        return out;
    }

    TimeoutGuard guard{started + std::chrono::milliseconds(timeout_ms)};
    sqlite3_progress_handler(db, 1000, progress_callback, &guard);

    auto finish = [&](ExecOutcome result) {
        sqlite3_close(db);
        result.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
        return result;
    };

    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
        out.error_class = guard.fired ? "timeout" : "prepare";
        if (guard.fired) {
            out.status = ExecStatus::Timeout;
            return finish(out);
        }
        out.status = ExecStatus::Error;
        out.error_text = sqlite3_errmsg(db);
        return finish(out);
    }
    if (!stmt) {
        out.status = ExecStatus::Error;
        out.error_class = "prepare";
        out.error_text = "no statement";
        return finish(out);
    }

    // reject trailing statements; comments and whitespace are fine
    if (tail && *tail) {
        sqlite3_stmt* extra = nullptr;
        const char* tail2 = nullptr;
        int rc2 = sqlite3_prepare_v2(db, tail, -1, &extra, &tail2);
        bool has_more = (rc2 == SQLITE_OK && extra != nullptr);
        if (extra) sqlite3_finalize(extra);
        if (has_more || rc2 != SQLITE_OK) {
            sqlite3_finalize(stmt);
            out.status = ExecStatus::Error;
            out.error_class = "multi_statement";
            out.error_text = "multiple statements in one request";
            return finish(out);
        }
    }

    out.column_count = sqlite3_column_count(stmt);
    for (;;) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            if (out.rows.size() >= kMaxResultRows) {
                sqlite3_finalize(stmt);
                out.status = ExecStatus::Error;
                out.error_class = "oversized";
                out.error_text = "oversized result";
                out.rows.clear();
                return finish(out);
            }
            std::vector<Cell> row;
            row.reserve(static_cast<size_t>(out.column_count));
            for (int c = 0; c < out.column_count; ++c) {
                switch (sqlite3_column_type(stmt, c)) {
                    case SQLITE_NULL:
                        row.push_back(Cell::null());
                        break;
                    case SQLITE_INTEGER:
                        row.push_back(Cell::integer(sqlite3_column_int64(stmt, c)));
                        break;
                    case SQLITE_FLOAT:
                        row.push_back(Cell::real(sqlite3_column_double(stmt, c)));
                        break;
                    case SQLITE_TEXT: {
                        const auto* text = sqlite3_column_text(stmt, c);
                        int len = sqlite3_column_bytes(stmt, c);
                        row.push_back(Cell::text(std::string(reinterpret_cast<const char*>(text),
                                                             static_cast<size_t>(len))));
                        break;
                    }
                    case SQLITE_BLOB:
                        row.push_back(Cell::blob(sqlite3_column_blob(stmt, c),
                                                 static_cast<size_t>(sqlite3_column_bytes(stmt, c))));
                        break;
                }
            }
            out.rows.push_back(std::move(row));
            continue;
        }
        if (rc == SQLITE_DONE) {
            sqlite3_finalize(stmt);
            out.status = ExecStatus::Rows;
            return finish(out);
        }
        bool timed_out = guard.fired || rc == SQLITE_INTERRUPT;
        sqlite3_finalize(stmt);
        out.rows.clear();
        if (timed_out) {
            out.status = ExecStatus::Timeout;
            out.error_class = "timeout";
        } else {
            out.status = ExecStatus::Error;
            out.error_class = "runtime";
            out.error_text = sqlite3_errmsg(db);
        }
        return finish(out);
    }
}

namespace {

std::string encode_row(const std::vector<Cell>& row) {
    std::string out;
    for (const auto& cell : row) {
        out += cell.encoded;
        out += '\x1f';
    }
    return out;
}

std::vector<std::string> sorted_row_encodings(const ExecOutcome& outcome) {
    std::vector<std::string> encoded;
    encoded.reserve(outcome.rows.size());
    for (const auto& row : outcome.rows) encoded.push_back(encode_row(row));
    std::sort(encoded.begin(), encoded.end());
    return encoded;
}

}  // namespace

bool same_result(const ExecOutcome& a, const ExecOutcome& b) {
    if (a.status != ExecStatus::Rows || b.status != ExecStatus::Rows) return false;
    if (a.column_count != b.column_count) return false;
    if (a.rows.size() != b.rows.size()) return false;
    return sorted_row_encodings(a) == sorted_row_encodings(b);
}

std::string fingerprint(const ExecOutcome& outcome) {
    std::string material;
    switch (outcome.status) {
        case ExecStatus::Rows: {
            material = "rows:" + std::to_string(outcome.column_count) + ";";
            for (const auto& row : sorted_row_encodings(outcome)) {
                material += row;
                material += '\x1e';
            }
            break;
        }
        case ExecStatus::Error:
            material = "error:" + outcome.error_class;
            break;
        case ExecStatus::Timeout:
            material = "timeout";
            break;
    }
    return util::to_hex(util::fnv1a64(material));
}

}  // namespace sqlsynth::exec
