#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sqlsynth::exec {

enum class ExecStatus { Rows, Error, Timeout };

// A single result cell, already normalized: integral REALs are collapsed to
// integers, remaining reals are rounded to 6 decimal places, text is stripped
// of trailing NULs. The encoding is a stable string so rows compare and hash
// without revisiting SQLite types.
struct Cell {
    std::string encoded;

    static Cell null();
    static Cell integer(int64_t v);
    static Cell real(double v);
    static Cell text(std::string v);
    static Cell blob(const void* data, size_t size);

    // SQL-literal rendering for prompts and reports: NULL, bare numbers,
    // single-quoted text, x'..' blobs.
    std::string display() const;

    // Raw text payload for TEXT cells, absent for every other type.
    std::optional<std::string> text_value() const;

    bool operator==(const Cell&) const = default;
};

struct ExecOutcome {
    ExecStatus status = ExecStatus::Error;
    int column_count = 0;
    std::vector<std::vector<Cell>> rows;  // only when status == Rows
    std::string error_text;               // only when status == Error
    std::string error_class;              // prepare | runtime | oversized | multi_statement
    int64_t elapsed_ms = 0;

    bool ok() const { return status == ExecStatus::Rows; }
};

// Runs one SELECT statement against the database file over a fresh read-only
// connection. The timeout is enforced with a progress-handler interrupt; the
// file is never modified. Results beyond 100,000 rows become
// Error("oversized result"). Trailing content after the first statement
// (other than whitespace/comments) is an error.
ExecOutcome execute(const std::filesystem::path& db_path, const std::string& sql,
                    int64_t timeout_ms);

inline constexpr size_t kMaxResultRows = 100000;

// Execution-accuracy comparator: true iff both outcomes are Rows with equal
// column counts and equal row multisets (row order ignored, column order
// significant, NULL equal to NULL). Errors and timeouts never compare equal.
bool same_result(const ExecOutcome& a, const ExecOutcome& b);

// Stable digest over (status, column_count, sorted row encodings). On Rows
// outcomes it coincides exactly with same_result; error outcomes digest
// their error class so distinct failure kinds group apart in diagnostics.
std::string fingerprint(const ExecOutcome& outcome);

}  // namespace sqlsynth::exec
