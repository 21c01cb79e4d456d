#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sqlsynth/errors.hpp"

namespace sqlsynth::util {

// --- hashing ---------------------------------------------------------------

// FNV-1a over bytes. Stable across platforms and runs; used for request
// fingerprints, result digests, and per-item RNG seeding.
uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(uint64_t value);

// --- strings ---------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Count of whitespace-separated chunks in the raw text.
size_t whitespace_token_count(std::string_view s);

// Length of the longest common substring of a and b (byte-wise).
size_t longest_common_substring(std::string_view a, std::string_view b);

// --- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

void append_line(const std::filesystem::path& path, std::string_view line);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// --- rng -------------------------------------------------------------------

// Deterministic engine for (run seed, item key). Every stage derives its
// per-item randomness this way so results do not depend on scheduling order.
std::mt19937_64 rng_for(uint64_t seed, std::string_view item_key);

// --- parallel map ----------------------------------------------------------

// Applies fn to [0, n) on up to `workers` threads; results land at their
// input index, so output order never depends on scheduling. The first
// exception thrown by any worker is rethrown after all threads join.
void parallel_for(size_t n, size_t workers, const std::function<void(size_t)>& fn);

}  // namespace sqlsynth::util
