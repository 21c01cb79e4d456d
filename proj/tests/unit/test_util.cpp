#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>

#include "sqlsynth/util.hpp"

using namespace sqlsynth;

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(util::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(util::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(util::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("fnv1a64 seeding changes the digest") {
    CHECK(util::fnv1a64("x", 1) != util::fnv1a64("x", 2));
    CHECK(util::fnv1a64("x", 7) == util::fnv1a64("x", 7));
}

TEST_CASE("to_hex is 16 lowercase hex digits") {
    CHECK(util::to_hex(0) == "0000000000000000");
    CHECK(util::to_hex(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(util::to_hex(0xffffffffffffffffULL) == "ffffffffffffffff");
}

TEST_CASE("string helpers") {
    CHECK(util::trim("  a b \t\n") == "a b");
    CHECK(util::trim("") == "");
    CHECK(util::to_lower("AbC") == "abc");
    CHECK(util::to_upper("AbC") == "ABC");
    CHECK(util::split_whitespace(" a  b\tc\n") == std::vector<std::string>{"a", "b", "c"});
    CHECK(util::join({"a", "b", "c"}, ", ") == "a, b, c");
    CHECK(util::starts_with_ci("SELECT 1", "select"));
    CHECK(!util::starts_with_ci("SEL", "select"));
}

TEST_CASE("whitespace_token_count is the raw whitespace split") {
    CHECK(util::whitespace_token_count("SELECT name FROM school WHERE age > 18") == 8);
    CHECK(util::whitespace_token_count("") == 0);
    CHECK(util::whitespace_token_count("  one  ") == 1);
}

TEST_CASE("longest_common_substring") {
    CHECK(util::longest_common_substring("", "abc") == 0);
    CHECK(util::longest_common_substring("abc", "abc") == 3);
    CHECK(util::longest_common_substring("xxabcyy", "zzabcqq") == 3);
    CHECK(util::longest_common_substring("abcd", "dcba") == 1);
    // oracle: brute force over all substring pairs
    auto brute = [](std::string_view a, std::string_view b) {
        size_t best = 0;
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = 0; j < b.size(); ++j) {
                size_t k = 0;
                while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
                best = std::max(best, k);
            }
        return best;
    };
    std::mt19937_64 rng(7);
    for (int round = 0; round < 200; ++round) {
        std::string a, b;
        for (int i = 0; i < int(rng() % 12); ++i) a += char('a' + rng() % 3);
        for (int i = 0; i < int(rng() % 12); ++i) b += char('a' + rng() % 3);
        CHECK(util::longest_common_substring(a, b) == brute(a, b));
    }
}

TEST_CASE("atomic write then read round-trips") {
    auto dir = std::filesystem::temp_directory_path() / "sqlsynth_util_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "out.txt";
    util::write_file_atomic(path, "line1\nline2\n");
    CHECK(util::read_file(path) == "line1\nline2\n");
    CHECK(util::read_lines(path) == std::vector<std::string>{"line1", "line2"});
    util::append_line(path, "line3");
    CHECK(util::read_lines(path) == std::vector<std::string>{"line1", "line2", "line3"});
    std::filesystem::remove_all(dir);
}

TEST_CASE("read_file on a missing path throws IoError") {
    CHECK_THROWS_AS(util::read_file("/nonexistent/really/not/here.txt"), IoError);
}

TEST_CASE("rng_for is keyed by seed and item") {
    auto a1 = util::rng_for(1, "item-a");
    auto a2 = util::rng_for(1, "item-a");
    auto b = util::rng_for(1, "item-b");
    auto c = util::rng_for(2, "item-a");
    CHECK(a1() == a2());
    CHECK(a1() == a2());
    auto a3 = util::rng_for(1, "item-a");
    CHECK(a3() != b());  // overwhelmingly likely for distinct keys
    CHECK(util::rng_for(1, "item-a")() != c());
}

TEST_CASE("parallel_for covers every index exactly once") {
    std::vector<std::atomic<int>> hits(997);
    util::parallel_for(hits.size(), 8, [&](size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for rethrows a worker exception") {
    CHECK_THROWS_AS(util::parallel_for(100, 4,
                                       [&](size_t i) {
                                           if (i == 57) throw InvariantError("boom");
                                       }),
                    InvariantError);
}
