#include <doctest.h>

#include <random>

#include "sqlsynth/exec/vote.hpp"

using namespace sqlsynth;
using exec::Cell;
using exec::ExecOutcome;
using exec::ExecStatus;

namespace {

ExecOutcome rows_of(std::vector<int64_t> values) {
    ExecOutcome o;
    o.status = ExecStatus::Rows;
    o.column_count = 1;
    for (auto v : values) o.rows.push_back({Cell::integer(v)});
    return o;
}

ExecOutcome failed() {
    ExecOutcome o;
    o.status = ExecStatus::Error;
    o.error_class = "runtime";
    return o;
}

}  // namespace

TEST_CASE("largest group wins") {
    std::vector<ExecOutcome> outcomes = {
        rows_of({1}), rows_of({2}), rows_of({2}), rows_of({2}), rows_of({1}),
    };
    auto result = exec::majority_vote(outcomes);
    CHECK(result.winner_index == 1);
    CHECK(result.group_size == 3);
    CHECK(result.valid_count == 5);
}

TEST_CASE("ties break to the earliest candidate") {
    std::vector<ExecOutcome> outcomes = {
        rows_of({7}), rows_of({8}), rows_of({8}), rows_of({7}),
    };
    auto result = exec::majority_vote(outcomes);
    CHECK(result.winner_index == 0);
    CHECK(result.group_size == 2);
}

TEST_CASE("failures never join a group") {
    std::vector<ExecOutcome> outcomes = {
        failed(), failed(), failed(), rows_of({5}),
    };
    auto result = exec::majority_vote(outcomes);
    CHECK(result.winner_index == 3);
    CHECK(result.group_size == 1);
    CHECK(result.valid_count == 1);
}

TEST_CASE("all failures is a failed vote") {
    std::vector<ExecOutcome> outcomes = {failed(), failed()};
    CHECK_THROWS_AS(exec::majority_vote(outcomes), EmptyTally);
    CHECK_THROWS_AS(exec::majority_vote({}), EmptyTally);
}

TEST_CASE("winner index always points inside the winning group") {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 500; ++round) {
        std::vector<ExecOutcome> outcomes;
        size_t n = 1 + rng() % 8;
        bool any_valid = false;
        for (size_t i = 0; i < n; ++i) {
            if (rng() % 4 == 0) {
                outcomes.push_back(failed());
            } else {
                outcomes.push_back(rows_of({int64_t(rng() % 3)}));
                any_valid = true;
            }
        }
        if (!any_valid) {
            CHECK_THROWS_AS(exec::majority_vote(outcomes), EmptyTally);
            continue;
        }
        auto result = exec::majority_vote(outcomes);
        REQUIRE(result.winner_index < outcomes.size());
        CHECK(outcomes[result.winner_index].status == ExecStatus::Rows);
        // no other group is strictly larger
        for (const auto& g : result.groups) CHECK(g.members.size() <= result.group_size);
        // the winner's group really has group_size members with its fingerprint
        auto fp = exec::fingerprint(outcomes[result.winner_index]);
        size_t count = 0;
        for (const auto& o : outcomes)
            if (o.status == ExecStatus::Rows && exec::fingerprint(o) == fp) ++count;
        CHECK(count == result.group_size);
    }
}
