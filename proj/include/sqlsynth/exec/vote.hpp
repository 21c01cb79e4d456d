#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/exec/exec_engine.hpp"

namespace sqlsynth::exec {

struct VoteGroup {
    std::string fingerprint;
    std::vector<size_t> members;  // candidate indices, ascending
};

struct VoteResult {
    size_t winner_index = 0;     // lowest index inside the winning group
    size_t group_size = 0;
    size_t valid_count = 0;      // candidates that produced rows
    std::vector<VoteGroup> groups;
};

// Groups candidates by execution-result fingerprint and picks the largest
// group; ties go to the group whose first member has the lowest index.
// Candidates that errored or timed out never form groups.
inline VoteResult majority_vote(const std::vector<ExecOutcome>& outcomes) {
    std::map<std::string, VoteGroup> by_fp;
    size_t valid = 0;
    for (size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].status != ExecStatus::Rows) continue;
        ++valid;
        std::string fp = fingerprint(outcomes[i]);
        auto& group = by_fp[fp];
        group.fingerprint = fp;
        group.members.push_back(i);
    }
    if (valid == 0) throw EmptyTally("no candidate produced a result");

    VoteResult result;
    result.valid_count = valid;
    for (auto& [fp, group] : by_fp) result.groups.push_back(std::move(group));

    const VoteGroup* best = nullptr;
    for (const auto& group : result.groups) {
        if (!best || group.members.size() > best->members.size() ||
            (group.members.size() == best->members.size() &&
             group.members.front() < best->members.front())) {
            best = &group;
        }
    }
    result.winner_index = best->members.front();
    result.group_size = best->members.size();
    return result;
}

}  // namespace sqlsynth::exec
