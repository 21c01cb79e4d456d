#pragma once

#include <stdexcept>
#include <string>

namespace sqlsynth {

// Base class for every error raised by the toolkit. `kind()` is a stable
// machine-readable tag used in logs and reports.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define SQLSYNTH_DEFINE_ERROR(NAME, KIND)                        \
    class NAME : public Error {                                  \
    public:                                                      \
        explicit NAME(const std::string& message)                \
            : Error(KIND, message) {}                            \
    }

SQLSYNTH_DEFINE_ERROR(PreconditionError, "precondition");
SQLSYNTH_DEFINE_ERROR(AuthError, "auth");
SQLSYNTH_DEFINE_ERROR(TransportError, "transport");
SQLSYNTH_DEFINE_ERROR(ProviderError, "provider");
SQLSYNTH_DEFINE_ERROR(DimensionMismatch, "dimension_mismatch");
SQLSYNTH_DEFINE_ERROR(ParseError, "parse");
SQLSYNTH_DEFINE_ERROR(InvariantError, "invariant");
SQLSYNTH_DEFINE_ERROR(MaterializeError, "materialize");
SQLSYNTH_DEFINE_ERROR(EmptyDatabase, "empty_database");
SQLSYNTH_DEFINE_ERROR(ColumnResolutionError, "column_resolution");
SQLSYNTH_DEFINE_ERROR(VoteFailed, "vote_failed");
SQLSYNTH_DEFINE_ERROR(EmptyTally, "empty_tally");
SQLSYNTH_DEFINE_ERROR(GoldExecutionError, "gold_execution");
SQLSYNTH_DEFINE_ERROR(ConfigError, "config");
SQLSYNTH_DEFINE_ERROR(ConfigDrift, "config_drift");
SQLSYNTH_DEFINE_ERROR(StageError, "stage");
SQLSYNTH_DEFINE_ERROR(IoError, "io");

#undef SQLSYNTH_DEFINE_ERROR

}  // namespace sqlsynth
