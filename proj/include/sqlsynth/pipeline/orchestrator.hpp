#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/llm/types.hpp"

namespace sqlsynth::pipeline {

// One backend in a stage's pool and its share of the traffic.
struct ModelChoice {
    std::string model_id;
    double weight = 1.0;

    bool operator==(const ModelChoice&) const = default;
};

// Per-stage pool; weights must sum to 1.
using ModelPool = std::vector<ModelChoice>;

// Weighted pick, a pure function of (seed, stage, item_key): the same item
// always lands on the same backend, regardless of processing order.
std::string choose_model(const ModelPool& pool, uint64_t seed, const std::string& stage,
                         const std::string& item_key);

// Everything a run needs, loaded from one JSON file. Relative paths are
// resolved against the config file's directory.
struct PipelineConfig {
    std::filesystem::path config_path;  // where this config was loaded from

    std::filesystem::path tables_dir;   // seed web tables (*.jsonl, *.csv)
    std::filesystem::path work_dir;     // manifest, per-item checkpoints, stage outputs
    std::filesystem::path output_dir;   // terminal dataset and training file
    std::filesystem::path data_dir;     // bundled styles/levels/functions/demos

    uint64_t seed = 0;
    int budget_per_db = 300;     // raw SQL candidates drawn per database
    int n_samples = 8;           // completions per sampled request
    double temperature = 0.8;
    int64_t timeout_ms = 30000;  // per-statement execution budget
    int workers = 4;             // intra-stage worker threads

    std::string embed_model_id = "all-mpnet-base-v2";
    llm::ProviderConfig provider;
    std::map<std::string, ModelPool> models;  // stage name -> pool; absent -> {"default", 1.0}

    // The stage's pool, or the single-entry default when none is configured.
    const ModelPool& pool_for(const std::string& stage) const;
};

PipelineConfig load_config(const std::filesystem::path& path);

// Field checks: required paths present, sane numeric ranges, every pool's
// weights positive and summing to 1. Throws ConfigError.
void validate(const PipelineConfig& config);

// Canonical JSON image of the config (sorted keys, resolved paths); the hash
// is the fingerprint a manifest pins its run to.
nlohmann::json config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

// Progress of one stage: counts of checkpointed items. done covers items
// that produced output or were legitimately dropped; failed covers items
// whose processing raised an error.
struct StageCheckpoint {
    std::string stage;
    size_t items_done = 0;
    size_t items_failed = 0;
    bool complete = false;

    bool operator==(const StageCheckpoint&) const = default;
};

// The persisted state of one run: identity, config pin, per-stage progress,
// and where each stage's combined artifact lives. Saved atomically after
// every item, so a killed process can always pick up where it left off.
struct RunManifest {
    std::string run_id;
    std::string config_hash;
    std::filesystem::path config_path;
    std::vector<std::string> requested_stages;
    std::vector<StageCheckpoint> checkpoints;
    std::map<std::string, std::string> artifacts;

    // The stage's checkpoint, created at the back on first use. done counts
    // may only grow; a smaller value trips InvariantError at update time.
    StageCheckpoint& checkpoint(const std::string& stage);
    const StageCheckpoint* find_checkpoint(const std::string& stage) const;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

// Pipeline order; run() executes any requested subset in this order.
const std::vector<std::string>& stage_order();

// Executes the requested stages (all six when empty) over the configured
// directories. Per-item results are checkpointed under work_dir and already
// finished items are never recomputed, so calling run() again continues
// rather than restarts. Combined stage outputs are written atomically in a
// canonical order once the stage's item loop finishes.
//
// Errors: ConfigError (bad config or unknown stage name), ConfigDrift (the
// work dir belongs to a different config), PreconditionError (a requested
// stage's inputs are missing), StageError (a stage aborted; the manifest on
// disk stays valid and a later resume continues the run).
RunManifest run(const PipelineConfig& config, std::shared_ptr<llm::Provider> provider,
                const std::vector<std::string>& stages = {});

// Continues the run a manifest describes: reloads the config it points at,
// verifies the hash (ConfigDrift on mismatch), then re-executes the recorded
// stage list. Completed items are skipped; items that failed before are
// retried once and then left as permanent failures. Resuming a finished run
// changes nothing.
RunManifest resume(const std::filesystem::path& manifest_path,
                   std::shared_ptr<llm::Provider> provider);

// Statistics over whatever stage outputs exist under work_dir: database
// shape averages (tables, columns, primary and foreign keys per database),
// structural SQL corpus stats, and complexity/style histograms. Missing
// outputs yield zero-valued sections; an empty directory is fine.
nlohmann::json report(const std::filesystem::path& work_dir);

}  // namespace sqlsynth::pipeline
