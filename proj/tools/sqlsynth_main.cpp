#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlsynth/cot/synth.hpp"
#include "sqlsynth/errors.hpp"
#include "sqlsynth/eval/quality.hpp"
#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/pipeline/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sqlsynth;

namespace {

std::shared_ptr<llm::Provider> provider_from(const pipeline::PipelineConfig& config) {
    if (config.provider.endpoint_url.empty()) {
        throw ConfigError(
            "provider.endpoint_url is empty: point it at a chat-completions server");
    }
    return std::make_shared<llm::HttpProvider>(config.provider);
}

void print_manifest(const pipeline::RunManifest& manifest) {
    json j = manifest;
    std::printf("%s\n", j.dump(2).c_str());
}

int run_stages(const fs::path& config_path, const std::vector<std::string>& stages) {
    auto config = pipeline::load_config(config_path);
    auto manifest = pipeline::run(config, provider_from(config), stages);
    print_manifest(manifest);
    return 0;
}

int cmd_resume(const fs::path& manifest_path) {
    auto manifest = pipeline::load_manifest(manifest_path);
    auto config = pipeline::load_config(manifest.config_path);
    auto updated = pipeline::resume(manifest_path, provider_from(config));
    print_manifest(updated);
    return 0;
}

int cmd_report(const fs::path& work_dir) {
    std::printf("%s\n", pipeline::report(work_dir).dump(2).c_str());
    return 0;
}

int cmd_eval(const fs::path& benchmark_dir, const fs::path& pred_path,
             const std::string& strategy, int64_t timeout_ms) {
    auto bench = eval::load_benchmark(benchmark_dir, timeout_ms);
    auto predictions = eval::load_predictions(pred_path);
    auto report = eval::evaluate(bench.items, predictions, timeout_ms);

    std::fprintf(stderr, "items: %zu  scored: %zu  skipped golds: %zu\n", report.n_items,
                 report.n_scored, bench.skipped_items.size());
    std::fprintf(stderr, "%-10s %s\n", "strategy", "accuracy");
    std::fprintf(stderr, "%-10s %.4f\n", "greedy", report.ex_greedy);
    std::fprintf(stderr, "%-10s %.4f\n", "majority", report.ex_majority);
    std::fprintf(stderr, "selected (%s): %.4f\n", strategy.c_str(),
                 strategy == "majority" ? report.ex_majority : report.ex_greedy);

    json out = report.to_json();
    out["skipped_golds"] = bench.skipped_items;
    out["strategy"] = strategy;
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

std::string resolve_model(const pipeline::PipelineConfig& config, const std::string& flag,
                          const std::string& stage) {
    if (!flag.empty()) return flag;
    return config.pool_for(stage).front().model_id;
}

int cmd_judge(const fs::path& samples_path, const fs::path& rubric_path,
              const fs::path& config_path, const std::string& model_flag, size_t limit) {
    auto config = pipeline::load_config(config_path);
    auto samples = cot::load_data_samples(samples_path);
    auto rubric = eval::load_rubric(rubric_path);
    std::string model = resolve_model(config, model_flag, "judge");

    fs::create_directories(config.work_dir);
    llm::Gateway gateway(provider_from(config), config.provider,
                         config.work_dir / "judge_log.jsonl");

    if (limit > 0 && samples.size() > limit) samples.resize(limit);

    std::map<std::string, eval::AspectJudgement> totals;
    for (const auto& sample : samples) {
        for (const auto& [aspect, judgement] : eval::judge_sample(sample, rubric, gateway, model)) {
            auto& agg = totals[aspect];
            agg.tally.n_excellent += judgement.tally.n_excellent;
            agg.tally.n_good += judgement.tally.n_good;
            agg.tally.n_average += judgement.tally.n_average;
            agg.tally.n_poor += judgement.tally.n_poor;
            agg.n_skipped += judgement.n_skipped;
        }
    }

    json aspects = json::object();
    for (const auto& [name, agg] : totals) {
        json entry{{"excellent", agg.tally.n_excellent}, {"good", agg.tally.n_good},
                   {"average", agg.tally.n_average},     {"poor", agg.tally.n_poor},
                   {"skipped", agg.n_skipped}};
        entry["score"] =
            agg.tally.sum() > 0 ? json(eval::quality_score(agg.tally)) : json(nullptr);
        aspects[name] = entry;
    }
    json out{{"model", model}, {"n_samples", samples.size()}, {"aspects", aspects}};
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

int cmd_audit(const fs::path& samples_path, const fs::path& config_path,
              const std::string& model_flag, size_t limit) {
    auto config = pipeline::load_config(config_path);
    auto samples = cot::load_data_samples(samples_path);
    std::string model = resolve_model(config, model_flag, "audit");

    std::vector<cot::CorrectionPair> pairs;
    for (const auto& sample : samples) {
        if (!sample.provenance.value("corrected", false)) continue;
        if (!sample.provenance.contains("original_sql")) continue;
        pairs.push_back({sample.question, sample.provenance.at("original_sql"), sample.sql});
    }
    if (limit > 0 && pairs.size() > limit) pairs.resize(limit);

    fs::create_directories(config.work_dir);
    llm::Gateway gateway(provider_from(config), config.provider,
                         config.work_dir / "audit_log.jsonl");
    auto audit = cot::audit_corrections(pairs, gateway, model);

    json out{{"model", model},
             {"n_audited", audit.n_audited},
             {"n_prefer_final", audit.n_prefer_final},
             {"n_unparsable", audit.n_unparsable}};
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text-to-SQL data synthesis toolkit"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string manifest_path;
    std::string work_dir;
    std::string benchmark_dir, pred_path, strategy = "greedy";
    std::string samples_path, rubric_path, model_id;
    std::vector<std::string> run_only;
    int64_t timeout_ms = 30000;
    size_t limit = 0;

    struct StageCmd {
        CLI::App* cmd;
        std::string stage;
    };
    std::vector<StageCmd> stage_cmds;
    auto add_stage_cmd = [&](const std::string& name, const std::string& stage,
                             const std::string& help) {
        CLI::App* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", config_path, "pipeline config file")->required();
        stage_cmds.push_back({cmd, stage});
        return cmd;
    };

    add_stage_cmd("ingest", "ingest", "filter seed web tables");
    add_stage_cmd("synth-db", "schema", "synthesize database schemas and SQLite files");
    add_stage_cmd("synth-sql", "query", "sample SQL queries over the synthesized databases");
    add_stage_cmd("synth-question", "question", "back-translate queries into styled questions");
    add_stage_cmd("synth-cot", "cot", "generate voted reasoning traces");
    add_stage_cmd("export", "export", "render the training file from finished samples");

    CLI::App* cmd_run = app.add_subcommand("run", "run the full pipeline");
    cmd_run->add_option("--config", config_path, "pipeline config file")->required();
    cmd_run->add_option("--stage", run_only, "restrict to these stages, pipeline order");

    CLI::App* cmd_res = app.add_subcommand("resume", "continue a checkpointed run");
    cmd_res->add_option("--manifest", manifest_path, "manifest written by run")->required();

    CLI::App* cmd_rep = app.add_subcommand("report", "statistics over a work directory");
    cmd_rep->add_option("--work-dir", work_dir, "pipeline work directory")->required();

    CLI::App* cmd_ev = app.add_subcommand("eval", "score predictions against a benchmark");
    cmd_ev->add_option("--benchmark", benchmark_dir, "benchmark directory")->required();
    cmd_ev->add_option("--pred", pred_path, "predictions json: item_id -> candidates")
        ->required();
    cmd_ev->add_option("--strategy", strategy, "greedy or majority")
        ->check(CLI::IsMember({"greedy", "majority"}));
    cmd_ev->add_option("--timeout-ms", timeout_ms, "per-statement execution budget");

    CLI::App* cmd_j = app.add_subcommand("judge", "LLM-judge quality scores for samples");
    cmd_j->add_option("--samples", samples_path, "data samples jsonl")->required();
    cmd_j->add_option("--rubric", rubric_path, "rubric json")->required();
    cmd_j->add_option("--config", config_path, "pipeline config file")->required();
    cmd_j->add_option("--model", model_id, "judge model id (default: configured pool)");
    cmd_j->add_option("--limit", limit, "judge at most this many samples (0 = all)");

    CLI::App* cmd_au = app.add_subcommand("audit", "judge corrected queries against originals");
    cmd_au->add_option("--samples", samples_path, "data samples jsonl")->required();
    cmd_au->add_option("--config", config_path, "pipeline config file")->required();
    cmd_au->add_option("--model", model_id, "judge model id (default: configured pool)");
    cmd_au->add_option("--limit", limit, "audit at most this many pairs (0 = all)");

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& entry : stage_cmds) {
            if (entry.cmd->parsed()) return run_stages(config_path, {entry.stage});
        }
        if (cmd_run->parsed()) return run_stages(config_path, run_only);
        if (cmd_res->parsed()) return cmd_resume(manifest_path);
        if (cmd_rep->parsed()) return cmd_report(work_dir);
        if (cmd_ev->parsed()) return cmd_eval(benchmark_dir, pred_path, strategy, timeout_ms);
        if (cmd_j->parsed())
            return cmd_judge(samples_path, rubric_path, config_path, model_id, limit);
        if (cmd_au->parsed()) return cmd_audit(samples_path, config_path, model_id, limit);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s: %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    std::puts(app.help().c_str());
    return 0;
}
