// puseg: command-line driver for the semi-supervised segmentation pipeline.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <spdlog/spdlog.h>

#include "puseg/errors.hpp"
#include "puseg/pipeline/pipeline.hpp"

namespace {

using namespace puseg;

struct Common {
    std::vector<std::string> configs;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> output_dir;
    std::string log_level = "info";
};

void add_common(CLI::App* cmd, Common& c, bool many_configs) {
    if (many_configs)
        cmd->add_option("--config", c.configs, "config file, one per method (repeatable)")->required();
    else
        cmd->add_option("--config", c.configs, "config file")->required()->expected(1);
    cmd->add_option("--seed", c.seed, "override the run seed");
    cmd->add_option("--workers", c.workers, "worker threads for the PU stage and evaluation");
    cmd->add_option("--output-dir", c.output_dir, "override the output directory");
    cmd->add_option("--log-level", c.log_level, "trace, debug, info, warn, error");
}

RunConfig resolve(const std::string& path, const Common& c) {
    RunConfig cfg = load_run_config(path);
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    if (c.output_dir) cfg.output_dir = *c.output_dir;
    validate(cfg);
    return cfg;
}

void print_run(const RunManifest& m) {
    std::cout << "method: " << m.method << "\n";
    for (const auto& s : m.stages)
        std::cout << "  " << s.name << (s.reused ? " (cached)" : "") << (s.dir.empty() ? "" : "  " + s.dir.string())
                  << "\n";
    if (m.pseudo_quality && m.pseudo_quality->pu_negative_precision)
        std::printf("N_pu precision: %.4f (%zu pixels)\n", *m.pseudo_quality->pu_negative_precision,
                    m.pseudo_quality->n_pu_negatives);
    if (m.metrics) std::cout << format_summary(*m.metrics, m.method);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"puseg: pseudo-labeling with per-image PU learning for segmentation"};
    app.require_subcommand(1);
    Common common;
    std::optional<std::string> checkpoint;
    bool visualize = false;

    struct StageCommand {
        const char* name;
        const char* help;
        Stage until;
    };
    const StageCommand stage_commands[] = {
        {"pretrain", "train the supervised model", Stage::pretrain},
        {"pseudolabel", "pre-train, then select confident pseudo-labels", Stage::pseudolabel},
        {"pu-select", "run up to the PU negative selection", Stage::pu},
        {"retrain", "run up to re-training", Stage::retrain},
        {"run", "run all stages and evaluate", Stage::evaluate},
    };
    std::vector<std::pair<CLI::App*, Stage>> stage_apps;
    for (const auto& sc : stage_commands) {
        auto* cmd = app.add_subcommand(sc.name, sc.help);
        add_common(cmd, common, false);
        if (sc.until == Stage::evaluate) cmd->add_flag("--visualize", visualize, "write PNG visualizations");
        stage_apps.emplace_back(cmd, sc.until);
    }
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint, or the pipeline's final model");
    add_common(evaluate, common, false);
    evaluate->add_option("--checkpoint", checkpoint, "model checkpoint to evaluate");
    evaluate->add_flag("--visualize", visualize, "write PNG visualizations");
    auto* synth = app.add_subcommand("synth-gen", "write the synthetic dataset described by the config");
    add_common(synth, common, false);
    auto* compare = app.add_subcommand("compare", "run several methods on one split and print a table");
    add_common(compare, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(spdlog::level::from_str(common.log_level));

    try {
        if (synth->parsed()) {
            RunConfig cfg = resolve(common.configs.front(), common);
            if (cfg.data.source != DataSource::synthetic) throw ConfigError("synth-gen needs data.source = synthetic");
            const auto& d = cfg.data;
            const auto samples =
                generate_synthetic(d.synthetic_seed.value_or(cfg.seed), d.n_images, {d.rows, d.cols}, d.noise);
            save_samples(cfg.output_dir, samples);
            std::cout << "wrote " << samples.size() << " images to " << cfg.output_dir.string() << "\n";
            return 0;
        }
        if (compare->parsed()) {
            std::vector<RunConfig> configs;
            for (const auto& path : common.configs) configs.push_back(resolve(path, common));
            const auto table = compare_methods(configs);
            std::cout << format_table(table);
            return 0;
        }
        RunConfig cfg = resolve(common.configs.front(), common);
        PipelineOptions opts;
        opts.visualize = visualize;
        if (evaluate->parsed()) {
            if (checkpoint) opts.checkpoint = std::filesystem::path(*checkpoint);
        } else {
            for (const auto& [cmd, until] : stage_apps)
                if (cmd->parsed()) opts.until = until;
        }
        print_run(run_pipeline(cfg, opts));
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
