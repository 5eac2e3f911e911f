#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "puseg/pipeline/run_config.hpp"

namespace puseg {

inline constexpr const char* kVersion = "puseg 0.1.0";

enum class Stage { data, pretrain, pseudolabel, pu, retrain, evaluate };
std::string_view to_string(Stage stage);

struct StageRecord {
    std::string name;
    std::string fingerprint;
    std::filesystem::path dir;
    bool reused = false;  // loaded from a completed cache entry
    std::string started;
    std::string finished;
};

/// Agreement of pseudo-labels with the ground-truth masks of the unlabeled images.
/// Precision is the fraction of a set whose ground truth matches its label.
struct PseudoQuality {
    std::size_t n_positives = 0;
    std::size_t n_negatives = 0;
    std::size_t n_pu_negatives = 0;
    std::optional<double> positive_precision;
    std::optional<double> negative_precision;
    std::optional<double> pu_negative_precision;
};

struct RunManifest {
    std::map<std::string, std::string> config;
    std::string method;
    std::string version = kVersion;
    std::string status = "running";  // running, complete, failed
    std::string failed_stage;
    std::string error;
    std::vector<StageRecord> stages;
    std::vector<std::filesystem::path> checkpoints;
    std::vector<std::filesystem::path> pseudo_label_files;
    std::filesystem::path pu_report;
    std::filesystem::path metrics_jsonl;
    std::filesystem::path summary;
    std::vector<std::string> test_ids;
    std::optional<RunMetrics> metrics;
    std::optional<PseudoQuality> pseudo_quality;

    const StageRecord* stage(std::string_view name) const;
};

struct PipelineOptions {
    Stage until = Stage::evaluate;  // last stage to execute
    std::optional<std::filesystem::path> checkpoint;  // evaluate this model instead of training
    bool visualize = false;
};

/// Runs pre-train, pseudo-labeling, PU selection, re-training and evaluation.
/// Completed stages are cached under cache_root(config) keyed by a fingerprint of
/// everything they depend on, and reused on later runs. The manifest is written
/// to <output_dir>/manifest.json, also when a stage fails (then StageError).
RunManifest run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

PseudoQuality pseudo_quality(const DatasetSplit& split, const std::map<std::string, PseudoLabelSet>& labels);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

struct ComparisonRow {
    std::string method;
    std::vector<double> values;  // one per column
    double average = 0.0;
};

/// Segmentation: one column per test image, Avg. = mean Dice.
/// Heatmap tracing: one column per tolerance, Avg. = average coverage.
struct ComparisonTable {
    Task task = Task::segmentation;
    std::vector<std::string> columns;
    std::vector<ComparisonRow> rows;
    std::vector<RunManifest> runs;
};

/// Runs every config (sharing one cache root) and tabulates the results.
/// Throws ComparisonError on an empty list, mixed tasks or differing test splits.
ComparisonTable compare_methods(const std::vector<RunConfig>& configs);
std::string format_table(const ComparisonTable& table);

}  // namespace puseg
