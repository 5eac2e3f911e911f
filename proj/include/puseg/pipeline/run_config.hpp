#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "puseg/core/dataset.hpp"
#include "puseg/core/synthetic.hpp"
#include "puseg/eval/evaluation.hpp"
#include "puseg/pu/pu_stage.hpp"
#include "puseg/retrain/retrain.hpp"

namespace puseg {

enum class DataSource { synthetic, fundus_folder, flat_folder };

struct DataConfig {
    DataSource source = DataSource::synthetic;
    std::filesystem::path root;
    int fold = 0;
    int n_labeled = 2;
    int n_unlabeled = 4;
    // synthetic source only
    int n_images = 20;
    int rows = 64;
    int cols = 64;
    NoiseProfile noise = NoiseProfile::mixed;
    double vessel_blur = 0.0;
    std::optional<std::uint64_t> synthetic_seed;  // defaults to the run seed
};

/// Every knob of a pipeline run. Read from / written to flat key=value text.
struct RunConfig {
    Task task = Task::segmentation;
    double th_p = kSegmentationThPositive;
    double th_n = kSegmentationThNegative;
    double alpha = kDefaultAlpha;
    PuMode pu_mode = PuMode::individual;
    bool pseudo_labeling = true;  // false: stop after pre-training (the Baseline)
    std::uint64_t seed = 0;
    std::string backbone = "mini_unet";
    int epochs_pretrain = 2000;
    int epochs_pu = 2000;
    int epochs_retrain = 2000;
    double learning_rate = 1e-3;
    double pu_learning_rate = 1e-2;
    std::size_t pu_max_samples = 50000;
    bool pu_include_pseudo_positives = false;
    int crop_size = 64;
    int crops_per_step = 8;
    double heatmap_sigma = kDefaultHeatmapSigma;
    RetrainInit retrain_init = RetrainInit::from_scratch;
    double binarize_threshold = 0.5;
    double trace_seed_threshold = 0.5;
    double trace_step_threshold = 0.2;
    int workers = 1;
    DataConfig data;
    std::filesystem::path output_dir = "puseg_run";
    std::filesystem::path cache_dir;  // empty: <output_dir>/cache (PUSEG_CACHE_DIR wins)
    std::string method_name;          // empty: derived from pseudo_labeling / pu_mode
};

/// Throws ConfigError on violated invariants (th_n < th_p, alpha in (0,100), epochs >= 1, ...).
void validate(const RunConfig& config);

/// Parses "key = value" lines ('#' starts a comment). Reals accept "a/b".
/// th_p/th_n default per task when absent. Unknown keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical key=value text (sorted keys); parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);
std::map<std::string, std::string> to_key_values(const RunConfig& config);

/// "Baseline", "Pseudo w/o pu", "Ours (batch)" or "Ours" unless method_name is set.
std::string method_label(const RunConfig& config);

/// Resolved cache root (PUSEG_CACHE_DIR, then cache_dir, then output_dir/cache).
std::filesystem::path cache_root(const RunConfig& config);

/// Training settings the pipeline derives for each stage.
TrainConfig pretrain_config(const RunConfig& config);
TrainConfig retrain_config(const RunConfig& config);
PuStageOptions pu_options(const RunConfig& config);
EvalOptions eval_options(const RunConfig& config);

/// Materialises the dataset split described by config.data.
DatasetSplit load_split(const RunConfig& config);

}  // namespace puseg
