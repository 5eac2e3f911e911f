#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "puseg/core/heatmap.hpp"
#include "puseg/core/image_sample.hpp"
#include "puseg/net/seg_model.hpp"

namespace puseg {

/// What a labeled sample is trained against: its binary mask, or a Gaussian
/// heatmap built from its centerline.
enum class TargetKind { mask, heatmap };

TargetKind parse_target_kind(std::string_view text);

struct TrainConfig {
    int epochs = 2000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int crop_size = 64;
    int crops_per_step = 8;
    bool augment = true;  // random crop, quarter-turn rotation, horizontal flip
    std::uint64_t seed = 0;
    TargetKind target = TargetKind::mask;
    double heatmap_sigma = kDefaultHeatmapSigma;
    std::string backbone = "mini_unet";
    int log_every = 0;  // epochs between progress logs; 0 disables
};

void validate(const TrainConfig& config);

/// Optional record of a training run.
struct TrainingTrace {
    std::vector<double> epoch_loss;            // mean step loss per epoch
    std::vector<std::uint64_t> param_digest;   // parameter hash after each epoch
};

struct DenseExample {
    const ImageF* pixels = nullptr;
    ImageF target;  // values in [0, 1]
};

/// Per-pixel labels: 1 positive, 0 negative, -1 no label.
struct SparseExample {
    const ImageF* pixels = nullptr;
    Grid<std::int8_t> labels;
};

/// Minimises mean BCE over dense examples plus mean BCE over the labelled
/// pixels of sparse examples (each term averaged separately, summed 1:1).
/// Sparse examples without any label are ignored.
SegModel fit(SegModel model, const std::vector<DenseExample>& dense, const std::vector<SparseExample>& sparse,
             const TrainConfig& config, TrainingTrace* trace = nullptr);

ImageF dense_target(const ImageSample& sample, TargetKind kind, double sigma);

/// Fresh model trained on labeled samples only.
SegModel train_supervised(const std::vector<ImageSample>& labeled, const TrainConfig& config,
                          TrainingTrace* trace = nullptr);

/// Seed used to initialise a fresh model for a training run with `config`.
std::uint64_t init_seed(const TrainConfig& config);

}  // namespace puseg
