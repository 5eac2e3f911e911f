#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "puseg/core/image_sample.hpp"
#include "puseg/net/seg_model.hpp"
#include "puseg/net/training.hpp"
#include "puseg/pseudo/pseudo_labels.hpp"
#include "puseg/pu/pu_learning.hpp"

namespace puseg {

/// individual: one PU head per unlabeled image. batch: one head on the pooled
/// unlabeled pixels of all images. off: the stage leaves the labels unchanged.
enum class PuMode { individual, batch, off };

PuMode parse_pu_mode(std::string_view text);
std::string_view to_string(PuMode mode);

inline constexpr double kDefaultAlpha = 20.0;

struct PuStageOptions {
    PuMode mode = PuMode::individual;
    double alpha = kDefaultAlpha;
    PuTrainConfig train;
    /// Which labeled pixels form X_p: mask foreground, or annotated centerline points.
    TargetKind target = TargetKind::mask;
    /// Also add confident pseudo-positives (P1) of the unlabeled images to X_p.
    bool include_pseudo_positives = false;
    int workers = 1;
};

/// One line of the PU stage report.
struct PuImageReport {
    std::string image_id;
    double prior = 0.0;
    std::size_t n_p = 0;
    std::size_t n_u = 0;
    double initial_risk = 0.0;
    double final_risk = 0.0;
    int clamp_activations = 0;
    std::size_t n_pu_negatives = 0;
    bool skipped = false;
};

struct PuStageResult {
    std::map<std::string, PseudoLabelSet> labels;
    std::vector<PuImageReport> reports;  // one per unlabeled image, split order
    std::vector<PuHead> heads;           // trained heads (1 in batch mode)
};

/// Labeled pixels used as PU positives for `sample`.
std::vector<PixelIndex> positive_pixels(const ImageSample& sample, TargetKind target);

/// Fills pu_negatives of each unlabeled image's pseudo-label set. Positive
/// and negative sets are never modified.
PuStageResult run_pu_stage(const SegModel& model, const DatasetSplit& split,
                           const std::map<std::string, PseudoLabelSet>& labels, const PuStageOptions& options);

/// JSON lines: image_id, prior, n_p, n_u, final_risk, clamp_activations, n_pu_negatives, ...
void write_pu_report(const std::filesystem::path& path, const std::vector<PuImageReport>& reports);

}  // namespace puseg
