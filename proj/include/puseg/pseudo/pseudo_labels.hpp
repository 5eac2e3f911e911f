#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "puseg/grid.hpp"
#include "puseg/net/seg_model.hpp"

namespace puseg {

/// Sparse pseudo-labels of one image. Each list is sorted row-major and the
/// three lists are pairwise disjoint.
struct PseudoLabelSet {
    std::string image_id;
    Shape shape;
    std::vector<PixelIndex> positives;     // confidence > th_p
    std::vector<PixelIndex> negatives;     // confidence < th_n
    std::vector<PixelIndex> pu_negatives;  // added by the PU stage
};

inline constexpr double kSegmentationThPositive = 0.8;
inline constexpr double kSegmentationThNegative = 0.1;
inline constexpr double kHeatmapThPositive = 100.0 / 256.0;
inline constexpr double kHeatmapThNegative = 2.0 / 256.0;

void validate_thresholds(double th_p, double th_n);

/// Strict thresholds on both sides; pixels with th_n <= conf <= th_p stay unlabeled.
PseudoLabelSet select_by_confidence(const ConfidenceMap& conf, double th_p, double th_n);

/// All pixels that are neither positive nor negative (PU negatives are not excluded).
std::vector<PixelIndex> unlabeled_indices(Shape shape, const PseudoLabelSet& labels);

/// Throws ShapeError on out-of-bounds indices or overlapping sets.
void validate(const PseudoLabelSet& labels);

/// Dense label grid: 1 positive, 0 negative (either kind), -1 unlabeled.
Grid<std::int8_t> to_label_grid(const PseudoLabelSet& labels);

/// Text cache: header "PSEUDO1 <id> <rows> <cols>", then sections "POS", "NEG",
/// "PUNEG", each followed by "row,col" lines.
void save_pseudo_labels(const std::filesystem::path& path, const PseudoLabelSet& labels);
PseudoLabelSet load_pseudo_labels(const std::filesystem::path& path);

}  // namespace puseg
