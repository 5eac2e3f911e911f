#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "puseg/core/image_sample.hpp"

namespace puseg {

/// On-disk layouts accepted by load_dataset.
///  - fundus_folder: images/<stem>.png, masks/<stem>.png, optional centerlines/<stem>.csv
///  - flat_folder:   <stem>.png, <stem>_mask.png, optional <stem>.csv, all in one directory
enum class DatasetLayout { fundus_folder, flat_folder };

DatasetLayout parse_dataset_layout(std::string_view text);
std::string_view to_string(DatasetLayout layout);

/// Reads every image under `root` (sorted by id).
std::vector<ImageSample> load_samples(const std::filesystem::path& root, DatasetLayout layout);

/// Deterministic split: sort by id, rotate left by `fold`, then take
/// n_labeled -> labeled, n_unlabeled -> unlabeled, remainder -> test.
DatasetSplit split_samples(std::vector<ImageSample> samples, int fold, int n_labeled, int n_unlabeled);

DatasetSplit load_dataset(const std::filesystem::path& root, DatasetLayout layout, int fold, int n_labeled,
                          int n_unlabeled);

/// Writes samples in the fundus_folder layout (used by synth-gen).
void save_samples(const std::filesystem::path& root, const std::vector<ImageSample>& samples);

}  // namespace puseg
