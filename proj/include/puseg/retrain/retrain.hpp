#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "puseg/net/training.hpp"
#include "puseg/pseudo/pseudo_labels.hpp"

namespace puseg {

/// Pixel -> hard label (1 foreground, 0 background).
using SparseLabels = std::map<PixelIndex, int>;

/// P1 -> 1, N1 and N_pu -> 0.
SparseLabels to_sparse_labels(const PseudoLabelSet& labels);

/// Mean BCE over exactly the keyed pixels. Empty map -> 0 (with a warning).
double masked_loss(const ConfidenceMap& pred, const SparseLabels& labels);

/// d masked_loss / d pred; zero at every unkeyed pixel.
ImageF masked_loss_gradient(const ConfidenceMap& pred, const SparseLabels& labels);

enum class RetrainInit { from_scratch, warm_start };

RetrainInit parse_retrain_init(std::string_view text);
std::string_view to_string(RetrainInit init);

/// Trains on full-image BCE over `labeled` plus masked BCE over the
/// pseudo-labelled pixels of `unlabeled`, each term mean-reduced, summed 1:1.
/// `warm` is required for RetrainInit::warm_start and ignored otherwise.
SegModel retrain(RetrainInit init, const SegModel* warm, const std::vector<ImageSample>& labeled,
                 const std::vector<ImageSample>& unlabeled, const std::map<std::string, PseudoLabelSet>& pseudo,
                 const TrainConfig& config, TrainingTrace* trace = nullptr);

}  // namespace puseg
