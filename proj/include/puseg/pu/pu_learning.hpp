#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "puseg/grid.hpp"
#include "puseg/net/seg_model.hpp"

namespace puseg {

/// Row-major n x D feature matrix.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Linear PU classifier f(x) = w.x + b for one image (or "BATCH").
struct PuHead {
    std::vector<double> weights;
    double bias = 0.0;
    std::string image_id;

    static PuHead zeros(int dim, std::string image_id = {});
    int dim() const noexcept { return static_cast<int>(weights.size()); }
    double score(std::span<const float> x) const;
};

/// Positive features X_p, unlabeled features X_u and the class prior.
struct PuProblem {
    FeatureMatrix positive;
    FeatureMatrix unlabeled;
    double prior = 0.0;

    int dim() const noexcept { return static_cast<int>(positive.cols()); }
};

/// pi_p = n_p / (n_p + n_u). Throws PriorError when either count is zero.
double estimate_prior(std::size_t n_p, std::size_t n_u);

/// Builds a problem with prior = n_p / (n_p + n_u) from the matrix row counts.
PuProblem make_pu_problem(FeatureMatrix positive, FeatureMatrix unlabeled);
/// Same, but the prior is computed from explicit counts (used when the
/// matrices are subsamples of larger sets).
PuProblem make_pu_problem(FeatureMatrix positive, FeatureMatrix unlabeled, std::size_t n_p, std::size_t n_u);

enum class Surrogate { sigmoid, zero_one };

/// The three empirical risks and the non-negative PU risk built from them.
struct PuRisk {
    double positive_pos = 0.0;   // R_p^+ : positives scored as positive-class loss
    double unlabeled_neg = 0.0;  // R_u^- : unlabeled treated as negative
    double positive_neg = 0.0;   // R_p^- : positives treated as negative
    double prior = 0.0;

    /// R_u^- - pi_p R_p^-, the estimated negative-class risk before clamping.
    double negative_part() const { return unlabeled_neg - prior * positive_neg; }
    double value() const;
};

/// Loss of a score z for label +1 / -1. sigmoid: l(z,+1)=s(-z), l(z,-1)=s(z).
/// zero_one: 1 when y*z <= 0, else 0.
double pu_loss(double z, int label, Surrogate surrogate);

PuRisk pu_risk_terms(const PuHead& head, const PuProblem& problem, Surrogate surrogate);
/// pi_p R_p^+ + max{0, R_u^- - pi_p R_p^-}
double pu_risk(const PuHead& head, const PuProblem& problem, Surrogate surrogate);

/// Descent direction used for training (sigmoid surrogate). When the
/// negative part is >= 0 it is the exact gradient of the risk; otherwise it is
/// the gradient of -(R_u^- - pi_p R_p^-), which pushes the negative part back up.
struct PuGradient {
    std::vector<double> weights;
    double bias = 0.0;
    bool clamp_branch = false;
    PuRisk risk;
};
PuGradient pu_risk_gradient(const PuHead& head, const PuProblem& problem);

struct PuTrainConfig {
    int epochs = 2000;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_samples = 50000;  // per feature set, applied by the stage
    std::uint64_t seed = 0;
};

struct PuTrainResult {
    PuHead head;
    double initial_risk = 0.0;  // sigmoid surrogate, zero head
    double final_risk = 0.0;
    int clamp_activations = 0;
};

/// Full-batch Adam on the sigmoid-surrogate risk, starting from a zero head.
PuTrainResult train_pu_head_detailed(const PuProblem& problem, const PuTrainConfig& config);
PuHead train_pu_head(const PuProblem& problem, const PuTrainConfig& config);

struct ScoredPixel {
    PixelIndex index;
    double score = 0.0;
};

/// f(x(j)) for every unlabeled pixel j, in the order of `unlabeled`.
struct PuScoreMap {
    std::string image_id;
    std::vector<ScoredPixel> scores;
};

PuScoreMap score_unlabeled(const PuHead& head, const FeatureStack& features, const std::vector<PixelIndex>& unlabeled);

/// The floor(alpha/100 * n) lowest-scoring pixels (ties: row-major order),
/// returned sorted row-major.
std::vector<PixelIndex> select_pu_negatives(const PuScoreMap& scores, double alpha);

/// Rows of `features` at `pixels`, as doubles.
FeatureMatrix gather_features(const FeatureStack& features, const std::vector<PixelIndex>& pixels);

}  // namespace puseg
