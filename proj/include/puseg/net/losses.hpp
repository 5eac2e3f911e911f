#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "puseg/net/seg_model.hpp"

namespace puseg {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] inside every BCE.
inline constexpr double kProbEps = 1e-7;

double clamp_probability(double p);

/// -(t log p + (1 - t) log(1 - p)) with clamping; t may be soft.
double bce(double p, double target);

/// d bce(sigmoid(z), t) / dz; zero where the clamp is active.
double bce_logit_grad(double z, double target);

struct HeadLossResult {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
    std::vector<double> grad_logits;  // per pixel, zero for pixels without a label
    std::size_t keyed = 0;
};

/// scale * sum over keyed pixels of bce(sigmoid(head(x)), target) and its
/// gradients. `features` is D x N, `keyed` empty means every pixel. A
/// non-positive `scale` means 1 / (number of keyed pixels), i.e. the mean.
HeadLossResult head_bce(const Tensor<float>& features, std::span<const double> targets,
                        std::span<const std::uint8_t> keyed, const LinearHead& head, double scale = 0.0);

}  // namespace puseg
