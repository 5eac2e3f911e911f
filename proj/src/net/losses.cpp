#include "puseg/net/losses.hpp"

#include <algorithm>
#include <cmath>

#include "puseg/errors.hpp"

namespace puseg {

double clamp_probability(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

double bce(double p, double target) {
    const double q = clamp_probability(p);
    return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

double bce_logit_grad(double z, double target) {
    const double p = sigmoid(z);
    if (p < kProbEps || p > 1.0 - kProbEps) return 0.0;
    return p - target;
}

HeadLossResult head_bce(const Tensor<float>& features, std::span<const double> targets,
                        std::span<const std::uint8_t> keyed, const LinearHead& head, double scale) {
    const int dim = features.channels;
    const int n = features.plane();
    if (static_cast<int>(head.weights.size()) != dim) throw ShapeError("head width does not match features");
    if (static_cast<int>(targets.size()) != n) throw ShapeError("target count does not match features");
    if (!keyed.empty() && static_cast<int>(keyed.size()) != n) throw ShapeError("key mask size does not match");

    HeadLossResult out;
    out.grad_weights.assign(static_cast<std::size_t>(dim), 0.0);
    out.grad_logits.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) out.keyed += keyed.empty() || keyed[i];
    if (out.keyed == 0) return out;
    if (!(scale > 0.0)) scale = 1.0 / static_cast<double>(out.keyed);

    std::vector<double> logits(static_cast<std::size_t>(n), head.bias);
    for (int d = 0; d < dim; ++d) {
        const float* f = features.channel(d);
        const double w = head.weights[d];
        for (int i = 0; i < n; ++i) logits[i] += w * static_cast<double>(f[i]);
    }
    for (int i = 0; i < n; ++i) {
        if (!keyed.empty() && !keyed[i]) continue;
        out.loss += bce(sigmoid(logits[i]), targets[i]);
        out.grad_logits[i] = scale * bce_logit_grad(logits[i], targets[i]);
        out.grad_bias += out.grad_logits[i];
    }
    out.loss *= scale;
    for (int d = 0; d < dim; ++d) {
        const float* f = features.channel(d);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += out.grad_logits[i] * static_cast<double>(f[i]);
        out.grad_weights[d] = acc;
    }
    return out;
}

}  // namespace puseg
