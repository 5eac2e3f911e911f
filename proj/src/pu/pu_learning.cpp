#include "puseg/pu/pu_learning.hpp"

#include <algorithm>
#include <cmath>

#include "puseg/errors.hpp"

namespace puseg {

PuHead PuHead::zeros(int dim, std::string image_id) {
    return {std::vector<double>(static_cast<std::size_t>(dim), 0.0), 0.0, std::move(image_id)};
}

double PuHead::score(std::span<const float> x) const {
    double z = bias;
    for (std::size_t d = 0; d < weights.size(); ++d) z += weights[d] * static_cast<double>(x[d]);
    return z;
}

double estimate_prior(std::size_t n_p, std::size_t n_u) {
    if (n_p == 0 || n_u == 0) throw PriorError("class prior needs at least one positive and one unlabeled sample");
    return static_cast<double>(n_p) / static_cast<double>(n_p + n_u);
}

PuProblem make_pu_problem(FeatureMatrix positive, FeatureMatrix unlabeled) {
    const auto n_p = static_cast<std::size_t>(positive.rows());
    const auto n_u = static_cast<std::size_t>(unlabeled.rows());
    return make_pu_problem(std::move(positive), std::move(unlabeled), n_p, n_u);
}

PuProblem make_pu_problem(FeatureMatrix positive, FeatureMatrix unlabeled, std::size_t n_p, std::size_t n_u) {
    if (positive.rows() == 0 || unlabeled.rows() == 0) throw PriorError("PU problem needs non-empty feature sets");
    if (positive.cols() != unlabeled.cols()) throw ShapeError("positive and unlabeled feature widths differ");
    const double prior = estimate_prior(n_p, n_u);
    return {std::move(positive), std::move(unlabeled), prior};
}

double PuRisk::value() const { return prior * positive_pos + std::max(0.0, negative_part()); }

double pu_loss(double z, int label, Surrogate surrogate) {
    if (surrogate == Surrogate::sigmoid) return sigmoid(-static_cast<double>(label) * z);
    return label * z <= 0.0 ? 1.0 : 0.0;
}

namespace {

Eigen::VectorXd scores_of(const PuHead& head, const FeatureMatrix& x) {
    if (x.cols() != head.dim()) throw ShapeError("feature width does not match PU head");
    const Eigen::Map<const Eigen::VectorXd> w(head.weights.data(), head.dim());
    return (x * w).array() + head.bias;
}

}  // namespace

PuRisk pu_risk_terms(const PuHead& head, const PuProblem& problem, Surrogate surrogate) {
    const Eigen::VectorXd zp = scores_of(head, problem.positive);
    const Eigen::VectorXd zu = scores_of(head, problem.unlabeled);
    PuRisk r;
    r.prior = problem.prior;
    for (Eigen::Index i = 0; i < zp.size(); ++i) {
        r.positive_pos += pu_loss(zp[i], +1, surrogate);
        r.positive_neg += pu_loss(zp[i], -1, surrogate);
    }
    for (Eigen::Index i = 0; i < zu.size(); ++i) r.unlabeled_neg += pu_loss(zu[i], -1, surrogate);
    r.positive_pos /= static_cast<double>(zp.size());
    r.positive_neg /= static_cast<double>(zp.size());
    r.unlabeled_neg /= static_cast<double>(zu.size());
    return r;
}

double pu_risk(const PuHead& head, const PuProblem& problem, Surrogate surrogate) {
    return pu_risk_terms(head, problem, surrogate).value();
}

PuGradient pu_risk_gradient(const PuHead& head, const PuProblem& problem) {
    const Eigen::VectorXd zp = scores_of(head, problem.positive);
    const Eigen::VectorXd zu = scores_of(head, problem.unlabeled);
    const double np = static_cast<double>(zp.size()), nu = static_cast<double>(zu.size());
    const double pi = problem.prior;

    PuGradient g;
    g.risk.prior = pi;
    // s'(z) = s(z) s(-z); d l(z,+1)/dz = -s'(z), d l(z,-1)/dz = +s'(z).
    Eigen::VectorXd dp_pos(zp.size()), dp_neg(zp.size()), du_neg(zu.size());
    for (Eigen::Index i = 0; i < zp.size(); ++i) {
        const double s = sigmoid(zp[i]), sm = sigmoid(-zp[i]);
        g.risk.positive_pos += sm;
        g.risk.positive_neg += s;
        dp_pos[i] = -s * sm / np;
        dp_neg[i] = s * sm / np;
    }
    for (Eigen::Index i = 0; i < zu.size(); ++i) {
        const double s = sigmoid(zu[i]), sm = sigmoid(-zu[i]);
        g.risk.unlabeled_neg += s;
        du_neg[i] = s * sm / nu;
    }
    g.risk.positive_pos /= np;
    g.risk.positive_neg /= np;
    g.risk.unlabeled_neg /= nu;

    // dz/dw = x, dz/db = 1.
    Eigen::VectorXd coef_p, coef_u;
    if (g.risk.negative_part() >= 0.0) {
        coef_p = pi * dp_pos - pi * dp_neg;
        coef_u = du_neg;
    } else {
        g.clamp_branch = true;
        coef_p = pi * dp_neg;
        coef_u = -du_neg;
    }
    const Eigen::VectorXd gw = problem.positive.transpose() * coef_p + problem.unlabeled.transpose() * coef_u;
    g.weights.assign(gw.data(), gw.data() + gw.size());
    g.bias = coef_p.sum() + coef_u.sum();
    return g;
}

PuTrainResult train_pu_head_detailed(const PuProblem& problem, const PuTrainConfig& config) {
    if (config.epochs < 1) throw ConfigError("PU training needs epochs >= 1");
    if (!(config.learning_rate > 0.0)) throw ConfigError("PU learning rate must be positive");
    if (problem.positive.rows() == 0 || problem.unlabeled.rows() == 0) throw PriorError("empty PU problem");

    const int dim = problem.dim();
    PuTrainResult out{PuHead::zeros(dim), 0.0, 0.0, 0};
    out.initial_risk = pu_risk(out.head, problem, Surrogate::sigmoid);

    std::vector<double> m(static_cast<std::size_t>(dim) + 1, 0.0), v(m.size(), 0.0);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const PuGradient g = pu_risk_gradient(out.head, problem);
        if (!std::isfinite(g.risk.value())) throw DivergenceError("PU risk is not finite", epoch);
        out.clamp_activations += g.clamp_branch;

        const double c1 = 1.0 - std::pow(config.beta1, epoch), c2 = 1.0 - std::pow(config.beta2, epoch);
        for (int k = 0; k <= dim; ++k) {
            const double grad = k < dim ? g.weights[k] : g.bias;
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad;
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad * grad;
            const double step = config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.adam_eps);
            (k < dim ? out.head.weights[k] : out.head.bias) -= step;
        }
    }
    out.final_risk = pu_risk(out.head, problem, Surrogate::sigmoid);
    if (!std::isfinite(out.final_risk)) throw DivergenceError("PU risk is not finite", config.epochs);
    return out;
}

PuHead train_pu_head(const PuProblem& problem, const PuTrainConfig& config) {
    return train_pu_head_detailed(problem, config).head;
}

PuScoreMap score_unlabeled(const PuHead& head, const FeatureStack& features, const std::vector<PixelIndex>& unlabeled) {
    if (features.dim != head.dim()) throw ShapeError("feature width does not match PU head");
    PuScoreMap out{features.image_id, {}};
    out.scores.reserve(unlabeled.size());
    for (const auto& p : unlabeled) {
        if (p.row < 0 || p.col < 0 || p.row >= features.rows || p.col >= features.cols)
            throw ShapeError("unlabeled index out of bounds");
        out.scores.push_back({p, head.score(features.at(p))});
    }
    return out;
}

std::vector<PixelIndex> select_pu_negatives(const PuScoreMap& scores, double alpha) {
    if (scores.scores.empty()) throw ConfigError("cannot select PU negatives from an empty score map");
    if (!(alpha > 0.0 && alpha < 100.0)) throw ConfigError("alpha must lie in (0,100)");
    const auto n = scores.scores.size();
    const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) / 100.0));

    std::vector<ScoredPixel> sorted = scores.scores;
    auto lower = [](const ScoredPixel& a, const ScoredPixel& b) {
        return a.score != b.score ? a.score < b.score : a.index < b.index;
    };
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(), lower);

    std::vector<PixelIndex> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(sorted[i].index);
    std::sort(out.begin(), out.end());
    return out;
}

FeatureMatrix gather_features(const FeatureStack& features, const std::vector<PixelIndex>& pixels) {
    FeatureMatrix m(static_cast<Eigen::Index>(pixels.size()), features.dim);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const auto x = features.at(pixels[i]);
        for (int d = 0; d < features.dim; ++d) m(static_cast<Eigen::Index>(i), d) = x[d];
    }
    return m;
}

}  // namespace puseg
