#include "puseg/net/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "puseg/errors.hpp"
#include "puseg/net/losses.hpp"
#include "puseg/rng.hpp"

namespace puseg {

TargetKind parse_target_kind(std::string_view text) {
    if (text == "mask") return TargetKind::mask;
    if (text == "heatmap") return TargetKind::heatmap;
    throw ConfigError("unknown target kind '" + std::string(text) + "'");
}

void validate(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (c.crop_size < 4) throw ConfigError("crop size too small");
    if (c.crops_per_step < 1) throw ConfigError("crops_per_step must be >= 1");
    if (!(c.heatmap_sigma > 0.0)) throw ConfigError("heatmap sigma must be positive");
}

std::uint64_t init_seed(const TrainConfig& config) { return derive_seed(config.seed, "init"); }

ImageF dense_target(const ImageSample& sample, TargetKind kind, double sigma) {
    if (kind == TargetKind::mask) {
        if (!sample.mask) throw MissingAnnotation("sample '" + sample.id + "' has no mask");
        ImageF t(sample.shape());
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = sample.mask->data()[i];
        return t;
    }
    if (!sample.centerline) throw MissingAnnotation("sample '" + sample.id + "' has no centerline");
    return build_heatmap(*sample.centerline, sample.shape(), sigma).values;
}

namespace {

class Adam {
public:
    Adam(const TrainConfig& c, SegModel& model) : cfg_(c) {
        for (const auto& p : model.backbone().parameters()) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
        m_.emplace_back(model.head().weights.size() + 1, 0.0);
        v_.emplace_back(model.head().weights.size() + 1, 0.0);
    }

    void step(SegModel& model, const std::vector<double>& head_grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_), c2 = 1.0 - std::pow(cfg_.beta2, t_);
        auto params = model.backbone().parameters();
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = params[k];
            for (std::size_t i = 0; i < p.value.size(); ++i)
                p.value[i] = static_cast<float>(p.value[i] - update(k, i, p.grad[i], c1, c2));
        }
        auto& head = model.head();
        const std::size_t k = params.size();
        for (std::size_t i = 0; i < head.weights.size(); ++i) head.weights[i] -= update(k, i, head_grad[i], c1, c2);
        head.bias -= update(k, head.weights.size(), head_grad.back(), c1, c2);
    }

private:
    double update(std::size_t k, std::size_t i, double g, double c1, double c2) {
        double& m = m_[k][i];
        double& v = v_[k][i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        return cfg_.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg_.adam_eps);
    }

    const TrainConfig& cfg_;
    std::vector<std::vector<double>> m_, v_;
    int t_ = 0;
};

struct Crop {
    ImageF pixels;
    std::vector<double> targets;
    std::vector<std::uint8_t> keyed;  // empty = all pixels
};

Shape crop_shape(Shape img, int crop, int multiple) {
    Shape s{std::min(crop, img.rows) / multiple * multiple, std::min(crop, img.cols) / multiple * multiple};
    if (s.rows == 0 || s.cols == 0) throw ShapeError("image smaller than the backbone stride");
    return s;
}

struct Window {
    int r0 = 0, c0 = 0;
    Shape shape;
    Orientation orientation;
};

Window sample_window(Rng& rng, Shape img, const TrainConfig& cfg, int multiple) {
    Window w;
    w.shape = crop_shape(img, cfg.crop_size, multiple);
    if (cfg.augment) {
        w.r0 = std::uniform_int_distribution<int>(0, img.rows - w.shape.rows)(rng);
        w.c0 = std::uniform_int_distribution<int>(0, img.cols - w.shape.cols)(rng);
        w.orientation.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
        w.orientation.flip_horizontal = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    } else {
        w.r0 = (img.rows - w.shape.rows) / 2;
        w.c0 = (img.cols - w.shape.cols) / 2;
    }
    return w;
}

template <typename G>
G take(const G& g, const Window& w) {
    return reorient(crop(g, w.r0, w.c0, w.shape), w.orientation);
}

Crop dense_crop(const DenseExample& ex, const Window& w) {
    Crop c{take(*ex.pixels, w), {}, {}};
    const ImageF t = take(ex.target, w);
    c.targets.assign(t.values().begin(), t.values().end());
    return c;
}

Crop sparse_crop(const SparseExample& ex, const Window& w) {
    Crop c{take(*ex.pixels, w), {}, {}};
    const auto labels = take(ex.labels, w);
    c.targets.resize(labels.size());
    c.keyed.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto v = labels.data()[i];
        c.keyed[i] = v >= 0;
        c.targets[i] = v > 0 ? 1.0 : 0.0;
    }
    return c;
}

std::size_t labelled_count(const SparseExample& ex) {
    std::size_t n = 0;
    for (auto v : ex.labels.values()) n += v >= 0;
    return n;
}

/// Forward/backward on one crop; accumulates gradients, returns the scaled loss.
double accumulate(SegModel& model, BackboneTape& tape, const Crop& crop, double scale, std::vector<double>& head_grad) {
    const Tensor<float> features = model.backbone().forward(to_input_tensor(crop.pixels), &tape);
    const auto res = head_bce(features, crop.targets, crop.keyed, model.head(), scale);
    if (res.keyed == 0) return 0.0;

    for (std::size_t d = 0; d < res.grad_weights.size(); ++d) head_grad[d] += res.grad_weights[d];
    head_grad.back() += res.grad_bias;

    Tensor<float> grad(features.channels, features.rows, features.cols);
    const auto& w = model.head().weights;
    for (int d = 0; d < features.channels; ++d) {
        float* g = grad.channel(d);
        for (int i = 0; i < features.plane(); ++i) g[i] = static_cast<float>(res.grad_logits[i] * w[d]);
    }
    model.backbone().backward(tape, std::move(grad));
    return res.loss;
}

}  // namespace

SegModel fit(SegModel model, const std::vector<DenseExample>& dense, const std::vector<SparseExample>& sparse_in,
             const TrainConfig& config, TrainingTrace* trace) {
    validate(config);
    if (!model.valid()) throw ConfigError("fit() needs an initialised model");

    std::vector<const SparseExample*> sparse;
    for (const auto& ex : sparse_in) {
        if (labelled_count(ex) > 0) sparse.push_back(&ex);
        else spdlog::warn("pseudo-labelled image without any label is skipped during training");
    }
    if (dense.empty() && sparse.empty()) throw ConfigError("nothing to train on");

    const int multiple = model.backbone().size_multiple();
    std::size_t pool_pixels = 0;
    for (const auto& ex : dense) pool_pixels += ex.pixels->size();
    for (const auto* ex : sparse) pool_pixels += ex->pixels->size();
    const std::size_t crop_area = static_cast<std::size_t>(config.crop_size) * config.crop_size;
    const auto steps_per_epoch = static_cast<int>(
        std::max<std::size_t>(1, (pool_pixels + crop_area * config.crops_per_step - 1) / (crop_area * config.crops_per_step)));

    int dense_per_step = config.crops_per_step, sparse_per_step = 0;
    if (!sparse.empty()) {
        dense_per_step = dense.empty() ? 0 : std::max(1, config.crops_per_step / 2);
        sparse_per_step = config.crops_per_step - dense_per_step;
    }

    Rng rng(derive_seed(config.seed, "batches"));
    Adam adam(config, model);
    auto tape = model.backbone().make_tape();
    std::vector<double> head_grad(model.head().weights.size() + 1);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int s = 0; s < steps_per_epoch; ++s) {
            std::vector<Crop> dense_crops, sparse_crops;
            for (int k = 0; k < dense_per_step; ++k) {
                const auto& ex = dense[std::uniform_int_distribution<std::size_t>(0, dense.size() - 1)(rng)];
                dense_crops.push_back(dense_crop(ex, sample_window(rng, ex.pixels->shape(), config, multiple)));
            }
            for (int k = 0; k < sparse_per_step; ++k) {
                const auto* ex = sparse[std::uniform_int_distribution<std::size_t>(0, sparse.size() - 1)(rng)];
                sparse_crops.push_back(sparse_crop(*ex, sample_window(rng, ex->pixels->shape(), config, multiple)));
            }

            std::size_t n_dense = 0, n_sparse = 0;
            for (const auto& c : dense_crops) n_dense += c.targets.size();
            for (const auto& c : sparse_crops) n_sparse += std::count(c.keyed.begin(), c.keyed.end(), 1);

            for (auto& p : model.backbone().parameters()) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
            std::fill(head_grad.begin(), head_grad.end(), 0.0);

            double loss = 0.0;
            for (const auto& c : dense_crops) loss += accumulate(model, *tape, c, 1.0 / n_dense, head_grad);
            if (n_sparse > 0)
                for (const auto& c : sparse_crops) loss += accumulate(model, *tape, c, 1.0 / n_sparse, head_grad);

            if (!std::isfinite(loss)) throw DivergenceError("training loss is not finite", epoch);
            adam.step(model, head_grad);
            epoch_loss += loss;
        }
        epoch_loss /= steps_per_epoch;
        if (trace) {
            trace->epoch_loss.push_back(epoch_loss);
            trace->param_digest.push_back(model.parameter_digest());
        }
        if (config.log_every > 0 && epoch % config.log_every == 0)
            spdlog::info("epoch {}/{} loss {:.5f}", epoch, config.epochs, epoch_loss);
    }
    return model;
}

SegModel train_supervised(const std::vector<ImageSample>& labeled, const TrainConfig& config, TrainingTrace* trace) {
    validate(config);
    if (labeled.empty()) throw ConfigError("no labeled samples");
    std::vector<DenseExample> dense;
    for (const auto& s : labeled) dense.push_back({&s.pixels, dense_target(s, config.target, config.heatmap_sigma)});
    return fit(SegModel::create(config.backbone, init_seed(config)), dense, {}, config, trace);
}

}  // namespace puseg
