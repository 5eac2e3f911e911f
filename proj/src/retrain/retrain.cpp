#include "puseg/retrain/retrain.hpp"

#include <spdlog/spdlog.h>

#include "puseg/errors.hpp"
#include "puseg/net/losses.hpp"

namespace puseg {

SparseLabels to_sparse_labels(const PseudoLabelSet& labels) {
    validate(labels);
    SparseLabels out;
    for (const auto& p : labels.positives) out.emplace(p, 1);
    for (const auto& p : labels.negatives) out.emplace(p, 0);
    for (const auto& p : labels.pu_negatives) out.emplace(p, 0);
    return out;
}

namespace {

void check_keys(const ConfidenceMap& pred, const SparseLabels& labels) {
    for (const auto& [p, y] : labels) {
        if (!pred.values.shape().contains(p.row, p.col)) throw ShapeError("sparse label index out of bounds");
        if (y != 0 && y != 1) throw ShapeError("sparse labels must be 0 or 1");
    }
}

}  // namespace

double masked_loss(const ConfidenceMap& pred, const SparseLabels& labels) {
    check_keys(pred, labels);
    if (labels.empty()) {
        spdlog::warn("image '{}' has no pseudo-labels; masked loss is 0", pred.image_id);
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& [p, y] : labels) sum += bce(pred.values[p], y);
    return sum / static_cast<double>(labels.size());
}

ImageF masked_loss_gradient(const ConfidenceMap& pred, const SparseLabels& labels) {
    check_keys(pred, labels);
    ImageF g(pred.values.shape(), 0.0);
    const double n = static_cast<double>(labels.size());
    for (const auto& [p, y] : labels) {
        const double v = pred.values[p];
        if (v < kProbEps || v > 1.0 - kProbEps) continue;
        g[p] = (y ? -1.0 / v : 1.0 / (1.0 - v)) / n;
    }
    return g;
}

RetrainInit parse_retrain_init(std::string_view text) {
    if (text == "from_scratch") return RetrainInit::from_scratch;
    if (text == "warm_start") return RetrainInit::warm_start;
    throw ConfigError("unknown retrain init '" + std::string(text) + "'");
}

std::string_view to_string(RetrainInit init) {
    return init == RetrainInit::from_scratch ? "from_scratch" : "warm_start";
}

SegModel retrain(RetrainInit init, const SegModel* warm, const std::vector<ImageSample>& labeled,
                 const std::vector<ImageSample>& unlabeled, const std::map<std::string, PseudoLabelSet>& pseudo,
                 const TrainConfig& config, TrainingTrace* trace) {
    validate(config);
    if (labeled.empty()) throw ConfigError("retraining needs labeled samples");

    std::vector<DenseExample> dense;
    for (const auto& s : labeled) dense.push_back({&s.pixels, dense_target(s, config.target, config.heatmap_sigma)});

    std::vector<SparseExample> sparse;
    for (const auto& s : unlabeled) {
        auto it = pseudo.find(s.id);
        if (it == pseudo.end()) continue;
        if (it->second.shape != s.shape()) throw ShapeError("pseudo-labels of '" + s.id + "' do not match its image");
        sparse.push_back({&s.pixels, to_label_grid(it->second)});
    }

    SegModel start;
    if (init == RetrainInit::warm_start) {
        if (!warm || !warm->valid()) throw ConfigError("warm-start retraining needs the pre-trained model");
        start = *warm;
    } else {
        start = SegModel::create(config.backbone, init_seed(config));
    }
    return fit(std::move(start), dense, sparse, config, trace);
}

}  // namespace puseg
