#include "puseg/net/seg_model.hpp"

#include <cmath>
#include <cstring>

#include "puseg/errors.hpp"

namespace puseg {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

SegModel::SegModel(std::unique_ptr<Backbone> backbone) : backbone_(std::move(backbone)) {
    head_.weights.assign(static_cast<std::size_t>(backbone_->feature_dim()), 0.0);
}

SegModel::SegModel(const SegModel& other)
    : backbone_(other.backbone_ ? other.backbone_->clone() : nullptr), head_(other.head_) {}

SegModel& SegModel::operator=(const SegModel& other) {
    if (this != &other) {
        backbone_ = other.backbone_ ? other.backbone_->clone() : nullptr;
        head_ = other.head_;
    }
    return *this;
}

SegModel SegModel::create(const std::string& backbone_kind, std::uint64_t seed) {
    SegModel m(make_backbone(backbone_kind));
    m.backbone_->initialize(seed);
    return m;
}

Tensor<float> to_input_tensor(const ImageF& pixels) {
    Tensor<float> t(1, pixels.rows(), pixels.cols());
    for (std::size_t i = 0; i < pixels.size(); ++i) t.data[i] = static_cast<float>(pixels.data()[i] - 0.5);
    return t;
}

FeatureStack SegModel::extract_features(const ImageSample& image) const {
    return extract_features(image.pixels, image.id);
}

FeatureStack SegModel::extract_features(const ImageF& pixels, const std::string& image_id) const {
    if (!valid()) throw ConfigError("model has no backbone");
    const int m = backbone_->size_multiple();
    const int h = pixels.rows(), w = pixels.cols();
    const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;

    // Edge-replicate pad to the backbone stride, then crop features back.
    ImageF padded(ph, pw);
    for (int r = 0; r < ph; ++r)
        for (int c = 0; c < pw; ++c) padded(r, c) = pixels(std::min(r, h - 1), std::min(c, w - 1));
    const Tensor<float> f = backbone_->forward(to_input_tensor(padded), nullptr);

    FeatureStack out{image_id, h, w, f.channels, {}};
    out.data.resize(static_cast<std::size_t>(h) * w * f.channels);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            float* dst = out.data.data() + (static_cast<std::size_t>(r) * w + c) * f.channels;
            for (int d = 0; d < f.channels; ++d) dst[d] = f.at(d, r, c);
        }
    return out;
}

ConfidenceMap SegModel::apply_head(const FeatureStack& features) const {
    if (features.dim != static_cast<int>(head_.weights.size())) throw ShapeError("feature dim does not match head");
    ConfidenceMap out{features.image_id, ImageF(features.rows, features.cols)};
    for (int r = 0; r < features.rows; ++r)
        for (int c = 0; c < features.cols; ++c) out.values(r, c) = sigmoid(head_.logit(features.at(r, c)));
    return out;
}

ConfidenceMap SegModel::predict(const ImageSample& image) const { return predict(image.pixels, image.id); }

ConfidenceMap SegModel::predict(const ImageF& pixels, const std::string& image_id) const {
    return apply_head(extract_features(pixels, image_id));
}

std::uint64_t SegModel::parameter_digest() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& p : backbone_->parameters()) mix(p.value.data(), p.value.size_bytes());
    mix(head_.weights.data(), head_.weights.size() * sizeof(double));
    mix(&head_.bias, sizeof(double));
    return h;
}

}  // namespace puseg
