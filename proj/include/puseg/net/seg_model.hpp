#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "puseg/core/image_sample.hpp"
#include "puseg/net/backbone.hpp"

namespace puseg {

/// Per-pixel foreground confidence in [0, 1].
struct ConfidenceMap {
    std::string image_id;
    ImageF values;
};

/// Per-pixel feature vectors, stored H x W x D (one contiguous D-vector per pixel).
struct FeatureStack {
    std::string image_id;
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<float> data;

    std::span<const float> at(int r, int c) const {
        return {data.data() + (static_cast<std::size_t>(r) * cols + c) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const float> at(PixelIndex p) const { return at(p.row, p.col); }
};

/// Single fully connected layer mapping a feature vector to a logit.
struct LinearHead {
    std::vector<double> weights;
    double bias = 0.0;

    double logit(std::span<const float> x) const {
        double z = bias;
        for (std::size_t d = 0; d < weights.size(); ++d) z += weights[d] * static_cast<double>(x[d]);
        return z;
    }
};

double sigmoid(double z);

/// Segmentation network g = head o g'. The head runs in double precision.
class SegModel {
public:
    SegModel() = default;
    explicit SegModel(std::unique_ptr<Backbone> backbone);
    SegModel(const SegModel& other);
    SegModel& operator=(const SegModel& other);
    SegModel(SegModel&&) noexcept = default;
    SegModel& operator=(SegModel&&) noexcept = default;

    /// Fresh model: backbone initialised from `seed`, head zero-initialised.
    static SegModel create(const std::string& backbone_kind, std::uint64_t seed);

    bool valid() const noexcept { return backbone_ != nullptr; }
    std::string backbone_kind() const { return backbone_->kind(); }
    int feature_dim() const { return backbone_->feature_dim(); }

    Backbone& backbone() { return *backbone_; }
    const Backbone& backbone() const { return *backbone_; }
    LinearHead& head() noexcept { return head_; }
    const LinearHead& head() const noexcept { return head_; }

    ConfidenceMap predict(const ImageSample& image) const;
    ConfidenceMap predict(const ImageF& pixels, const std::string& image_id) const;
    FeatureStack extract_features(const ImageSample& image) const;
    FeatureStack extract_features(const ImageF& pixels, const std::string& image_id) const;
    /// Final classification layer applied to a feature stack.
    ConfidenceMap apply_head(const FeatureStack& features) const;

    /// Hash of all parameter bytes; equal digests mean equal parameters.
    std::uint64_t parameter_digest();

private:
    std::unique_ptr<Backbone> backbone_;
    LinearHead head_;
};

/// Maps image intensities to the network input convention (centred at 0).
Tensor<float> to_input_tensor(const ImageF& pixels);

}  // namespace puseg
