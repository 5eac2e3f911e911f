#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "puseg/net/tensor.hpp"

namespace puseg {

/// Activation record kept between a training forward pass and its backward pass.
struct BackboneTape {
    virtual ~BackboneTape() = default;
};

/// Feature extractor g' : image -> per-pixel feature vectors (everything before
/// the final 1x1 classification layer). Implementations own their gradient
/// accumulators; forward() is const and safe to call concurrently.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual std::string kind() const = 0;
    virtual int feature_dim() const = 0;
    /// Input height and width must be multiples of this.
    virtual int size_multiple() const = 0;
    virtual std::unique_ptr<Backbone> clone() const = 0;
    virtual void initialize(std::uint64_t seed) = 0;

    virtual std::unique_ptr<BackboneTape> make_tape() const = 0;
    /// input: 1 x H x W. Returns feature_dim x H x W.
    virtual Tensor<float> forward(const Tensor<float>& input, BackboneTape* tape) const = 0;
    virtual void backward(const BackboneTape& tape, Tensor<float> grad_features) = 0;
    virtual std::vector<ParamView<float>> parameters() = 0;
};

using BackboneFactory = std::function<std::unique_ptr<Backbone>()>;

/// Registers a backbone under `kind` (used for checkpoints and configs).
/// "mini_unet" is pre-registered.
void register_backbone(const std::string& kind, BackboneFactory factory);
std::unique_ptr<Backbone> make_backbone(const std::string& kind);
std::vector<std::string> registered_backbones();

std::unique_ptr<Backbone> make_mini_unet(int base_width = 16);

}  // namespace puseg
