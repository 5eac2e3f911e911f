#pragma once

#include <array>
#include <vector>

#include "puseg/net/layers.hpp"

namespace puseg {

/// Three-level encoder-decoder with skip connections. The output is the
/// per-pixel feature map fed to the 1x1 classification head (width `base`).
template <typename T>
class MiniUNetNet {
public:
    static constexpr int kSizeMultiple = 4;
    /// The last conv has no ReLU: features handed to the 1x1 head are signed.
    static constexpr int kFeatureSlot = 9;

    struct Tape {
        std::array<RowMatrix<T>, 10> cols;
        std::array<Tensor<T>, 10> acts;  // ReLU outputs, in layer order
        std::vector<int> pool1, pool2;
        int rows = 0, cols_ = 0;
    };

    explicit MiniUNetNet(int base = 16)
        : base_(base),
          e1a_(1, base), e1b_(base, base),
          e2a_(base, 2 * base), e2b_(2 * base, 2 * base),
          ba_(2 * base, 4 * base), bb_(4 * base, 4 * base),
          up2_(4 * base, 2 * base),
          d2a_(4 * base, 2 * base), d2b_(2 * base, 2 * base),
          up1_(2 * base, base),
          d1a_(2 * base, base), d1b_(base, base) {}

    int feature_dim() const noexcept { return base_; }

    void initialize(Rng& rng) {
        for (auto* c : convs()) c->initialize(rng);
        up2_.initialize(rng);
        up1_.initialize(rng);
    }

    /// x is 1 x H x W with H, W multiples of kSizeMultiple. Records
    /// activations into `tape` when non-null.
    Tensor<T> forward(const Tensor<T>& x, Tape* tape) const {
        auto step = [&](const layers::Conv3x3<T>& conv, const Tensor<T>& in, int slot) {
            Tensor<T> y = conv.forward(in, tape ? &tape->cols[slot] : nullptr);
            if (slot != kFeatureSlot) layers::relu_inplace(y);
            if (tape) tape->acts[slot] = y;
            return y;
        };
        if (tape) {
            tape->rows = x.rows;
            tape->cols_ = x.cols;
        }
        Tensor<T> s1 = step(e1b_, step(e1a_, x, 0), 1);
        Tensor<T> s2 = step(e2b_, step(e2a_, layers::maxpool2(s1, tape ? &tape->pool1 : nullptr), 2), 3);
        Tensor<T> b = step(bb_, step(ba_, layers::maxpool2(s2, tape ? &tape->pool2 : nullptr), 4), 5);
        Tensor<T> d2 = step(d2b_, step(d2a_, layers::concat_channels(up2_.forward(b), s2), 6), 7);
        return step(d1b_, step(d1a_, layers::concat_channels(up1_.forward(d2), s1), 8), 9);
    }

    /// Accumulates parameter gradients given dL/d(features).
    void backward(const Tape& tape, Tensor<T> grad) {
        const int h = tape.rows, w = tape.cols_;
        auto step = [&](layers::Conv3x3<T>& conv, Tensor<T> g, int slot, int r, int c, bool want = true) {
            if (slot != kFeatureSlot) layers::relu_backward_inplace(g, tape.acts[slot]);
            return conv.backward(g, tape.cols[slot], r, c, want);
        };

        Tensor<T> g = step(d1a_, step(d1b_, std::move(grad), 9, h, w), 8, h, w);
        auto [g_up1, g_s1] = layers::split_channels(g, base_);
        g = up1_.backward(g_up1, tape.acts[7]);

        g = step(d2a_, step(d2b_, std::move(g), 7, h / 2, w / 2), 6, h / 2, w / 2);
        auto [g_up2, g_s2] = layers::split_channels(g, 2 * base_);
        g = up2_.backward(g_up2, tape.acts[5]);

        g = step(ba_, step(bb_, std::move(g), 5, h / 4, w / 4), 4, h / 4, w / 4);
        g = layers::maxpool2_backward(g, tape.pool2, h / 2, w / 2);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += g_s2.data[i];

        g = step(e2a_, step(e2b_, std::move(g), 3, h / 2, w / 2), 2, h / 2, w / 2);
        g = layers::maxpool2_backward(g, tape.pool1, h, w);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += g_s1.data[i];

        step(e1a_, step(e1b_, std::move(g), 1, h, w), 0, h, w, false);
    }

    std::vector<ParamView<T>> parameters() {
        std::vector<ParamView<T>> out;
        auto add = [&](const std::string& name, auto& layer) {
            out.push_back({name + ".weight", layer.weight, layer.grad_weight});
            out.push_back({name + ".bias", layer.bias, layer.grad_bias});
        };
        add("enc1.conv1", e1a_);
        add("enc1.conv2", e1b_);
        add("enc2.conv1", e2a_);
        add("enc2.conv2", e2b_);
        add("bottleneck.conv1", ba_);
        add("bottleneck.conv2", bb_);
        add("up2", up2_);
        add("dec2.conv1", d2a_);
        add("dec2.conv2", d2b_);
        add("up1", up1_);
        add("dec1.conv1", d1a_);
        add("dec1.conv2", d1b_);
        return out;
    }

private:
    std::array<layers::Conv3x3<T>*, 10> convs() {
        return {&e1a_, &e1b_, &e2a_, &e2b_, &ba_, &bb_, &d2a_, &d2b_, &d1a_, &d1b_};
    }

    int base_;
    layers::Conv3x3<T> e1a_, e1b_, e2a_, e2b_, ba_, bb_;
    layers::UpConv2x2<T> up2_;
    layers::Conv3x3<T> d2a_, d2b_;
    layers::UpConv2x2<T> up1_;
    layers::Conv3x3<T> d1a_, d1b_;
};

}  // namespace puseg
