#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "puseg/net/tensor.hpp"
#include "puseg/rng.hpp"

namespace puseg::layers {

/// 3x3 convolution, stride 1, zero padding 1, computed as im2col + GEMM.
template <typename T>
struct Conv3x3 {
    int in_channels = 0;
    int out_channels = 0;
    AlignedVector<T> weight;  // out x (in * 9), row-major
    AlignedVector<T> bias;
    AlignedVector<T> grad_weight;
    AlignedVector<T> grad_bias;

    Conv3x3() = default;
    Conv3x3(int in, int out)
        : in_channels(in), out_channels(out), weight(static_cast<std::size_t>(in) * 9 * out), bias(out),
          grad_weight(weight.size()), grad_bias(out) {}

    void initialize(Rng& rng) {
        std::normal_distribution<double> n(0.0, std::sqrt(2.0 / (in_channels * 9.0)));
        for (auto& w : weight) w = static_cast<T>(n(rng));
        std::fill(bias.begin(), bias.end(), T{0});
    }

    static void im2col(const Tensor<T>& x, RowMatrix<T>& col) {
        const int h = x.rows, w = x.cols;
        col.resize(static_cast<Eigen::Index>(x.channels) * 9, h * w);
        for (int ci = 0; ci < x.channels; ++ci) {
            const T* src = x.channel(ci);
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T* dst = col.row(ci * 9 + ky * 3 + kx).data();
                    for (int y = 0; y < h; ++y) {
                        const int sy = y + ky - 1;
                        T* drow = dst + y * w;
                        if (sy < 0 || sy >= h) {
                            std::fill(drow, drow + w, T{0});
                            continue;
                        }
                        const T* srow = src + sy * w;
                        for (int x0 = 0; x0 < w; ++x0) {
                            const int sx = x0 + kx - 1;
                            drow[x0] = (sx >= 0 && sx < w) ? srow[sx] : T{0};
                        }
                    }
                }
            }
        }
    }

    static void col2im(const RowMatrix<T>& col, Tensor<T>& dx) {
        const int h = dx.rows, w = dx.cols;
        std::fill(dx.data.begin(), dx.data.end(), T{0});
        for (int ci = 0; ci < dx.channels; ++ci) {
            T* dst = dx.channel(ci);
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T* src = col.row(ci * 9 + ky * 3 + kx).data();
                    for (int y = 0; y < h; ++y) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= h) continue;
                        T* drow = dst + sy * w;
                        const T* srow = src + y * w;
                        const int x_lo = std::max(0, 1 - kx), x_hi = std::min(w, w + 1 - kx);
                        for (int x0 = x_lo; x0 < x_hi; ++x0) drow[x0 + kx - 1] += srow[x0];
                    }
                }
            }
        }
    }

    /// `col` receives the im2col matrix when non-null (needed by backward).
    Tensor<T> forward(const Tensor<T>& x, RowMatrix<T>* col) const {
        RowMatrix<T> local;
        RowMatrix<T>& c = col ? *col : local;
        im2col(x, c);
        Tensor<T> y(out_channels, x.rows, x.cols);
        ConstMatrixMap<T> wm(weight.data(), out_channels, in_channels * 9);
        auto ym = y.matrix();
        ym.noalias() = wm * c;
        for (int o = 0; o < out_channels; ++o) ym.row(o).array() += bias[o];
        return y;
    }

    /// Accumulates parameter gradients; returns dL/dx when `want_input_grad`.
    Tensor<T> backward(const Tensor<T>& dy, const RowMatrix<T>& col, int in_rows, int in_cols, bool want_input_grad) {
        auto dym = dy.matrix();
        MatrixMap<T> gw(grad_weight.data(), out_channels, in_channels * 9);
        gw.noalias() += dym * col.transpose();
        for (int o = 0; o < out_channels; ++o) grad_bias[o] += dym.row(o).sum();
        if (!want_input_grad) return {};
        ConstMatrixMap<T> wm(weight.data(), out_channels, in_channels * 9);
        RowMatrix<T> dcol = wm.transpose() * dym;
        Tensor<T> dx(in_channels, in_rows, in_cols);
        col2im(dcol, dx);
        return dx;
    }
};

/// 2x2 stride-2 transposed convolution (learned upsampling).
template <typename T>
struct UpConv2x2 {
    int in_channels = 0;
    int out_channels = 0;
    AlignedVector<T> weight;  // (out * 4) x in, row-major; row = o * 4 + dy * 2 + dx
    AlignedVector<T> bias;
    AlignedVector<T> grad_weight;
    AlignedVector<T> grad_bias;

    UpConv2x2() = default;
    UpConv2x2(int in, int out)
        : in_channels(in), out_channels(out), weight(static_cast<std::size_t>(in) * 4 * out), bias(out),
          grad_weight(weight.size()), grad_bias(out) {}

    void initialize(Rng& rng) {
        std::normal_distribution<double> n(0.0, std::sqrt(2.0 / in_channels));
        for (auto& w : weight) w = static_cast<T>(n(rng));
        std::fill(bias.begin(), bias.end(), T{0});
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        ConstMatrixMap<T> wm(weight.data(), out_channels * 4, in_channels);
        RowMatrix<T> tmp = wm * x.matrix();
        Tensor<T> y(out_channels, x.rows * 2, x.cols * 2);
        for (int o = 0; o < out_channels; ++o)
            for (int k = 0; k < 4; ++k) {
                const int dy = k / 2, dx = k % 2;
                const T* src = tmp.row(o * 4 + k).data();
                for (int r = 0; r < x.rows; ++r)
                    for (int c = 0; c < x.cols; ++c) y.at(o, 2 * r + dy, 2 * c + dx) = src[r * x.cols + c] + bias[o];
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x) {
        RowMatrix<T> dtmp(out_channels * 4, x.plane());
        for (int o = 0; o < out_channels; ++o) {
            T sum{0};
            for (int k = 0; k < 4; ++k) {
                const int ky = k / 2, kx = k % 2;
                T* dst = dtmp.row(o * 4 + k).data();
                for (int r = 0; r < x.rows; ++r)
                    for (int c = 0; c < x.cols; ++c) {
                        const T g = dy.at(o, 2 * r + ky, 2 * c + kx);
                        dst[r * x.cols + c] = g;
                        sum += g;
                    }
            }
            grad_bias[o] += sum;
        }
        MatrixMap<T> gw(grad_weight.data(), out_channels * 4, in_channels);
        gw.noalias() += dtmp * x.matrix().transpose();
        ConstMatrixMap<T> wm(weight.data(), out_channels * 4, in_channels);
        Tensor<T> dx(in_channels, x.rows, x.cols);
        dx.matrix().noalias() = wm.transpose() * dtmp;
        return dx;
    }
};

template <typename T>
void relu_inplace(Tensor<T>& x) {
    for (auto& v : x.data) v = v > T{0} ? v : T{0};
}

/// dy *= 1[y > 0], where y is the ReLU output.
template <typename T>
void relu_backward_inplace(Tensor<T>& dy, const Tensor<T>& y) {
    for (std::size_t i = 0; i < dy.data.size(); ++i)
        if (!(y.data[i] > T{0})) dy.data[i] = T{0};
}

/// 2x2 max pooling; `argmax` receives the winning input offset per output.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<int>* argmax) {
    Tensor<T> y(x.channels, x.rows / 2, x.cols / 2);
    if (argmax) argmax->resize(y.data.size());
    std::size_t k = 0;
    for (int ch = 0; ch < x.channels; ++ch)
        for (int r = 0; r < y.rows; ++r)
            for (int c = 0; c < y.cols; ++c, ++k) {
                int best = (2 * r) * x.cols + 2 * c;
                const T* plane = x.channel(ch);
                for (int d : {1, x.cols, x.cols + 1}) {
                    const int cand = (2 * r) * x.cols + 2 * c + d;
                    if (plane[cand] > plane[best]) best = cand;
                }
                y.data[k] = plane[best];
                if (argmax) (*argmax)[k] = best;
            }
    return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<int>& argmax, int in_rows, int in_cols) {
    Tensor<T> dx(dy.channels, in_rows, in_cols);
    std::size_t k = 0;
    for (int ch = 0; ch < dy.channels; ++ch) {
        T* plane = dx.channel(ch);
        for (int i = 0; i < dy.plane(); ++i, ++k) plane[argmax[k]] += dy.data[k];
    }
    return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> y(a.channels + b.channels, a.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return y;
}

/// Splits a gradient of concat(a, b) back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int first_channels) {
    Tensor<T> a(first_channels, y.rows, y.cols), b(y.channels - first_channels, y.rows, y.cols);
    std::copy_n(y.data.begin(), a.data.size(), a.data.begin());
    std::copy(y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()), y.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

}  // namespace puseg::layers
