#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace puseg {

/// 64-byte aligned storage: Eigen's vectorised reductions then split sums
/// the same way on every run.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Channel-major C x H x W activation.
template <typename T>
struct Tensor {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    AlignedVector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T{})
        : channels(c), rows(h), cols(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    int plane() const noexcept { return rows * cols; }
    T* channel(int c) noexcept { return data.data() + static_cast<std::size_t>(c) * plane(); }
    const T* channel(int c) const noexcept { return data.data() + static_cast<std::size_t>(c) * plane(); }
    T& at(int c, int r, int col) noexcept { return channel(c)[r * cols + col]; }
    const T& at(int c, int r, int col) const noexcept { return channel(c)[r * cols + col]; }

    MatrixMap<T> matrix() noexcept { return {data.data(), channels, plane()}; }
    ConstMatrixMap<T> matrix() const noexcept { return {data.data(), channels, plane()}; }
};

/// A named trainable array and its gradient accumulator.
template <typename T>
struct ParamView {
    std::string name;
    std::span<T> value;
    std::span<T> grad;
};

}  // namespace puseg
