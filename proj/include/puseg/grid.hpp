#pragma once

#include <algorithm>
#include <cassert>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace puseg {

struct Shape {
    int rows = 0;
    int cols = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows && c < cols; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// A pixel coordinate. Ordered row-major, which is the tie-break order used throughout.
struct PixelIndex {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Dense row-major 2-D array.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
    Grid(int rows, int cols, T fill = T{}) : Grid(Shape{rows, cols}, fill) {}

    Shape shape() const noexcept { return shape_; }
    int rows() const noexcept { return shape_.rows; }
    int cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int r, int c) {
        assert(shape_.contains(r, c));
        return data_[static_cast<std::size_t>(r) * shape_.cols + c];
    }
    const T& operator()(int r, int c) const {
        assert(shape_.contains(r, c));
        return data_[static_cast<std::size_t>(r) * shape_.cols + c];
    }
    T& operator[](PixelIndex p) { return (*this)(p.row, p.col); }
    const T& operator[](PixelIndex p) const { return (*this)(p.row, p.col); }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Shape shape_{};
    std::vector<T> data_;
};

using ImageF = Grid<double>;
using Mask = Grid<std::uint8_t>;

/// Geometric transform applied consistently to images, masks and label grids.
struct Orientation {
    int quarter_turns = 0;  // counter-clockwise, 0..3
    bool flip_horizontal = false;
};

/// Applies `o` (flip first, then rotate) to a grid.
template <typename T>
Grid<T> reorient(const Grid<T>& in, Orientation o) {
    Grid<T> cur = in;
    if (o.flip_horizontal) {
        Grid<T> f(cur.shape());
        for (int r = 0; r < cur.rows(); ++r)
            for (int c = 0; c < cur.cols(); ++c) f(r, cur.cols() - 1 - c) = cur(r, c);
        cur = std::move(f);
    }
    for (int t = 0; t < (o.quarter_turns % 4 + 4) % 4; ++t) {
        Grid<T> rot(cur.cols(), cur.rows());
        for (int r = 0; r < cur.rows(); ++r)
            for (int c = 0; c < cur.cols(); ++c) rot(cur.cols() - 1 - c, r) = cur(r, c);
        cur = std::move(rot);
    }
    return cur;
}

/// Copies the window starting at (r0, c0) of size `window`; the window must lie inside `in`.
template <typename T>
Grid<T> crop(const Grid<T>& in, int r0, int c0, Shape window) {
    Grid<T> out(window);
    for (int r = 0; r < window.rows; ++r)
        std::copy_n(&in(r0 + r, c0), window.cols, &out(r, 0));
    return out;
}

}  // namespace puseg
