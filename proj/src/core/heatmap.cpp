#include "puseg/core/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "puseg/errors.hpp"

namespace puseg {

HeatmapTarget build_heatmap(const std::vector<PixelIndex>& centerline, Shape shape, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("heatmap sigma must be positive");
    HeatmapTarget out{ImageF(shape, 0.0), sigma};

    // Beyond this radius exp(-d^2/2s^2) < 1e-16, below double resolution next to 1.
    const int radius = static_cast<int>(std::ceil(sigma * 8.6));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (const auto& p : centerline) {
        if (!shape.contains(p.row, p.col)) throw ShapeError("heatmap center point out of bounds");
        const int r0 = std::max(0, p.row - radius), r1 = std::min(shape.rows - 1, p.row + radius);
        const int c0 = std::max(0, p.col - radius), c1 = std::min(shape.cols - 1, p.col + radius);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dr = r - p.row, dc = c - p.col;
                double& v = out.values(r, c);
                v = std::max(v, std::exp(-(dr * dr + dc * dc) * inv));
            }
        }
    }
    return out;
}

}  // namespace puseg
