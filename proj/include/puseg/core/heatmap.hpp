#pragma once

#include <vector>

#include "puseg/grid.hpp"

namespace puseg {

struct HeatmapTarget {
    ImageF values;
    double sigma = 2.0;
};

inline constexpr double kDefaultHeatmapSigma = 2.0;

/// Pointwise maximum of unit-peak Gaussians centred on each annotated point:
/// values(r,c) = max_p exp(-|(r,c)-p|^2 / (2 sigma^2)). Empty input gives zeros.
HeatmapTarget build_heatmap(const std::vector<PixelIndex>& centerline, Shape shape,
                            double sigma = kDefaultHeatmapSigma);

}  // namespace puseg
