#include "puseg/eval/metrics.hpp"

#include <cmath>
#include <limits>

#include "puseg/errors.hpp"

namespace puseg {

double dice(const Mask& pred, const Mask& gt) {
    if (pred.shape() != gt.shape()) throw ShapeError("dice: mask shapes differ");
    std::size_t inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred.data()[i] != 0, b = gt.data()[i] != 0;
        inter += a && b;
        p += a;
        g += b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

Mask binarize(const ConfidenceMap& conf, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("binarization threshold must lie in (0,1)");
    Mask m(conf.values.shape(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = conf.values.data()[i] >= threshold ? 1 : 0;
    return m;
}

CoverageReport coverage(const TraceResult& trace, const std::vector<std::vector<PixelIndex>>& gt_branches,
                        const std::vector<double>& tolerances) {
    if (tolerances.empty()) throw ConfigError("coverage needs at least one tolerance");
    for (double t : tolerances)
        if (!(t > 0.0)) throw ConfigError("coverage tolerances must be positive");
    std::size_t gt_points = 0;
    for (const auto& b : gt_branches) gt_points += b.size();
    if (gt_points == 0) throw ConfigError("coverage needs a non-empty ground truth");

    CoverageReport report;
    std::vector<const std::vector<PixelIndex>*> branches;
    for (const auto& b : gt_branches)
        if (!b.empty()) branches.push_back(&b);

    // Squared distance from each ground-truth point to the nearest traced point.
    std::vector<std::vector<double>> nearest;
    double max_tol = 0.0;
    for (double t : tolerances) max_tol = std::max(max_tol, t);
    const int radius = static_cast<int>(std::ceil(max_tol));

    int min_r = 0, min_c = 0, max_r = 0, max_c = 0;
    bool any = false;
    auto extend = [&](PixelIndex p) {
        if (!any) {
            min_r = max_r = p.row;
            min_c = max_c = p.col;
            any = true;
        }
        min_r = std::min(min_r, p.row);
        max_r = std::max(max_r, p.row);
        min_c = std::min(min_c, p.col);
        max_c = std::max(max_c, p.col);
    };
    for (const auto& b : trace.branches)
        for (auto p : b) extend(p);
    for (const auto* b : branches)
        for (auto p : *b) extend(p);

    Grid<std::uint8_t> traced(max_r - min_r + 1, max_c - min_c + 1, 0);
    for (const auto& b : trace.branches)
        for (auto p : b) traced(p.row - min_r, p.col - min_c) = 1;

    constexpr double inf = std::numeric_limits<double>::infinity();
    for (const auto* b : branches) {
        auto& d = nearest.emplace_back();
        for (auto p : *b) {
            double best = inf;
            for (int dr = -radius; dr <= radius; ++dr)
                for (int dc = -radius; dc <= radius; ++dc) {
                    const int r = p.row - min_r + dr, c = p.col - min_c + dc;
                    if (traced.shape().contains(r, c) && traced(r, c)) best = std::min(best, double(dr * dr + dc * dc));
                }
            d.push_back(best);
        }
    }

    double sum = 0.0;
    for (double t : tolerances) {
        double branch_sum = 0.0;
        for (const auto& d : nearest) {
            std::size_t hit = 0;
            for (double sq : d) hit += sq <= t * t;
            branch_sum += static_cast<double>(hit) / static_cast<double>(d.size());
        }
        const double cov = branch_sum / static_cast<double>(nearest.size());
        report.per_tolerance[t] = cov;
        sum += cov;
    }
    report.average = sum / static_cast<double>(tolerances.size());
    return report;
}

}  // namespace puseg
