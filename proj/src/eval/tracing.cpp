#include "puseg/eval/tracing.hpp"

#include <algorithm>
#include <optional>

#include "puseg/errors.hpp"

namespace puseg {

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

bool is_local_max(const ImageF& h, int r, int c) {
    for (int k = 0; k < 8; ++k) {
        const int rr = r + kDr[k], cc = c + kDc[k];
        if (h.shape().contains(rr, cc) && h(rr, cc) > h(r, c)) return false;
    }
    return true;
}

class Tracer {
public:
    Tracer(const ImageF& h, double step) : h_(h), step_(step), visited_(h.shape(), 0) {}

    bool visited(PixelIndex p) const { return visited_[p] != 0; }

    std::vector<PixelIndex> branch_from(PixelIndex seed) {
        visited_[seed] = 1;
        const auto first = best_neighbour(seed, std::nullopt);
        std::optional<PixelIndex> second;
        if (first) second = best_neighbour(seed, first);
        mark_around(seed);

        std::vector<PixelIndex> forward, backward;
        if (first) walk(*first, forward);
        if (second && std::find(forward.begin(), forward.end(), *second) == forward.end()) walk(*second, backward);

        std::vector<PixelIndex> out(backward.rbegin(), backward.rend());
        out.push_back(seed);
        out.insert(out.end(), forward.begin(), forward.end());
        return out;
    }

private:
    /// Brightest unvisited neighbour above the step threshold; with `away`,
    /// only neighbours not adjacent to `away` (the opposite side of the seed).
    std::optional<PixelIndex> best_neighbour(PixelIndex p, std::optional<PixelIndex> away) const {
        std::optional<PixelIndex> best;
        for (int k = 0; k < 8; ++k) {
            const PixelIndex q{p.row + kDr[k], p.col + kDc[k]};
            if (!h_.shape().contains(q.row, q.col) || visited(q) || !(h_[q] > step_)) continue;
            if (away && std::max(std::abs(q.row - away->row), std::abs(q.col - away->col)) < 2) continue;
            if (!best || h_[q] > h_[*best]) best = q;
        }
        return best;
    }

    void mark_around(PixelIndex p) {
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc)
                if (h_.shape().contains(p.row + dr, p.col + dc)) visited_(p.row + dr, p.col + dc) = 1;
    }

    void walk(PixelIndex start, std::vector<PixelIndex>& path) {
        PixelIndex cur = start;
        while (true) {
            visited_[cur] = 1;
            path.push_back(cur);
            const auto q = best_neighbour(cur, std::nullopt);
            mark_around(cur);
            if (!q) break;
            cur = *q;
        }
    }

    const ImageF& h_;
    double step_;
    Grid<std::uint8_t> visited_;
};

}  // namespace

TraceResult trace_vessels(const ImageF& heatmap, double seed_threshold, double step_threshold) {
    TraceOptions o;
    o.seed_threshold = seed_threshold;
    o.step_threshold = step_threshold;
    return trace_vessels(heatmap, o);
}

TraceResult trace_vessels(const ImageF& heatmap, const TraceOptions& options) {
    if (!(options.step_threshold > 0.0 && options.step_threshold < options.seed_threshold && options.seed_threshold < 1.0))
        throw ConfigError("tracing needs 0 < step_threshold < seed_threshold < 1");

    std::vector<PixelIndex> seeds;
    for (int r = 0; r < heatmap.rows(); ++r)
        for (int c = 0; c < heatmap.cols(); ++c)
            if (heatmap(r, c) > options.seed_threshold && is_local_max(heatmap, r, c)) seeds.push_back({r, c});
    std::stable_sort(seeds.begin(), seeds.end(),
                     [&](PixelIndex a, PixelIndex b) { return heatmap[a] > heatmap[b]; });

    TraceResult out;
    Tracer tracer(heatmap, options.step_threshold);
    for (const auto& s : seeds) {
        if (tracer.visited(s)) continue;
        auto branch = tracer.branch_from(s);
        if (static_cast<int>(branch.size()) >= options.min_branch_points) out.branches.push_back(std::move(branch));
    }
    return out;
}

}  // namespace puseg
