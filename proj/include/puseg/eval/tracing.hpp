#pragma once

#include "puseg/eval/metrics.hpp"

namespace puseg {

struct TraceOptions {
    double seed_threshold = 0.5;
    double step_threshold = 0.2;
    int min_branch_points = 3;  // shorter branches are discarded
};

/// Greedy ridge following. Seeds are local maxima above seed_threshold,
/// visited in descending intensity (ties row-major). Each branch grows from
/// its seed in two directions, always stepping to the brightest unvisited
/// 8-neighbour above step_threshold; pixels within one pixel of a traced
/// point become visited once the walk moves on.
TraceResult trace_vessels(const ImageF& heatmap, const TraceOptions& options = {});
TraceResult trace_vessels(const ImageF& heatmap, double seed_threshold, double step_threshold);

}  // namespace puseg
