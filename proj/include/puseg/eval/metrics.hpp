#pragma once

#include <map>
#include <vector>

#include "puseg/grid.hpp"
#include "puseg/net/seg_model.hpp"

namespace puseg {

/// 2|P n G| / (|P| + |G|); 1.0 when both masks are empty.
double dice(const Mask& pred, const Mask& gt);

/// mask(j) = 1 iff conf(j) >= threshold.
Mask binarize(const ConfidenceMap& conf, double threshold = 0.5);

struct TraceResult {
    std::string source_id;
    std::vector<std::vector<PixelIndex>> branches;
};

struct CoverageReport {
    std::map<double, double> per_tolerance;
    double average = 0.0;
};

inline const std::vector<double> kDefaultTolerances{3.0, 6.0, 9.0};

/// For each tolerance t: mean over ground-truth branches of the fraction of
/// branch points within Euclidean distance t of some traced point.
/// `average` is the mean over tolerances.
CoverageReport coverage(const TraceResult& trace, const std::vector<std::vector<PixelIndex>>& gt_branches,
                        const std::vector<double>& tolerances = kDefaultTolerances);

}  // namespace puseg
