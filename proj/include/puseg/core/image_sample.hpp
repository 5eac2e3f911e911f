#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "puseg/grid.hpp"

namespace puseg {

enum class Role { labeled, unlabeled, test };

std::string_view to_string(Role role);

/// A grayscale image with its (optional) annotation.
struct ImageSample {
    std::string id;
    ImageF pixels;                                       // intensities in [0, 1]
    std::optional<Mask> mask;                            // 1 = foreground
    std::optional<std::vector<PixelIndex>> centerline;   // annotated center points
    Role role = Role::test;

    Shape shape() const noexcept { return pixels.shape(); }
};

/// Throws if any ImageSample invariant is violated (ShapeError / MissingAnnotation).
void validate(const ImageSample& sample);

struct DatasetSplit {
    std::vector<ImageSample> labeled;
    std::vector<ImageSample> unlabeled;
    std::vector<ImageSample> test;
    int fold_index = 0;
};

/// Throws SplitError when lists overlap by id or `labeled` is empty.
void validate(const DatasetSplit& split);

/// Groups annotation points into branches: 8-connected components, each
/// ordered by the original annotation order.
std::vector<std::vector<PixelIndex>> centerline_branches(const std::vector<PixelIndex>& centerline);

}  // namespace puseg
