#pragma once

#include <filesystem>
#include <vector>

#include "puseg/grid.hpp"

namespace puseg {

/// Reads an 8- or 16-bit PNG; colour images are reduced to luminance.
/// Returned values are scaled to [0, 1].
ImageF read_png(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; values are clamped to [0, 1] first.
void write_png(const std::filesystem::path& path, const ImageF& image);

/// Mask PNG: {0,255} on disk, {0,1} in memory (any non-zero byte is foreground).
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

/// Centerline CSV: header "row,col" then one integer pair per line.
std::vector<PixelIndex> read_centerline_csv(const std::filesystem::path& path);
void write_centerline_csv(const std::filesystem::path& path, const std::vector<PixelIndex>& points);

}  // namespace puseg
