#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "puseg/core/image_sample.hpp"

namespace puseg {

enum class NoiseProfile { clean, speckle, artifact_bands, mixed };

std::string_view to_string(NoiseProfile profile);
NoiseProfile parse_noise_profile(std::string_view text);

/// Knobs of the synthetic vessel generator. Defaults give thin bright curves
/// on a dim, slowly varying background.
struct SyntheticOptions {
    NoiseProfile noise = NoiseProfile::clean;
    int min_curves = 3;
    int max_curves = 6;
    double min_width = 1.0;          // vessel width in pixels
    double max_width = 3.0;
    double min_contrast = 0.30;      // vessel intensity above background
    double max_contrast = 0.50;
    double vessel_blur = 0.0;        // Gaussian sigma applied to the rendered vessels; 0 = sharp
    double max_turn = 0.6;           // radians between consecutive control points
    double gaussian_noise = 0.02;
    double speckle_strength = 0.30;
    double band_amplitude = 0.8;     // relative to the image's vessel contrast
    int min_bands = 2;
    int max_bands = 4;
    double min_band_width = 3.0;
    double max_band_width = 6.0;
    /// Explicit per-image profiles; overrides `noise` when non-empty (cycled).
    std::vector<NoiseProfile> per_image;
};

/// Generates `n_images` samples with ground-truth mask and centerline.
/// Vessel geometry depends only on (seed, image index); the noise stream is
/// separate, so two profiles at the same seed share the same vessels.
std::vector<ImageSample> generate_synthetic(std::uint64_t seed, int n_images, Shape shape,
                                            NoiseProfile noise_profile);
std::vector<ImageSample> generate_synthetic(std::uint64_t seed, int n_images, Shape shape,
                                            const SyntheticOptions& options);

/// The profile actually drawn for image `index` (resolves `mixed`).
NoiseProfile resolved_profile(std::uint64_t seed, int index, const SyntheticOptions& options);

}  // namespace puseg
