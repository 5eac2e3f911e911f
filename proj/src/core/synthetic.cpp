#include "puseg/core/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "puseg/errors.hpp"
#include "puseg/rng.hpp"

namespace puseg {

std::string_view to_string(NoiseProfile profile) {
    switch (profile) {
        case NoiseProfile::clean: return "clean";
        case NoiseProfile::speckle: return "speckle";
        case NoiseProfile::artifact_bands: return "artifact_bands";
        case NoiseProfile::mixed: return "mixed";
    }
    return "unknown";
}

NoiseProfile parse_noise_profile(std::string_view text) {
    for (auto p : {NoiseProfile::clean, NoiseProfile::speckle, NoiseProfile::artifact_bands, NoiseProfile::mixed})
        if (to_string(p) == text) return p;
    throw ConfigError("unknown noise profile '" + std::string(text) + "'");
}

namespace {

struct Point {
    double r = 0.0;
    double c = 0.0;
};

Point catmull_rom(const Point& p0, const Point& p1, const Point& p2, const Point& p3, double t) {
    const double t2 = t * t, t3 = t2 * t;
    auto blend = [&](double a, double b, double c, double d) {
        return 0.5 * (2.0 * b + (-a + c) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 + (-a + 3.0 * b - 3.0 * c + d) * t3);
    };
    return {blend(p0.r, p1.r, p2.r, p3.r), blend(p0.c, p1.c, p2.c, p3.c)};
}

/// Control polygon: a random walk with bounded turning angle.
std::vector<Point> control_points(Rng& rng, Shape shape, double max_turn) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double margin = 4.0;
    Point p{margin + unit(rng) * (shape.rows - 2 * margin), margin + unit(rng) * (shape.cols - 2 * margin)};
    double heading = unit(rng) * 2.0 * std::numbers::pi;
    const double step = std::max(6.0, std::min(shape.rows, shape.cols) / 5.0) * (0.8 + 0.4 * unit(rng));
    const int n = 4 + static_cast<int>(unit(rng) * 4.0);

    std::vector<Point> pts{p};
    for (int i = 1; i < n; ++i) {
        heading += (2.0 * unit(rng) - 1.0) * max_turn;
        p = {p.r + step * std::sin(heading), p.c + step * std::cos(heading)};
        pts.push_back(p);
    }
    return pts;
}

/// Dense samples along the spline until it leaves the image.
std::vector<Point> sample_curve(const std::vector<Point>& ctrl, Shape shape) {
    std::vector<Point> padded;
    padded.push_back({2 * ctrl[0].r - ctrl[1].r, 2 * ctrl[0].c - ctrl[1].c});
    padded.insert(padded.end(), ctrl.begin(), ctrl.end());
    const auto& a = ctrl[ctrl.size() - 1];
    const auto& b = ctrl[ctrl.size() - 2];
    padded.push_back({2 * a.r - b.r, 2 * a.c - b.c});

    std::vector<Point> out;
    for (std::size_t seg = 1; seg + 2 < padded.size(); ++seg) {
        const double len = std::hypot(padded[seg + 1].r - padded[seg].r, padded[seg + 1].c - padded[seg].c);
        const int steps = std::max(4, static_cast<int>(std::ceil(len * 4.0)));
        for (int k = 0; k < steps; ++k) {
            const Point q = catmull_rom(padded[seg - 1], padded[seg], padded[seg + 1], padded[seg + 2],
                                        static_cast<double>(k) / steps);
            if (q.r < 0.0 || q.c < 0.0 || q.r > shape.rows - 1.0 || q.c > shape.cols - 1.0) return out;
            out.push_back(q);
        }
    }
    return out;
}

ImageF gaussian_blur(const ImageF& in, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-i * i / (2.0 * sigma * sigma));
    for (double& v : k) v /= sum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    ImageF tmp(in.shape()), out(in.shape());
    for (int r = 0; r < in.rows(); ++r)
        for (int c = 0; c < in.cols(); ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in(r, clampi(c + i, in.cols()));
            tmp(r, c) = acc;
        }
    for (int r = 0; r < in.rows(); ++r)
        for (int c = 0; c < in.cols(); ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(clampi(r + i, in.rows()), c);
            out(r, c) = acc;
        }
    return out;
}

struct Geometry {
    Mask mask;
    std::vector<PixelIndex> centerline;
};

Geometry draw_vessels(Rng& rng, Shape shape, const SyntheticOptions& opt) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Geometry g{Mask(shape, 0), {}};
    const int n_curves = opt.min_curves + static_cast<int>(unit(rng) * (opt.max_curves - opt.min_curves + 1));
    for (int i = 0; i < n_curves; ++i) {
        const auto ctrl = control_points(rng, shape, opt.max_turn);
        const double width = opt.min_width + unit(rng) * (opt.max_width - opt.min_width);
        const double radius = std::max(0.5, width / 2.0);
        const auto samples = sample_curve(ctrl, shape);
        if (samples.size() < 8) continue;

        for (const auto& q : samples) {
            const int r0 = static_cast<int>(std::floor(q.r - radius)), r1 = static_cast<int>(std::ceil(q.r + radius));
            const int c0 = static_cast<int>(std::floor(q.c - radius)), c1 = static_cast<int>(std::ceil(q.c + radius));
            for (int r = r0; r <= r1; ++r)
                for (int c = c0; c <= c1; ++c)
                    if (shape.contains(r, c) && std::hypot(r - q.r, c - q.c) <= radius) g.mask(r, c) = 1;

            const PixelIndex px{static_cast<int>(std::lround(q.r)), static_cast<int>(std::lround(q.c))};
            if (g.centerline.empty() || !(g.centerline.back() == px)) g.centerline.push_back(px);
            g.mask[px] = 1;
        }
    }
    return g;
}

double foreground_fraction(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m.values()) n += v;
    return static_cast<double>(n) / static_cast<double>(m.size());
}

void add_bands(Rng& rng, ImageF& img, double amplitude, const SyntheticOptions& opt) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = opt.min_bands + static_cast<int>(unit(rng) * (opt.max_bands - opt.min_bands + 1));
    for (int b = 0; b < n; ++b) {
        const double angle = unit(rng) * std::numbers::pi;
        const double width = opt.min_band_width + unit(rng) * (opt.max_band_width - opt.min_band_width);
        const double offset = (unit(rng) - 0.5) * 0.8 * std::hypot(img.rows(), img.cols());
        const double cr = img.rows() / 2.0, cc = img.cols() / 2.0;
        const double nr = std::cos(angle), nc = std::sin(angle);
        const double amp = amplitude * (0.7 + 0.3 * unit(rng));
        for (int r = 0; r < img.rows(); ++r)
            for (int c = 0; c < img.cols(); ++c) {
                const double d = std::abs((r - cr) * nr + (c - cc) * nc - offset);
                if (d < width / 2.0) img(r, c) += amp * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * d / width));
            }
    }
}

}  // namespace

NoiseProfile resolved_profile(std::uint64_t seed, int index, const SyntheticOptions& options) {
    NoiseProfile p = options.per_image.empty() ? options.noise
                                               : options.per_image[static_cast<std::size_t>(index) % options.per_image.size()];
    if (p != NoiseProfile::mixed) return p;
    Rng pick(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(index)), "profile"));
    constexpr std::array<NoiseProfile, 3> choices{NoiseProfile::clean, NoiseProfile::speckle, NoiseProfile::artifact_bands};
    return choices[std::uniform_int_distribution<int>(0, 2)(pick)];
}

std::vector<ImageSample> generate_synthetic(std::uint64_t seed, int n_images, Shape shape, NoiseProfile noise_profile) {
    SyntheticOptions opt;
    opt.noise = noise_profile;
    return generate_synthetic(seed, n_images, shape, opt);
}

std::vector<ImageSample> generate_synthetic(std::uint64_t seed, int n_images, Shape shape, const SyntheticOptions& opt) {
    if (shape.rows < 32 || shape.cols < 32) throw ConfigError("synthetic images must be at least 32x32");
    if (n_images < 0) throw ConfigError("n_images must be non-negative");

    std::vector<ImageSample> out;
    out.reserve(static_cast<std::size_t>(n_images));
    for (int i = 0; i < n_images; ++i) {
        const std::uint64_t image_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        Rng geo(derive_seed(image_seed, "geometry"));
        Rng noise(derive_seed(image_seed, "noise"));
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        Geometry g;
        do {
            g = draw_vessels(geo, shape, opt);
        } while (!(foreground_fraction(g.mask) > 0.01 && foreground_fraction(g.mask) < 0.30));

        const double base = 0.12 + 0.12 * unit(geo);
        const double contrast = opt.min_contrast + unit(geo) * (opt.max_contrast - opt.min_contrast);
        const double tilt_r = (unit(geo) - 0.5) * 0.08, tilt_c = (unit(geo) - 0.5) * 0.08;

        ImageF vessel(shape);
        for (int r = 0; r < shape.rows; ++r)
            for (int c = 0; c < shape.cols; ++c) vessel(r, c) = g.mask(r, c);
        if (opt.vessel_blur > 0.0) vessel = gaussian_blur(vessel, opt.vessel_blur);

        ImageF img(shape);
        for (int r = 0; r < shape.rows; ++r)
            for (int c = 0; c < shape.cols; ++c)
                img(r, c) = base + tilt_r * (r / static_cast<double>(shape.rows) - 0.5) +
                            tilt_c * (c / static_cast<double>(shape.cols) - 0.5) + contrast * vessel(r, c);

        const NoiseProfile profile = resolved_profile(seed, i, opt);
        std::normal_distribution<double> gauss(0.0, 1.0);
        if (profile == NoiseProfile::artifact_bands) add_bands(noise, img, opt.band_amplitude * contrast, opt);
        for (double& v : img.values()) {
            if (profile == NoiseProfile::speckle) v *= 1.0 + opt.speckle_strength * gauss(noise);
            v = std::clamp(v + opt.gaussian_noise * gauss(noise), 0.0, 1.0);
        }

        ImageSample s;
        s.id = "synth_" + std::to_string(seed) + "_" + std::string(3 - std::min<std::size_t>(3, std::to_string(i).size()), '0') + std::to_string(i);
        s.pixels = std::move(img);
        s.mask = std::move(g.mask);
        s.centerline = std::move(g.centerline);
        s.role = Role::test;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace puseg
