#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "puseg/core/heatmap.hpp"
#include "puseg/core/synthetic.hpp"
#include "puseg/errors.hpp"
#include "puseg/eval/evaluation.hpp"
#include "puseg/eval/tracing.hpp"

using namespace puseg;
namespace fs = std::filesystem;

namespace {

Mask random_mask(std::mt19937_64& rng, int rows, int cols, double p) {
    std::bernoulli_distribution b(p);
    Mask m(rows, cols, 0);
    for (auto& v : m.values()) v = b(rng);
    return m;
}

std::vector<PixelIndex> horizontal(int row, int c0, int c1) {
    std::vector<PixelIndex> out;
    for (int c = c0; c <= c1; ++c) out.push_back({row, c});
    return out;
}

double min_distance(PixelIndex p, const std::vector<PixelIndex>& pts) {
    double best = 1e300;
    for (const auto& q : pts) best = std::min(best, std::hypot(p.row - q.row, p.col - q.col));
    return best;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("dice examples") {
    Mask g(4, 4, 0);
    for (int c = 0; c < 4; ++c) g(1, c) = g(2, c) = 1;
    CHECK(dice(g, g) == 1.0);
    Mask disjoint(4, 4, 0);
    disjoint(0, 0) = 1;
    CHECK(dice(disjoint, g) == 0.0);
    Mask half(4, 4, 0);
    for (int c = 0; c < 4; ++c) half(1, c) = 1;
    CHECK(dice(half, g) == doctest::Approx(2.0 / 3.0));
    CHECK(dice(Mask(3, 3, 0), Mask(3, 3, 0)) == 1.0);
    CHECK_THROWS_AS(dice(Mask(3, 3, 0), Mask(3, 4, 0)), ShapeError);
}

TEST_CASE("dice is symmetric and bounded") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_mask(rng, 9, 7, 0.3), b = random_mask(rng, 9, 7, 0.4);
        CHECK(dice(a, b) == dice(b, a));
        CHECK(dice(a, b) >= 0.0);
        CHECK(dice(a, b) <= 1.0);
    }
}

TEST_CASE("binarize uses >= threshold") {
    ConfidenceMap c{"c", ImageF(1, 3)};
    c.values(0, 0) = 0.49;
    c.values(0, 1) = 0.51;
    c.values(0, 2) = 0.5;
    const auto m = binarize(c, 0.5);
    CHECK(m(0, 0) == 0);
    CHECK(m(0, 1) == 1);
    CHECK(m(0, 2) == 1);
    CHECK(binarize({"z", ImageF(3, 3, 0.0)}) == Mask(3, 3, 0));

    ConfidenceMap again{"c", ImageF(1, 3)};
    for (int k = 0; k < 3; ++k) again.values(0, k) = m(0, k);
    CHECK(binarize(again) == m);
    CHECK_THROWS_AS(binarize(c, 1.0), ConfigError);
    CHECK_THROWS_AS(binarize(c, 0.0), ConfigError);
}

TEST_CASE("tracing a straight line stays on it") {
    const auto line = horizontal(20, 5, 34);
    const auto h = build_heatmap(line, {40, 40}, 2.0);
    const auto t = trace_vessels(h.values, 0.5, 0.1);
    REQUIRE(t.branches.size() == 1);
    // the walk may run past the line ends while the tail stays above step_threshold
    for (const auto& p : t.branches[0]) CHECK(min_distance(p, line) <= 4.0);
    CHECK(t.branches[0].size() >= 28);
    std::size_t on_line = 0;
    for (const auto& p : t.branches[0]) on_line += min_distance(p, line) == 0.0;
    CHECK(on_line == line.size());
}

TEST_CASE("tracing edge cases") {
    CHECK(trace_vessels(ImageF(20, 20, 0.0), 0.5, 0.2).branches.empty());
    CHECK_THROWS_AS(trace_vessels(ImageF(4, 4, 0.0), 0.2, 0.5), ConfigError);
    CHECK_THROWS_AS(trace_vessels(ImageF(4, 4, 0.0), 1.0, 0.5), ConfigError);

    // two parallel lines 10 sigma apart
    auto both = horizontal(10, 5, 40);
    const auto second = horizontal(30, 5, 40);
    both.insert(both.end(), second.begin(), second.end());
    const auto t = trace_vessels(build_heatmap(both, {42, 46}, 2.0).values, 0.5, 0.1);
    CHECK(t.branches.size() == 2);
}

TEST_CASE("traced branches are simple 8-connected paths near the centerline") {
    const auto samples = generate_synthetic(13, 6, {64, 64}, NoiseProfile::clean);
    for (const auto& s : samples) {
        const double sigma = 2.0;
        const auto h = build_heatmap(*s.centerline, s.shape(), sigma);
        const auto t = trace_vessels(h.values);
        CHECK_FALSE(t.branches.empty());
        std::set<PixelIndex> seen;
        for (const auto& b : t.branches) {
            for (std::size_t i = 0; i < b.size(); ++i) {
                CHECK(seen.insert(b[i]).second);
                CHECK(min_distance(b[i], *s.centerline) <= 2 * sigma);
                if (i > 0) CHECK(std::max(std::abs(b[i].row - b[i - 1].row), std::abs(b[i].col - b[i - 1].col)) == 1);
            }
        }
    }
}

TEST_CASE("coverage examples") {
    const auto gt = horizontal(20, 5, 34);
    const auto perfect = coverage({"p", {gt}}, {gt});
    for (double t : {3.0, 6.0, 9.0}) CHECK(perfect.per_tolerance.at(t) == 1.0);
    CHECK(perfect.average == 1.0);

    const auto off = coverage({"o", {horizontal(24, 5, 34)}}, {gt});
    CHECK(off.per_tolerance.at(3.0) == 0.0);
    CHECK(off.per_tolerance.at(6.0) == 1.0);
    CHECK(off.per_tolerance.at(9.0) == 1.0);
    CHECK(off.average == doctest::Approx(2.0 / 3.0));

    const auto none = coverage({"e", {}}, {gt});
    CHECK(none.average == 0.0);
    CHECK(none.per_tolerance.at(9.0) == 0.0);

    // per-branch mean: one branch fully covered, one not at all
    const auto two = coverage({"h", {horizontal(2, 0, 9)}}, {horizontal(2, 0, 9), horizontal(40, 0, 29)});
    CHECK(two.per_tolerance.at(3.0) == 0.5);

    CHECK_THROWS_AS(coverage({"x", {gt}}, {}), ConfigError);
    CHECK_THROWS_AS(coverage({"x", {gt}}, {gt}, {}), ConfigError);
    CHECK_THROWS_AS(coverage({"x", {gt}}, {gt}, {0.0}), ConfigError);
}

TEST_CASE("coverage matches a brute-force count and is monotone in tolerance") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> coord(0, 39);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<PixelIndex>> gt(1 + trial % 3);
        for (auto& b : gt)
            for (int k = 0; k < 5 + trial % 7; ++k) b.push_back({coord(rng), coord(rng)});
        TraceResult t{"r", {{}}};
        for (int k = 0; k < trial % 9; ++k) t.branches[0].push_back({coord(rng), coord(rng)});

        const std::vector<double> tols{1.5, 3, 4.2, 6, 9};
        const auto rep = coverage(t, gt, tols);
        double prev = -1.0, sum = 0.0;
        for (double tol : tols) {
            double expect = 0.0;
            for (const auto& b : gt) {
                int hit = 0;
                for (const auto& p : b) hit += !t.branches[0].empty() && min_distance(p, t.branches[0]) <= tol;
                expect += static_cast<double>(hit) / static_cast<double>(b.size());
            }
            expect /= static_cast<double>(gt.size());
            CHECK(rep.per_tolerance.at(tol) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(rep.per_tolerance.at(tol) >= prev);
            prev = rep.per_tolerance.at(tol);
            sum += expect;
        }
        CHECK(rep.average == doctest::Approx(sum / tols.size()));
    }
}

TEST_CASE("evaluation aggregates per image and is deterministic") {
    const auto samples = generate_synthetic(3, 3, {32, 32}, NoiseProfile::clean);
    auto model = SegModel::create("mini_unet", 1);
    model.head().weights.assign(16, 0.05);
    model.head().bias = -0.2;

    const auto a = evaluate_images(model, samples, Task::segmentation);
    const auto b = evaluate_images(model, samples, Task::segmentation);
    REQUIRE(a.per_image.size() == 3);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.per_image[i].image_id == samples[i].id);
        CHECK(a.per_image[i].dice == b.per_image[i].dice);
        sum += a.per_image[i].dice;
    }
    CHECK(a.mean_dice == doctest::Approx(sum / 3));
    CHECK(headline(a) == a.mean_dice);

    const auto dir = fs::temp_directory_path() / "puseg_test_eval";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_metrics_jsonl(dir / "a.jsonl", a);
    write_metrics_jsonl(dir / "b.jsonl", b);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(slurp(dir / "a.jsonl").starts_with("{\"image_id\":\"" + samples[0].id + "\""));

    const auto h = evaluate_images(model, samples, Task::heatmap_tracing);
    for (const auto& m : h.per_image) {
        CHECK(m.coverage.per_tolerance.size() == 3);
        CHECK(m.coverage.per_tolerance.at(9.0) >= m.coverage.per_tolerance.at(3.0));
    }
    CHECK(headline(h) == h.mean_coverage.average);
    CHECK(format_summary(h, "Ours").find("coverage") != std::string::npos);

    write_visualizations(dir / "vis", model, samples, Task::segmentation);
    CHECK_FALSE(fs::is_empty(dir / "vis"));

    auto bare = samples;
    bare[1].mask.reset();
    CHECK_THROWS_AS(evaluate_images(model, bare, Task::segmentation), MissingAnnotation);
    bare[1].centerline.reset();
    CHECK_THROWS_AS(evaluate_images(model, bare, Task::heatmap_tracing), MissingAnnotation);

    CHECK(parse_task("heatmap_tracing") == Task::heatmap_tracing);
    CHECK_THROWS_AS(parse_task("detection"), ConfigError);
}
