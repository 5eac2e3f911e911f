#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "puseg/core/synthetic.hpp"
#include "puseg/errors.hpp"
#include "puseg/pu/pu_stage.hpp"

using namespace puseg;

namespace {

FeatureMatrix random_features(std::mt19937_64& rng, int n, int dim, double shift) {
    std::normal_distribution<double> g(0.0, 1.0);
    FeatureMatrix m(n, dim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) m(i, d) = g(rng) + shift;
    return m;
}

PuHead random_head(std::mt19937_64& rng, int dim, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    PuHead h = PuHead::zeros(dim);
    for (auto& w : h.weights) w = g(rng);
    h.bias = g(rng);
    return h;
}

// Eq. 2 written out with plain loops over rows.
double oracle_risk(const PuHead& h, const FeatureMatrix& xp, const FeatureMatrix& xu, double prior, bool zero_one) {
    auto score = [&](const FeatureMatrix& x, int i) {
        double z = h.bias;
        for (int d = 0; d < x.cols(); ++d) z += h.weights[d] * x(i, d);
        return z;
    };
    auto loss = [&](double z, int y) {
        if (zero_one) return y * z <= 0.0 ? 1.0 : 0.0;
        return 1.0 / (1.0 + std::exp(y * z));
    };
    double rp_pos = 0, rp_neg = 0, ru_neg = 0;
    for (int i = 0; i < xp.rows(); ++i) {
        rp_pos += loss(score(xp, i), +1);
        rp_neg += loss(score(xp, i), -1);
    }
    for (int i = 0; i < xu.rows(); ++i) ru_neg += loss(score(xu, i), -1);
    rp_pos /= xp.rows();
    rp_neg /= xp.rows();
    ru_neg /= xu.rows();
    const double neg = ru_neg - prior * rp_neg;
    return prior * rp_pos + (neg > 0 ? neg : 0.0);
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("class prior is the positive share of the pool") {
    CHECK(estimate_prior(3, 9) == 0.25);
    CHECK(estimate_prior(1, 1) == 0.5);
    CHECK_THROWS_AS(estimate_prior(0, 5), PriorError);
    CHECK_THROWS_AS(estimate_prior(5, 0), PriorError);
    std::mt19937_64 rng(0);
    const auto p = make_pu_problem(random_features(rng, 4, 2, 0), random_features(rng, 12, 2, 0));
    CHECK(p.prior == 0.25);
    const auto q = make_pu_problem(random_features(rng, 4, 2, 0), random_features(rng, 12, 2, 0), 100, 300);
    CHECK(q.prior == 0.25);
    CHECK_THROWS_AS(make_pu_problem(random_features(rng, 4, 2, 0), random_features(rng, 4, 3, 0)), ShapeError);
}

TEST_CASE("surrogate losses") {
    CHECK(pu_loss(0.0, +1, Surrogate::sigmoid) == 0.5);
    CHECK(pu_loss(2.0, +1, Surrogate::sigmoid) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
    CHECK(pu_loss(2.0, -1, Surrogate::sigmoid) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(pu_loss(2.0, +1, Surrogate::zero_one) == 0.0);
    CHECK(pu_loss(-2.0, +1, Surrogate::zero_one) == 1.0);
    CHECK(pu_loss(0.0, +1, Surrogate::zero_one) == 1.0);
    CHECK(pu_loss(0.0, -1, Surrogate::zero_one) == 1.0);
}

TEST_CASE("zero head gives the closed-form risk") {
    std::mt19937_64 rng(1);
    const auto p = make_pu_problem(random_features(rng, 5, 3, 1), random_features(rng, 15, 3, 0));
    const auto r = pu_risk_terms(PuHead::zeros(3), p, Surrogate::sigmoid);
    CHECK(r.positive_pos == 0.5);
    CHECK(r.positive_neg == 0.5);
    CHECK(r.unlabeled_neg == 0.5);
    // 0.25 * 0.5 + (0.5 - 0.25 * 0.5)
    CHECK(r.value() == doctest::Approx(0.5));
}

TEST_CASE("risk matches the explicit-loop oracle") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 1 + trial % 6;
        auto xp = random_features(rng, 3 + trial % 11, dim, 1.0);
        auto xu = random_features(rng, 5 + trial % 17, dim, -0.5);
        const auto p = make_pu_problem(xp, xu);
        const auto h = random_head(rng, dim, 1.5);
        CHECK(std::abs(pu_risk(h, p, Surrogate::sigmoid) - oracle_risk(h, xp, xu, p.prior, false)) < 1e-9);
        CHECK(std::abs(pu_risk(h, p, Surrogate::zero_one) - oracle_risk(h, xp, xu, p.prior, true)) < 1e-9);
    }
}

TEST_CASE("negative-risk clamp") {
    std::mt19937_64 rng(3);
    int clamped = 0, open = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = make_pu_problem(random_features(rng, 10, 2, 0), random_features(rng, 10, 2, 0));
        const auto h = random_head(rng, 2, 3.0);
        const auto r = pu_risk_terms(h, p, Surrogate::sigmoid);
        if (r.negative_part() < 0) {
            ++clamped;
            CHECK(r.value() == p.prior * r.positive_pos);
        } else {
            ++open;
            CHECK(r.value() == doctest::Approx(p.prior * r.positive_pos + r.unlabeled_neg - p.prior * r.positive_neg));
        }
    }
    // Positives scored high, unlabeled scored low: R_u^- ~ 0 while pi R_p^- ~ 1/2.
    FeatureMatrix xp(2, 1), xu(2, 1);
    xp << 5, 5;
    xu << -5, -5;
    PuHead h = PuHead::zeros(1);
    h.weights[0] = 2.0;
    const auto r = pu_risk_terms(h, make_pu_problem(xp, xu, 1, 1), Surrogate::sigmoid);
    CHECK(r.negative_part() < 0);
    CHECK(r.value() == r.prior * r.positive_pos);
    CHECK(open > 0);
    CHECK(clamped > 0);
}

TEST_CASE("risk gradient matches finite differences") {
    std::mt19937_64 rng(4);
    int clamp_cases = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 2 + trial % 4;
        auto xp = random_features(rng, 6 + trial % 5, dim, trial % 2 ? 1.0 : -1.0);
        auto xu = random_features(rng, 9 + trial % 7, dim, 0.0);
        const auto p = make_pu_problem(xp, xu);
        const auto h = random_head(rng, dim, trial < 20 ? 0.5 : 2.5);
        const auto g = pu_risk_gradient(h, p);
        CHECK(g.risk.value() == doctest::Approx(pu_risk(h, p, Surrogate::sigmoid)).epsilon(1e-12));

        // On the clamp branch the update direction is -grad(R_u^- - pi R_p^-).
        auto objective = [&](const PuHead& x) {
            const auto r = pu_risk_terms(x, p, Surrogate::sigmoid);
            return g.clamp_branch ? -r.negative_part() : r.value();
        };
        clamp_cases += g.clamp_branch;
        const double eps = 1e-6;
        for (int d = 0; d <= dim; ++d) {
            PuHead hp = h, hm = h;
            (d < dim ? hp.weights[d] : hp.bias) += eps;
            (d < dim ? hm.weights[d] : hm.bias) -= eps;
            const double fd = (objective(hp) - objective(hm)) / (2 * eps);
            CHECK(rel_error(d < dim ? g.weights[d] : g.bias, fd) < 1e-4);
        }
    }
    CHECK(clamp_cases < 40);
}

TEST_CASE("training lowers the risk and separates shifted clusters") {
    std::mt19937_64 rng(5);
    auto xp = random_features(rng, 200, 3, 2.0);
    FeatureMatrix xu(400, 3);
    xu.topRows(100) = random_features(rng, 100, 3, 2.0);     // hidden positives
    xu.bottomRows(300) = random_features(rng, 300, 3, -2.0);  // negatives
    const auto p = make_pu_problem(xp, xu);
    PuTrainConfig cfg;
    cfg.epochs = 300;
    const auto res = train_pu_head_detailed(p, cfg);
    CHECK(res.final_risk < res.initial_risk);
    CHECK(res.initial_risk == doctest::Approx(0.5));
    int correct = 0;
    for (int i = 0; i < 400; ++i) {
        double z = res.head.bias;
        for (int d = 0; d < 3; ++d) z += res.head.weights[d] * xu(i, d);
        correct += (i < 100) == (z > 0);
    }
    CHECK(correct > 380);
    // deterministic
    const auto again = train_pu_head_detailed(p, cfg);
    CHECK(again.head.weights == res.head.weights);

    cfg.epochs = 0;
    CHECK_THROWS_AS(train_pu_head(p, cfg), ConfigError);
}

TEST_CASE("selection takes exactly the lower alpha percent") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 12), cols = 1 + static_cast<int>(rng() % 12);
        PuScoreMap map{"x", {}};
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                map.scores.push_back({{r, c}, trial % 3 == 0 ? std::round(u(rng)) : u(rng)});  // ties too
        const auto n = map.scores.size();
        for (double alpha : {1.0, 20.0, 50.0, 99.0}) {
            const auto sel = select_pu_negatives(map, alpha);
            const auto k = static_cast<std::size_t>(std::floor(alpha / 100.0 * static_cast<double>(n) + 1e-9));
            REQUIRE(sel.size() == k);
            CHECK(std::is_sorted(sel.begin(), sel.end()));
            const std::set<PixelIndex> chosen(sel.begin(), sel.end());
            double max_sel = -1e300, min_unsel = 1e300;
            PixelIndex last_sel_at_max{-1, -1}, first_unsel_at_min{1 << 30, 0};
            for (const auto& s : map.scores) {
                if (chosen.contains(s.index)) max_sel = std::max(max_sel, s.score);
                else min_unsel = std::min(min_unsel, s.score);
            }
            if (k > 0 && k < n) {
                CHECK(max_sel <= min_unsel);
                if (max_sel == min_unsel) {
                    for (const auto& s : map.scores) {
                        if (s.score != max_sel) continue;
                        if (chosen.contains(s.index)) last_sel_at_max = std::max(last_sel_at_max, s.index);
                        else first_unsel_at_min = std::min(first_unsel_at_min, s.index);
                    }
                    CHECK(last_sel_at_max < first_unsel_at_min);  // ties broken row-major
                }
            }
            PuScoreMap scaled = map;
            for (auto& s : scaled.scores) s.score *= 3.7;
            CHECK(select_pu_negatives(scaled, alpha) == sel);
        }
    }
}

TEST_CASE("selection examples and errors") {
    PuScoreMap map{"x", {}};
    for (int c = 0; c < 10; ++c) map.scores.push_back({{0, c}, static_cast<double>(10 - c)});
    CHECK(select_pu_negatives(map, 20) == std::vector<PixelIndex>{{0, 8}, {0, 9}});
    PuScoreMap small{"y", {{{0, 0}, 1.0}, {{0, 1}, 2.0}, {{0, 2}, 3.0}, {{0, 3}, 4.0}}};
    CHECK(select_pu_negatives(small, 20).empty());
    CHECK_THROWS_AS(select_pu_negatives(PuScoreMap{}, 20), ConfigError);
    CHECK_THROWS_AS(select_pu_negatives(map, 0), ConfigError);
    CHECK_THROWS_AS(select_pu_negatives(map, 100), ConfigError);
}

TEST_CASE("PU modes parse") {
    for (auto m : {PuMode::individual, PuMode::batch, PuMode::off}) CHECK(parse_pu_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_pu_mode("both"), ConfigError);
}

TEST_CASE("positive pixels come from the mask or the centerline") {
    ImageSample s;
    s.id = "p";
    s.pixels = ImageF(3, 3, 0.0);
    s.mask = Mask(3, 3, 0);
    (*s.mask)(1, 2) = 1;
    (*s.mask)(0, 1) = 1;
    s.centerline = std::vector<PixelIndex>{{2, 2}, {1, 1}, {2, 2}};
    CHECK(positive_pixels(s, TargetKind::mask) == std::vector<PixelIndex>{{0, 1}, {1, 2}});
    CHECK(positive_pixels(s, TargetKind::heatmap) == std::vector<PixelIndex>{{1, 1}, {2, 2}});
    s.mask.reset();
    CHECK_THROWS_AS(positive_pixels(s, TargetKind::mask), MissingAnnotation);
}

namespace {

DatasetSplit small_split(std::uint64_t seed, SyntheticOptions opt) {
    auto samples = generate_synthetic(seed, 4, {32, 32}, opt);
    DatasetSplit split;
    split.labeled.push_back(samples[0]);
    split.unlabeled = {samples[1], samples[2], samples[3]};
    return split;
}

std::map<std::string, PseudoLabelSet> confident_labels(const SegModel& model, const DatasetSplit& split) {
    std::map<std::string, PseudoLabelSet> out;
    for (const auto& u : split.unlabeled) out[u.id] = select_by_confidence(model.predict(u), 0.8, 0.1);
    return out;
}

}  // namespace

TEST_CASE("stage fills only PU negatives, alpha percent of each image's unlabeled pixels") {
    SyntheticOptions opt;
    const auto split = small_split(8, opt);
    TrainConfig tc;
    tc.epochs = 30;
    tc.crop_size = 32;
    tc.crops_per_step = 2;
    const auto model = train_supervised(split.labeled, tc);
    const auto labels = confident_labels(model, split);

    PuStageOptions po;
    po.train.epochs = 50;
    const auto ind = run_pu_stage(model, split, labels, po);
    CHECK(ind.heads.size() == 3);
    REQUIRE(ind.reports.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& id = split.unlabeled[i].id;
        const auto& before = labels.at(id);
        const auto& after = ind.labels.at(id);
        CHECK(after.positives == before.positives);
        CHECK(after.negatives == before.negatives);
        const auto n_u = unlabeled_indices(before.shape, before).size();
        CHECK(after.pu_negatives.size() == static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n_u) + 1e-9)));
        CHECK_NOTHROW(validate(after));
        CHECK(ind.reports[i].image_id == id);
        CHECK(ind.reports[i].n_u == n_u);
        CHECK(ind.heads[i].image_id == id);
        CHECK(ind.reports[i].final_risk <= ind.reports[i].initial_risk);
    }
    // per-image priors differ with |U_i|
    CHECK(ind.reports[0].prior == estimate_prior(ind.reports[0].n_p, ind.reports[0].n_u));

    po.mode = PuMode::batch;
    const auto batch = run_pu_stage(model, split, labels, po);
    REQUIRE(batch.heads.size() == 1);
    CHECK(batch.heads[0].image_id == "BATCH");

    po.mode = PuMode::off;
    const auto off = run_pu_stage(model, split, labels, po);
    CHECK(off.heads.empty());
    for (const auto& [id, l] : off.labels) CHECK(l.pu_negatives.empty());

    // worker count does not change the result
    po.mode = PuMode::individual;
    po.workers = 3;
    const auto par = run_pu_stage(model, split, labels, po);
    for (const auto& [id, l] : par.labels) CHECK(l.pu_negatives == ind.labels.at(id).pu_negatives);

    po.alpha = 0;
    CHECK_THROWS_AS(run_pu_stage(model, split, labels, po), ConfigError);
}

namespace {

/// Fixed feature extractor: each intensity code maps to a 2-D feature with a
/// small per-pixel jitter, so the feature distribution of every image is chosen
/// directly by the test.
class CodeBackbone final : public Backbone {
public:
    std::string kind() const override { return "test_codes"; }
    int feature_dim() const override { return 2; }
    int size_multiple() const override { return 1; }
    std::unique_ptr<Backbone> clone() const override { return std::make_unique<CodeBackbone>(); }
    void initialize(std::uint64_t) override {}
    std::unique_ptr<BackboneTape> make_tape() const override { return std::make_unique<BackboneTape>(); }
    Tensor<float> forward(const Tensor<float>& x, BackboneTape*) const override {
        Tensor<float> f(2, x.rows, x.cols);
        for (int i = 0; i < x.plane(); ++i) {
            const int code = static_cast<int>(std::lround((x.data[i] + 0.5) * 10.0));
            const double jitter = 0.05 * std::sin(12.9898 * i);
            double a = 0, b = 0;
            switch (code) {
                case 1: a = -1.0, b = 1.0; break;  // plain background
                case 3: a = 1.0, b = 0.0; break;   // vessel, as in the labeled image
                case 5: a = 1.4, b = -1.0; break;  // noise in image A: brighter than the vessels along a
                case 7: a = 0.9, b = 0.1; break;   // vessels of image A
                default: break;
            }
            f.channel(0)[i] = static_cast<float>(a + jitter);
            f.channel(1)[i] = static_cast<float>(b - jitter);
        }
        return f;
    }
    void backward(const BackboneTape&, Tensor<float>) override {}
    std::vector<ParamView<float>> parameters() override { return {}; }
};

ImageSample coded(const std::string& id, int rows, int cols, const std::vector<std::pair<int, int>>& codes_by_row) {
    ImageSample s;
    s.id = id;
    s.pixels = ImageF(rows, cols, 0.1);
    s.mask = Mask(rows, cols, 0);
    for (const auto& [row, code] : codes_by_row)
        for (int c = 0; c < cols; ++c) {
            s.pixels(row, c) = code / 10.0;
            (*s.mask)(row, c) = code == 3 || code == 7;
        }
    return s;
}

}  // namespace

TEST_CASE("per-image PU beats batch PU when one image's noise looks like vessels elsewhere") {
    // A: rows of noise (code 5) and faint vessels (code 7), all uncertain.
    // B: a large uncertain pool of plain background and vessels; it dominates the pooled batch problem.
    const int cols = 20;
    DatasetSplit split;
    split.labeled.push_back(coded("L", 10, cols, {{2, 3}, {5, 3}, {8, 3}}));
    split.unlabeled.push_back(coded("A", 10, cols, {{1, 5}, {2, 5}, {3, 5}, {4, 5}, {5, 5}, {6, 5}, {7, 5}, {8, 7}, {9, 7}}));
    split.unlabeled.push_back(coded("B", 40, cols, {{5, 3}, {15, 3}, {25, 3}, {35, 3}}));

    std::map<std::string, PseudoLabelSet> labels;
    for (const auto& s : split.unlabeled) {
        PseudoLabelSet p{s.id, s.shape(), {}, {}, {}};
        if (s.id == "A")
            for (int c = 0; c < cols; ++c) p.negatives.push_back({0, c});  // row 0 is confidently background
        labels[s.id] = p;
    }
    const SegModel model(std::make_unique<CodeBackbone>());

    auto precision_on_a = [&](PuMode mode) {
        PuStageOptions o;
        o.mode = mode;
        o.alpha = 30.0;
        o.train.epochs = 400;
        const auto res = run_pu_stage(model, split, labels, o);
        const auto& sel = res.labels.at("A").pu_negatives;
        REQUIRE_FALSE(sel.empty());
        double good = 0;
        for (const auto& p : sel) good += !(*split.unlabeled[0].mask)[p];
        return good / static_cast<double>(sel.size());
    };
    const double individual = precision_on_a(PuMode::individual);
    const double batch = precision_on_a(PuMode::batch);
    MESSAGE("N_pu precision on A: individual " << individual << ", batch " << batch);
    CHECK(individual > batch);
    CHECK(individual >= 0.9);
}
