#include "puseg/pu/pu_stage.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "puseg/errors.hpp"
#include "puseg/rng.hpp"

namespace puseg {

PuMode parse_pu_mode(std::string_view text) {
    if (text == "individual") return PuMode::individual;
    if (text == "batch") return PuMode::batch;
    if (text == "off") return PuMode::off;
    throw ConfigError("unknown pu_mode '" + std::string(text) + "'");
}

std::string_view to_string(PuMode mode) {
    switch (mode) {
        case PuMode::individual: return "individual";
        case PuMode::batch: return "batch";
        case PuMode::off: return "off";
    }
    return "unknown";
}

std::vector<PixelIndex> positive_pixels(const ImageSample& sample, TargetKind target) {
    std::vector<PixelIndex> out;
    if (target == TargetKind::mask) {
        if (!sample.mask) throw MissingAnnotation("labeled sample '" + sample.id + "' has no mask");
        for (int r = 0; r < sample.mask->rows(); ++r)
            for (int c = 0; c < sample.mask->cols(); ++c)
                if ((*sample.mask)(r, c)) out.push_back({r, c});
    } else {
        if (!sample.centerline) throw MissingAnnotation("labeled sample '" + sample.id + "' has no centerline");
        out = *sample.centerline;
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
}

namespace {

/// Uniform subsample of rows without replacement (order preserved).
FeatureMatrix cap_rows(const FeatureMatrix& m, std::size_t cap, std::uint64_t seed) {
    if (static_cast<std::size_t>(m.rows()) <= cap) return m;
    std::vector<Eigen::Index> all(static_cast<std::size_t>(m.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Index> keep;
    Rng rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(keep), cap, rng);
    FeatureMatrix out(static_cast<Eigen::Index>(cap), m.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(keep[i]);
    return out;
}

FeatureMatrix stack_rows(const std::vector<FeatureMatrix>& parts, int dim) {
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.rows();
    FeatureMatrix out(n, dim);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p;
        at += p.rows();
    }
    return out;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
    const auto threads = static_cast<std::size_t>(std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace

PuStageResult run_pu_stage(const SegModel& model, const DatasetSplit& split,
                           const std::map<std::string, PseudoLabelSet>& labels, const PuStageOptions& options) {
    if (!(options.alpha > 0.0 && options.alpha < 100.0)) throw ConfigError("alpha must lie in (0,100)");
    for (const auto& s : split.unlabeled)
        if (!labels.contains(s.id)) throw ConfigError("no pseudo-labels for unlabeled image '" + s.id + "'");

    PuStageResult result;
    for (const auto& s : split.unlabeled) {
        PseudoLabelSet pls = labels.at(s.id);
        pls.pu_negatives.clear();
        result.labels.emplace(s.id, std::move(pls));
    }
    result.reports.resize(split.unlabeled.size());
    if (options.mode == PuMode::off) {
        for (std::size_t i = 0; i < split.unlabeled.size(); ++i) result.reports[i] = {split.unlabeled[i].id};
        return result;
    }

    const int dim = model.feature_dim();
    std::vector<FeatureMatrix> pos_parts;
    for (const auto& s : split.labeled)
        pos_parts.push_back(gather_features(model.extract_features(s), positive_pixels(s, options.target)));

    const std::size_t n_img = split.unlabeled.size();
    std::vector<FeatureStack> features(n_img);
    std::vector<std::vector<PixelIndex>> unl(n_img);
    parallel_for(n_img, options.workers, [&](std::size_t i) {
        const auto& s = split.unlabeled[i];
        features[i] = model.extract_features(s);
        unl[i] = unlabeled_indices(s.shape(), result.labels.at(s.id));
    });
    if (options.include_pseudo_positives)
        for (std::size_t i = 0; i < n_img; ++i)
            pos_parts.push_back(gather_features(features[i], result.labels.at(split.unlabeled[i].id).positives));

    const FeatureMatrix positives_all = stack_rows(pos_parts, dim);
    if (positives_all.rows() == 0) throw PriorError("labeled images contain no positive pixels");
    const std::uint64_t seed = options.train.seed;
    const FeatureMatrix positives = cap_rows(positives_all, options.train.max_samples, derive_seed(seed, "cap_p"));
    const auto n_p = static_cast<std::size_t>(positives_all.rows());

    auto select_into = [&](std::size_t i, const PuHead& head) {
        auto& pls = result.labels.at(split.unlabeled[i].id);
        pls.pu_negatives = select_pu_negatives(score_unlabeled(head, features[i], unl[i]), options.alpha);
        result.reports[i].n_pu_negatives = pls.pu_negatives.size();
    };

    if (options.mode == PuMode::individual) {
        result.heads.resize(n_img);
        parallel_for(n_img, options.workers, [&](std::size_t i) {
            const auto& id = split.unlabeled[i].id;
            auto& rep = result.reports[i];
            rep.image_id = id;
            if (unl[i].empty()) {
                spdlog::warn("image '{}' has no unlabeled pixels; PU stage skipped", id);
                rep.skipped = true;
                return;
            }
            const FeatureMatrix u_all = gather_features(features[i], unl[i]);
            PuProblem problem = make_pu_problem(
                positives, cap_rows(u_all, options.train.max_samples, derive_seed(derive_seed(seed, "cap_u"), id)),
                n_p, unl[i].size());
            PuTrainConfig cfg = options.train;
            cfg.seed = derive_seed(seed, id);
            const auto trained = train_pu_head_detailed(problem, cfg);

            rep.prior = problem.prior;
            rep.n_p = n_p;
            rep.n_u = unl[i].size();
            rep.initial_risk = trained.initial_risk;
            rep.final_risk = trained.final_risk;
            rep.clamp_activations = trained.clamp_activations;
            result.heads[i] = trained.head;
            result.heads[i].image_id = id;
            select_into(i, result.heads[i]);
        });
        std::erase_if(result.heads, [](const PuHead& h) { return h.weights.empty(); });
        return result;
    }

    // Batch: a single head on the pooled unlabeled pixels of every image.
    std::vector<FeatureMatrix> unl_parts;
    std::size_t n_u = 0;
    for (std::size_t i = 0; i < n_img; ++i) {
        unl_parts.push_back(gather_features(features[i], unl[i]));
        n_u += unl[i].size();
    }
    if (n_u == 0) {
        spdlog::warn("no unlabeled pixels in any image; PU stage skipped");
        for (std::size_t i = 0; i < n_img; ++i) result.reports[i] = {split.unlabeled[i].id, 0, 0, 0, 0, 0, 0, 0, true};
        return result;
    }
    PuProblem problem = make_pu_problem(
        positives, cap_rows(stack_rows(unl_parts, dim), options.train.max_samples, derive_seed(seed, "cap_u_batch")),
        n_p, n_u);
    const auto trained = train_pu_head_detailed(problem, options.train);
    PuHead head = trained.head;
    head.image_id = "BATCH";
    for (std::size_t i = 0; i < n_img; ++i) {
        auto& rep = result.reports[i];
        rep.image_id = split.unlabeled[i].id;
        rep.prior = problem.prior;
        rep.n_p = n_p;
        rep.n_u = unl[i].size();
        rep.initial_risk = trained.initial_risk;
        rep.final_risk = trained.final_risk;
        rep.clamp_activations = trained.clamp_activations;
        if (unl[i].empty()) {
            spdlog::warn("image '{}' has no unlabeled pixels; PU selection skipped", rep.image_id);
            rep.skipped = true;
            continue;
        }
        select_into(i, head);
    }
    result.heads.push_back(std::move(head));
    return result;
}

void write_pu_report(const std::filesystem::path& path, const std::vector<PuImageReport>& reports) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["image_id"] = r.image_id;
        j["prior"] = r.prior;
        j["n_p"] = r.n_p;
        j["n_u"] = r.n_u;
        j["initial_risk"] = r.initial_risk;
        j["final_risk"] = r.final_risk;
        j["clamp_activations"] = r.clamp_activations;
        j["n_pu_negatives"] = r.n_pu_negatives;
        j["skipped"] = r.skipped;
        out << j.dump() << '\n';
    }
}

}  // namespace puseg
