#include "puseg/eval/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "puseg/core/image_io.hpp"
#include "puseg/errors.hpp"

namespace puseg {

Task parse_task(std::string_view text) {
    if (text == "segmentation") return Task::segmentation;
    if (text == "heatmap_tracing") return Task::heatmap_tracing;
    throw ConfigError("unknown task '" + std::string(text) + "'");
}

std::string_view to_string(Task task) { return task == Task::segmentation ? "segmentation" : "heatmap_tracing"; }

namespace {

ImageMetrics score_image(const SegModel& model, const ImageSample& s, Task task, const EvalOptions& o) {
    ImageMetrics m{s.id};
    const ConfidenceMap conf = model.predict(s);
    if (task == Task::segmentation) {
        if (!s.mask) throw MissingAnnotation("test sample '" + s.id + "' has no mask");
        m.dice = dice(binarize(conf, o.binarize_threshold), *s.mask);
    } else {
        if (!s.centerline || s.centerline->empty())
            throw MissingAnnotation("test sample '" + s.id + "' has no centerline");
        TraceResult trace = trace_vessels(conf.values, o.trace);
        trace.source_id = s.id;
        m.traced_branches = trace.branches.size();
        m.coverage = coverage(trace, centerline_branches(*s.centerline), o.tolerances);
    }
    return m;
}

}  // namespace

RunMetrics evaluate_images(const SegModel& model, const std::vector<ImageSample>& test, Task task,
                           const EvalOptions& options) {
    if (test.empty()) throw ConfigError("evaluation needs a non-empty test set");
    for (const auto& s : test) {
        if (task == Task::segmentation && !s.mask) throw MissingAnnotation("test sample '" + s.id + "' has no mask");
        if (task == Task::heatmap_tracing && !s.centerline)
            throw MissingAnnotation("test sample '" + s.id + "' has no centerline");
    }

    RunMetrics out;
    out.task = task;
    out.per_image.resize(test.size());
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(test.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < test.size(); ++i) out.per_image[i] = score_image(model, test[i], task, options);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(test.size());
        {
            std::vector<std::jthread> pool;
            for (int t = 0; t < workers; ++t)
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < test.size(); i = next++) {
                        try {
                            out.per_image[i] = score_image(model, test[i], task, options);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                    }
                });
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    const double n = static_cast<double>(test.size());
    for (const auto& m : out.per_image) {
        out.mean_dice += m.dice / n;
        for (const auto& [t, v] : m.coverage.per_tolerance) out.mean_coverage.per_tolerance[t] += v / n;
        out.mean_coverage.average += m.coverage.average / n;
    }
    return out;
}

RunMetrics evaluate_run(const SegModel& model, const DatasetSplit& split, Task task, const EvalOptions& options) {
    return evaluate_images(model, split.test, task, options);
}

double headline(const RunMetrics& metrics) {
    return metrics.task == Task::segmentation ? metrics.mean_dice : metrics.mean_coverage.average;
}

namespace {

std::string tolerance_key(double t) {
    std::ostringstream ss;
    ss << t;
    return ss.str();
}

}  // namespace

void write_metrics_jsonl(const std::filesystem::path& path, const RunMetrics& metrics) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (const auto& m : metrics.per_image) {
        nlohmann::ordered_json j;
        j["image_id"] = m.image_id;
        j["task"] = std::string(to_string(metrics.task));
        if (metrics.task == Task::segmentation) {
            j["dice"] = m.dice;
        } else {
            for (const auto& [t, v] : m.coverage.per_tolerance) j["coverage_" + tolerance_key(t) + "px"] = v;
            j["coverage_avg"] = m.coverage.average;
            j["traced_branches"] = m.traced_branches;
        }
        out << j.dump() << '\n';
    }
}

std::string format_summary(const RunMetrics& metrics, const std::string& method) {
    std::ostringstream ss;
    char buf[64];
    if (metrics.task == Task::segmentation) {
        ss << "method: " << method << "\n";
        for (const auto& m : metrics.per_image) {
            std::snprintf(buf, sizeof buf, "%.4f", m.dice);
            ss << "  " << m.image_id << "  dice " << buf << "\n";
        }
        std::snprintf(buf, sizeof buf, "%.4f", metrics.mean_dice);
        ss << "mean dice: " << buf << "\n";
    } else {
        ss << "method: " << method << "\n";
        for (const auto& [t, v] : metrics.mean_coverage.per_tolerance) {
            std::snprintf(buf, sizeof buf, "%.4f", v);
            ss << "  coverage@" << tolerance_key(t) << "px " << buf << "\n";
        }
        std::snprintf(buf, sizeof buf, "%.4f", metrics.mean_coverage.average);
        ss << "mean coverage (avg over tolerances): " << buf << "\n";
    }
    return ss.str();
}

void write_visualizations(const std::filesystem::path& dir, const SegModel& model,
                          const std::vector<ImageSample>& images, Task task, const EvalOptions& options) {
    std::filesystem::create_directories(dir);
    for (const auto& s : images) {
        const ConfidenceMap conf = model.predict(s);
        write_png(dir / (s.id + "_confidence.png"), conf.values);
        ImageF overlay = s.pixels;
        for (double& v : overlay.values()) v *= 0.5;
        if (task == Task::segmentation) {
            const Mask m = binarize(conf, options.binarize_threshold);
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m.data()[i]) overlay.data()[i] = 1.0;
        } else {
            for (const auto& b : trace_vessels(conf.values, options.trace).branches)
                for (auto p : b) overlay[p] = 1.0;
        }
        write_png(dir / (s.id + "_overlay.png"), overlay);
    }
}

}  // namespace puseg
