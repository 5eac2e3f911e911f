#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "puseg/core/image_sample.hpp"
#include "puseg/eval/metrics.hpp"
#include "puseg/eval/tracing.hpp"
#include "puseg/net/seg_model.hpp"

namespace puseg {

enum class Task { segmentation, heatmap_tracing };

Task parse_task(std::string_view text);
std::string_view to_string(Task task);

struct EvalOptions {
    double binarize_threshold = 0.5;
    TraceOptions trace;
    std::vector<double> tolerances = kDefaultTolerances;
    int workers = 1;
};

struct ImageMetrics {
    std::string image_id;
    double dice = 0.0;          // segmentation
    CoverageReport coverage;    // heatmap_tracing
    std::size_t traced_branches = 0;
};

struct RunMetrics {
    Task task = Task::segmentation;
    std::vector<ImageMetrics> per_image;  // test-split order
    double mean_dice = 0.0;
    CoverageReport mean_coverage;
};

/// Scores `model` on a list of test images.
RunMetrics evaluate_images(const SegModel& model, const std::vector<ImageSample>& test, Task task,
                           const EvalOptions& options = {});
/// Scores `model` on split.test.
RunMetrics evaluate_run(const SegModel& model, const DatasetSplit& split, Task task, const EvalOptions& options = {});

/// The headline number of a run: mean Dice, or mean coverage averaged over tolerances.
double headline(const RunMetrics& metrics);

/// One JSON object per test image, then nothing else. Byte-stable for equal inputs.
void write_metrics_jsonl(const std::filesystem::path& path, const RunMetrics& metrics);
std::string format_summary(const RunMetrics& metrics, const std::string& method);

/// Confidence map, binarized mask or traced centerlines as PNG, one set per image.
void write_visualizations(const std::filesystem::path& dir, const SegModel& model,
                          const std::vector<ImageSample>& images, Task task, const EvalOptions& options = {});

}  // namespace puseg
