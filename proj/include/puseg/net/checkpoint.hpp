#pragma once

#include <filesystem>

#include "puseg/net/seg_model.hpp"

namespace puseg {

/// Checkpoint layout:
///   "PUSEG1\n"
///   "backbone_kind <kind>\n" "feature_dim <D>\n" "param_count <N>\n"
///   N times: "<name> <f32|f64> <count>\n" followed by count little-endian values.
/// The head is stored as "head.weight" (f64, D values) and "head.bias" (f64, 1 value).
void save_model(const std::filesystem::path& path, SegModel& model);
SegModel load_model(const std::filesystem::path& path);

}  // namespace puseg
