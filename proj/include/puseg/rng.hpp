#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace puseg {

using Rng = std::mt19937_64;

/// Derives a child seed from a parent seed and a stage/purpose tag, so that
/// independent consumers never share or shift each other's streams.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace puseg
