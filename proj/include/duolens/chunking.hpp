#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "duolens/errors.hpp"

namespace duolens {

struct ChunkRange {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const noexcept { return end - start; }
  bool operator==(const ChunkRange&) const = default;
};

// Windows over content tokens. `window` counts the two framing specials, so a
// chunk holds at most window - 2 content tokens.
struct ChunkPlan {
  std::uint32_t window = 512;
  std::uint32_t stride = 448;
  std::vector<ChunkRange> chunks;
};

inline ChunkPlan chunk(std::size_t n_tokens, std::uint32_t window = 512, std::uint32_t stride = 448) {
  if (window < 3) throw DataError("chunk window must be >= 3 to fit the framing specials");
  if (stride < 1 || stride > window - 2) {
    throw DataError("chunk stride must be in [1, window - 2], got " + std::to_string(stride));
  }
  if (n_tokens == 0) throw DataError("empty document");
  ChunkPlan plan{window, stride, {}};
  const std::size_t slots = window - 2;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + slots, n_tokens);
    plan.chunks.push_back({start, end});
    if (end == n_tokens) break;
  }
  return plan;
}

enum class Aggregation { Mean, Max };

inline std::string to_string(Aggregation a) { return a == Aggregation::Mean ? "mean" : "max"; }

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "max") return Aggregation::Max;
  throw DataError("unknown aggregation '" + std::string(s) + "' (expected mean or max)");
}

// Combines raw chunk logits (before calibration).
inline double aggregate(std::span<const double> logits, Aggregation mode = Aggregation::Mean) {
  if (logits.empty()) throw DataError("aggregate needs at least one logit");
  if (logits.size() == 1) return logits[0];
  if (mode == Aggregation::Max) return *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += z;
  return s / static_cast<double>(logits.size());
}

// Groups item logits by owner index and aggregates each group in item order.
inline std::vector<double> aggregate_groups(std::span<const double> logits, std::span<const std::size_t> group,
                                            std::size_t n_groups, Aggregation mode = Aggregation::Mean) {
  std::vector<std::vector<double>> per(n_groups);
  for (std::size_t i = 0; i < logits.size(); ++i) per.at(group[i]).push_back(logits[i]);
  std::vector<double> out(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) out[g] = aggregate(per[g], mode);
  return out;
}

}  // namespace duolens
