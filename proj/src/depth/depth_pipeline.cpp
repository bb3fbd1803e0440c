#include "rfpx/depth/depth_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "rfpx/error.hpp"

namespace rfpx {

DepthMap::DepthMap(std::size_t height, std::size_t width, std::vector<double> meters)
    : height_(height), width_(width), values_(std::move(meters)) {
  if (height_ == 0 || width_ == 0) throw DimensionError("depth map extents must be positive");
  if (values_.size() != height_ * width_) {
    throw DimensionError("depth map " + std::to_string(height_) + "x" + std::to_string(width_) + " needs " +
                         std::to_string(height_ * width_) + " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw NumericInputError("depth values must be finite and non-negative");
  }
}

void DepthStats::validate() const {
  if (!(d_max > d_min)) {
    throw DegenerateRangeError("depth range is degenerate: d_min=" + std::to_string(d_min) +
                               " d_max=" + std::to_string(d_max));
  }
  if (!(sigma > 0.0)) throw DegenerateRangeError("depth sigma must be positive, got " + std::to_string(sigma));
}

std::string DepthStats::to_json() const {
  nlohmann::ordered_json j;
  j["d_min"] = d_min;
  j["d_max"] = d_max;
  j["mu"] = mu;
  j["sigma"] = sigma;
  return j.dump();
}

DepthStats DepthStats::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DepthStats s{j.at("d_min").get<double>(), j.at("d_max").get<double>(), j.at("mu").get<double>(),
               j.at("sigma").get<double>()};
  s.validate();
  return s;
}

ThreeChannelImage replicate3(const DepthMap& depth) {
  ThreeChannelImage out(depth.height(), depth.width());
  const auto plane = depth.values().size();
  for (std::size_t c = 0; c < 3; ++c) std::copy(depth.values().begin(), depth.values().end(), out.data.begin() + c * plane);
  return out;
}

namespace {

double normalize_value(double d, double d_min, double d_max) {
  return std::clamp((d - d_min) / (d_max - d_min), 0.0, 1.0);
}

DepthStats moments(std::span<const DepthMap> dataset, double d_min, double d_max) {
  DepthStats stats{d_min, d_max, 0.0, 1.0};
  if (!(d_max > d_min)) stats.validate();
  long double total = 0;
  std::size_t count = 0;
  for (const auto& map : dataset) {
    for (double d : map.values()) total += normalize_value(d, d_min, d_max);
    count += map.values().size();
  }
  const long double mean = total / static_cast<long double>(count);
  long double sq = 0;
  for (const auto& map : dataset) {
    for (double d : map.values()) {
      const long double dev = normalize_value(d, d_min, d_max) - mean;
      sq += dev * dev;
    }
  }
  stats.mu = static_cast<double>(mean);
  stats.sigma = static_cast<double>(std::sqrt(sq / static_cast<long double>(count)));
  stats.validate();
  return stats;
}

}  // namespace

DepthStats compute_stats(std::span<const DepthMap> dataset) {
  if (dataset.empty()) throw ContractError("compute_stats: empty dataset");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& map : dataset) {
    const auto [mn, mx] = std::minmax_element(map.values().begin(), map.values().end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
  }
  if (!(hi > lo)) throw DegenerateRangeError("compute_stats: every pixel has the same depth");
  return moments(dataset, lo, hi);
}

DepthStats stats_for_range(std::span<const DepthMap> dataset, double d_min, double d_max) {
  if (dataset.empty()) throw ContractError("stats_for_range: empty dataset");
  return moments(dataset, d_min, d_max);
}

NormalizedDepth normalize_depth(const DepthMap& depth, const DepthStats& stats) {
  if (!(stats.d_max > stats.d_min)) stats.validate();
  NormalizedDepth out{depth.height(), depth.width(), std::vector<double>(depth.values().size())};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = normalize_value(depth.values()[i], stats.d_min, stats.d_max);
  }
  return out;
}

StandardizedDepth standardize_depth(const NormalizedDepth& normalized, const DepthStats& stats) {
  if (!(stats.sigma > 0.0)) throw DegenerateRangeError("standardize_depth: sigma must be positive");
  StandardizedDepth out{ThreeChannelImage(normalized.height, normalized.width)};
  const auto plane = normalized.values.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = (normalized.values[i] - stats.mu) / stats.sigma;
    for (std::size_t c = 0; c < 3; ++c) out.image.data[c * plane + i] = v;
  }
  return out;
}

StandardizedDepth preprocess_depth(const DepthMap& depth, const DepthStats& stats) {
  stats.validate();
  return standardize_depth(normalize_depth(depth, stats), stats);
}

QuantizedDepth quantize_u8(const NormalizedDepth& normalized) {
  QuantizedDepth out{normalized.height, normalized.width, std::vector<std::uint8_t>(normalized.values.size())};
  for (std::size_t i = 0; i < normalized.values.size(); ++i) {
    const double v = normalized.values[i];
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("quantize_u8: value outside [0,1]; normalize first");
    out.values[i] = static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
  }
  return out;
}

std::size_t pixel_change_count(const QuantizedDepth& a, const QuantizedDepth& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("pixel_change_count: extents " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) changed += a.values[i] != b.values[i];
  return changed;
}

}  // namespace rfpx
