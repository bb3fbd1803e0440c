#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfpx/image.hpp"

namespace rfpx {

/// Per-camera depth frame in meters, row-major. Values are finite and ≥ 0.
class DepthMap {
 public:
  DepthMap(std::size_t height, std::size_t width, std::vector<double> meters);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::span<const double> values() const { return values_; }
  double at(std::size_t r, std::size_t c) const { return values_[r * width_ + c]; }

 private:
  std::size_t height_, width_;
  std::vector<double> values_;
};

/// Dataset extremes (meters) and moments of the normalized values.
struct DepthStats {
  double d_min = 0.0;
  double d_max = 1.0;
  double mu = 0.0;
  double sigma = 1.0;

  /// Throws DegenerateRangeError unless d_max > d_min and sigma > 0.
  void validate() const;
  std::string to_json() const;
  static DepthStats from_json(const std::string& text);
  bool operator==(const DepthStats&) const = default;
};

/// Depth rescaled to [0,1] against dataset extremes.
struct NormalizedDepth {
  std::size_t height = 0, width = 0;
  std::vector<double> values;
};

/// Standardized depth replicated into three identical channels.
struct StandardizedDepth {
  ThreeChannelImage image;
};

/// 8-bit quantization of a normalized depth frame.
struct QuantizedDepth {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> values;
};

ThreeChannelImage replicate3(const DepthMap& depth);

/// Global extrema over every pixel of every map, then the population mean and
/// standard deviation of the normalized values.
DepthStats compute_stats(std::span<const DepthMap> dataset);

/// Same moments as compute_stats but against a caller-chosen range; used for
/// the depth-extremes ablation. Out-of-range pixels clamp before the moments.
DepthStats stats_for_range(std::span<const DepthMap> dataset, double d_min, double d_max);

/// (d − d_min)/(d_max − d_min), clamped to [0,1].
NormalizedDepth normalize_depth(const DepthMap& depth, const DepthStats& stats);

/// (d′ − μ)/σ, replicated to three channels.
StandardizedDepth standardize_depth(const NormalizedDepth& normalized, const DepthStats& stats);

/// replicate → normalize → standardize, the full preprocessing chain.
StandardizedDepth preprocess_depth(const DepthMap& depth, const DepthStats& stats);

/// round(255·d′) with ties rounding up. Values outside [0,1] are a contract error.
QuantizedDepth quantize_u8(const NormalizedDepth& normalized);

/// Number of positions whose quantized values differ.
std::size_t pixel_change_count(const QuantizedDepth& a, const QuantizedDepth& b);

}  // namespace rfpx
