#pragma once

#include <cstddef>
#include <vector>

namespace rfpx {

/// Planar 3×H×W image of float64 values.
struct ThreeChannelImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;  // channel-major: data[(c*H + r)*W + col]

  ThreeChannelImage() = default;
  ThreeChannelImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), data(3 * h * w, fill) {}

  double& at(std::size_t c, std::size_t r, std::size_t col) { return data[(c * height + r) * width + col]; }
  double at(std::size_t c, std::size_t r, std::size_t col) const { return data[(c * height + r) * width + col]; }
  bool operator==(const ThreeChannelImage&) const = default;
};

}  // namespace rfpx
