#include "rfpx/sim/render.hpp"

#include <algorithm>
#include <cmath>

namespace rfpx::sim {

namespace {

const PaletteColors kPalettes[] = {
    {{0.80, 0.78, 0.72}, {0.85, 0.15, 0.15}, {0.15, 0.70, 0.20}, {0.15, 0.25, 0.85}, {0.90, 0.85, 0.15},
     {0.95, 0.55, 0.10}, {0.55, 0.20, 0.65}, {0.45, 0.45, 0.45}, {0.35, 0.22, 0.10}},
    {{0.62, 0.48, 0.33}, {0.75, 0.10, 0.10}, {0.10, 0.60, 0.30}, {0.20, 0.30, 0.75}, {0.95, 0.80, 0.30},
     {0.90, 0.45, 0.20}, {0.60, 0.30, 0.70}, {0.35, 0.35, 0.35}, {0.25, 0.18, 0.12}},
    {{0.55, 0.66, 0.56}, {0.95, 0.25, 0.20}, {0.25, 0.80, 0.25}, {0.10, 0.20, 0.70}, {0.85, 0.90, 0.20},
     {1.00, 0.60, 0.25}, {0.50, 0.15, 0.55}, {0.40, 0.40, 0.40}, {0.40, 0.25, 0.15}},
    {{0.42, 0.44, 0.58}, {0.80, 0.20, 0.25}, {0.20, 0.65, 0.15}, {0.25, 0.35, 0.90}, {0.95, 0.90, 0.35},
     {0.85, 0.50, 0.15}, {0.65, 0.25, 0.60}, {0.30, 0.30, 0.35}, {0.30, 0.20, 0.15}},
};

constexpr double kTrackHalfWidth = 0.01;
constexpr double kTrackHeight = 0.005;
constexpr double kMarkerHalf = 0.02;

struct Surface {
  double top = 0.0;
  Rgb color;
};

// Highest visible surface at a table point.
Surface surface_at(const WorldState& s, const PaletteColors& colors, double x, double y) {
  Surface best{0.0, colors.table};
  auto consider = [&](double top, const Rgb& color) {
    if (top > best.top) best = {top, color};
  };
  for (const Object& o : s.objects) {
    if (o.kind == ObjectKind::slider) {
      if (x >= o.track_x0 - o.half && x <= o.track_x0 + kSliderTravel + o.half && std::abs(y - o.y) <= kTrackHalfWidth)
        consider(kTrackHeight, colors.track);
    }
    if (!o.covers(x, y)) continue;
    switch (o.kind) {
      case ObjectKind::block: consider(o.top(), colors.color_of(o.color)); break;
      case ObjectKind::button: consider(o.top(), colors.button); break;
      case ObjectKind::slider: consider(o.top(), colors.knob); break;
      case ObjectKind::bin: consider(o.top(), colors.bin); break;
    }
  }
  return best;
}

void put(ThreeChannelImage& img, std::size_t r, std::size_t c, const Rgb& color) {
  for (std::size_t ch = 0; ch < 3; ++ch) img.at(ch, r, c) = color[ch];
}

}  // namespace

Rgb PaletteColors::color_of(ColorName name) const {
  switch (name) {
    case ColorName::red: return red;
    case ColorName::green: return green;
    case ColorName::blue: return blue;
    case ColorName::yellow: return yellow;
    case ColorName::none: break;
  }
  return table;
}

const PaletteColors& palette_colors(Palette palette) { return kPalettes[static_cast<int>(palette)]; }

Observation render_observation(const WorldState& state) {
  const std::size_t n = kImageSize;
  const PaletteColors& colors = palette_colors(state.palette);
  const Gripper& g = state.gripper;
  const Rgb& marker = g.closed ? kGripperClosedColor : kGripperOpenColor;

  ThreeChannelImage rgb_static(n, n), rgb_gripper(n, n);
  std::vector<double> depth_static(n * n), depth_gripper(n * n);
  const double camera_z = g.z + kGripperCameraOffset;

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * kPixel;
      const double y = (static_cast<double>(r) + 0.5) * kPixel;
      const Surface here = surface_at(state, colors, x, y);
      put(rgb_static, r, c, here.color);
      depth_static[r * n + c] = kStaticCameraHeight - here.top;
      if (std::abs(x - g.x) <= kMarkerHalf && std::abs(y - g.y) <= kMarkerHalf) put(rgb_static, r, c, marker);

      const double offset_x = (static_cast<double>(c) + 0.5 - 0.5 * kImageSize) * kPixel;
      const double offset_y = (static_cast<double>(r) + 0.5 - 0.5 * kImageSize) * kPixel;
      const double wx = g.x + offset_x, wy = g.y + offset_y;
      if (wx < 0.0 || wx > kTableSize || wy < 0.0 || wy > kTableSize) {
        put(rgb_gripper, r, c, kFloorColor);
        depth_gripper[r * n + c] = camera_z + kFloorDrop;
      } else {
        const Surface seen = surface_at(state, colors, wx, wy);
        put(rgb_gripper, r, c, seen.color);
        depth_gripper[r * n + c] = std::max(camera_z - seen.top, kMinDepth);
      }
      if (std::abs(offset_x) < kPixel && std::abs(offset_y) < kPixel) put(rgb_gripper, r, c, marker);
    }
  }
  return Observation{std::move(rgb_static), std::move(rgb_gripper), DepthMap(n, n, std::move(depth_static)),
                     DepthMap(n, n, std::move(depth_gripper))};
}

}  // namespace rfpx::sim
