#pragma once

#include <array>

#include "rfpx/depth/depth_pipeline.hpp"
#include "rfpx/image.hpp"
#include "rfpx/sim/world.hpp"

namespace rfpx::sim {

using Rgb = std::array<double, 3>;

/// What a policy sees at one timestep: static and gripper cameras, RGB and depth.
struct Observation {
  ThreeChannelImage rgb_static;
  ThreeChannelImage rgb_gripper;
  DepthMap depth_static;
  DepthMap depth_gripper;
};

struct PaletteColors {
  Rgb table, red, green, blue, yellow, button, knob, track, bin;
  Rgb color_of(ColorName name) const;
};

const PaletteColors& palette_colors(Palette palette);

inline constexpr Rgb kFloorColor = {0.1, 0.1, 0.1};
inline constexpr Rgb kGripperOpenColor = {0.05, 0.05, 0.05};
inline constexpr Rgb kGripperClosedColor = {1.0, 1.0, 1.0};
inline constexpr double kMinDepth = 0.001;

/// Orthographic top-down renders. The static camera sees the whole table from
/// kStaticCameraHeight; the gripper camera is centered on the gripper at
/// kGripperCameraOffset above it with the same pixel pitch.
Observation render_observation(const WorldState& state);

}  // namespace rfpx::sim
