#pragma once

#include <array>

namespace rfpx {

/// Relative end-effector command: (Δx, Δy, Δz) in meters, (Δroll, Δpitch,
/// Δyaw) in radians, plus the absolute gripper command.
struct Action {
  std::array<double, 6> pose{};
  bool gripper_closed = false;

  bool operator==(const Action&) const = default;
};

/// Per-step magnitude bound for every pose component.
inline constexpr double kDefaultClipBound = 0.1;

}  // namespace rfpx
