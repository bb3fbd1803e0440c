#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfpx/action.hpp"

namespace rfpx::sim {

// Table geometry (meters). The table is a square [0, kTableSize]² rendered
// at kPixel meters per pixel by both cameras.
inline constexpr double kTableSize = 0.64;
inline constexpr int kImageSize = 32;
inline constexpr double kPixel = kTableSize / kImageSize;
inline constexpr double kStaticCameraHeight = 1.0;
inline constexpr double kGripperCameraOffset = 0.05;
inline constexpr double kFloorDrop = 0.75;
inline constexpr double kGripperMaxZ = 0.4;
inline constexpr double kGripperRadius = 0.01;
inline constexpr double kHoverHeight = 0.2;
inline constexpr double kLiftSuccessHeight = 0.2;
inline constexpr double kGraspRadius = 0.05;
inline constexpr double kBlockHalf = 0.03;
inline constexpr double kButtonHeight = 0.02;
inline constexpr double kPressedButtonHeight = 0.008;
inline constexpr double kSliderTravel = 0.24;
inline constexpr double kKnobHeight = 0.04;
inline constexpr double kBinHalf = 0.06;
inline constexpr double kBinHeight = 0.02;

enum class ObjectKind { block, button, slider, bin };
enum class ColorName { red, green, blue, yellow, none };
enum class Palette { A, B, C, D };
enum class SceneKind { standard, tall_short };

std::string to_string(ObjectKind kind);
std::string to_string(ColorName color);
std::string to_string(Palette palette);
std::string to_string(SceneKind scene);
Palette palette_from_string(const std::string& text);
SceneKind scene_from_string(const std::string& text);

struct Object {
  ObjectKind kind = ObjectKind::block;
  ColorName color = ColorName::none;
  double x = 0.0, y = 0.0;  // footprint center
  double z = 0.0;           // bottom
  double half = kBlockHalf;  // square footprint half-extent
  double height = 0.0;
  bool held = false;
  bool in_bin = false;
  bool pressed = false;      // button
  double track_x0 = 0.0;     // slider: knob x ranges over [track_x0, track_x0 + kSliderTravel]

  double top() const { return z + height; }
  bool covers(double px, double py, double margin = 0.0) const;
  bool operator==(const Object&) const = default;
};

struct Gripper {
  double x = 0.0, y = 0.0, z = 0.0;
  bool closed = false;
  bool operator==(const Gripper&) const = default;
};

/// Complete simulator state. Policies never see this; they receive rendered
/// observations only.
struct WorldState {
  Gripper gripper;
  std::vector<Object> objects;
  Palette palette = Palette::A;
  SceneKind scene = SceneKind::standard;

  std::optional<std::size_t> held_index() const;
  std::size_t index_of(ObjectKind kind) const;  // first object of a fixture kind
  bool operator==(const WorldState&) const = default;
};

/// Deterministic initial state drawn from the seed. Geometry depends only on
/// (seed, scene); the palette changes colors only.
WorldState make_env(std::uint64_t seed, Palette palette, SceneKind scene = SceneKind::standard);

/// One dynamics step: clip the command, apply gripper transitions, move
/// horizontally (pushing blocks and the slider knob it collides with), move
/// vertically down to the supporting surface, and update the button.
WorldState step_env(const WorldState& state, const Action& action, double clip_bound = kDefaultClipBound);

/// Highest supporting surface under (x, y) for a gripper at height z,
/// ignoring held objects and anything the gripper is already below the top of.
double surface_height(const WorldState& state, double x, double y, double z);

}  // namespace rfpx::sim
