#include "rfpx/sim/world.hpp"

#include <algorithm>
#include <cmath>

#include "rfpx/error.hpp"
#include "rfpx/rng.hpp"

namespace rfpx::sim {

namespace {

constexpr double kEps = 1e-9;
constexpr double kGraspHeadroom = 0.02;
constexpr double kLayoutGap = 0.04;

struct Rect {
  double x0, y0, x1, y1;
  bool overlaps(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

Rect reserved_rect(const Object& o) {
  if (o.kind == ObjectKind::slider) {
    // Track plus approach room on both ends for the slide expert.
    return {o.track_x0 - 0.12, o.y - o.half - kLayoutGap, o.track_x0 + kSliderTravel + 0.12, o.y + o.half + kLayoutGap};
  }
  return {o.x - o.half - kLayoutGap, o.y - o.half - kLayoutGap, o.x + o.half + kLayoutGap, o.y + o.half + kLayoutGap};
}

// Pixel-center grid position in [lo, hi].
double grid_coordinate(Rng& rng, double lo, double hi) {
  const int first = static_cast<int>(std::ceil(lo / kPixel - 0.5));
  const int last = static_cast<int>(std::floor(hi / kPixel - 0.5));
  const int k = first + static_cast<int>(rng.index(static_cast<std::size_t>(last - first + 1)));
  return (k + 0.5) * kPixel;
}

bool try_place(Rng& rng, Object& o, std::vector<Rect>& taken) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    if (o.kind == ObjectKind::slider) {
      o.track_x0 = grid_coordinate(rng, 0.08, 0.32);
      o.x = rng.uniform() < 0.5 ? o.track_x0 : o.track_x0 + kSliderTravel;
      o.y = grid_coordinate(rng, 0.06, kTableSize - 0.06);
    } else {
      const double margin = o.half + 0.02;
      o.x = grid_coordinate(rng, margin, kTableSize - margin);
      o.y = grid_coordinate(rng, margin, kTableSize - margin);
    }
    const Rect r = reserved_rect(o);
    if (std::none_of(taken.begin(), taken.end(), [&](const Rect& t) { return t.overlaps(r); })) {
      taken.push_back(r);
      return true;
    }
  }
  return false;
}

Object make_block(ColorName color, double height) {
  Object o;
  o.kind = ObjectKind::block;
  o.color = color;
  o.half = kBlockHalf;
  o.height = height;
  return o;
}

std::vector<Object> draw_objects(Rng& rng, SceneKind scene) {
  std::vector<ColorName> colors = {ColorName::red, ColorName::green, ColorName::blue, ColorName::yellow};
  for (std::size_t i = colors.size(); i > 1; --i) std::swap(colors[i - 1], colors[rng.index(i)]);
  const double heights[] = {0.04, 0.08, 0.12};

  std::vector<Object> objects;
  if (scene == SceneKind::standard) {
    for (int i = 0; i < 3; ++i) objects.push_back(make_block(colors[i], heights[rng.index(3)]));
  } else {
    const bool tall_first = rng.uniform() < 0.5;
    objects.push_back(make_block(colors[0], tall_first ? 0.12 : 0.04));
    objects.push_back(make_block(colors[0], tall_first ? 0.04 : 0.12));
    objects.push_back(make_block(colors[1], 0.08));
  }
  Object button;
  button.kind = ObjectKind::button;
  button.half = kBlockHalf;
  button.height = kButtonHeight;
  objects.push_back(button);
  Object slider;
  slider.kind = ObjectKind::slider;
  slider.half = kBlockHalf;
  slider.height = kKnobHeight;
  objects.push_back(slider);
  Object bin;
  bin.kind = ObjectKind::bin;
  bin.half = kBinHalf;
  bin.height = kBinHeight;
  objects.push_back(bin);
  return objects;
}

double clamp_unit(double v, double bound) { return std::clamp(v, -bound, bound); }

}  // namespace

std::string to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::block: return "block";
    case ObjectKind::button: return "button";
    case ObjectKind::slider: return "slider";
    case ObjectKind::bin: return "bin";
  }
  return "?";
}

std::string to_string(ColorName color) {
  switch (color) {
    case ColorName::red: return "red";
    case ColorName::green: return "green";
    case ColorName::blue: return "blue";
    case ColorName::yellow: return "yellow";
    case ColorName::none: return "none";
  }
  return "?";
}

std::string to_string(Palette palette) { return std::string(1, static_cast<char>('A' + static_cast<int>(palette))); }

std::string to_string(SceneKind scene) { return scene == SceneKind::standard ? "standard" : "tall_short"; }

Palette palette_from_string(const std::string& text) {
  if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'D') return static_cast<Palette>(text[0] - 'A');
  throw ConfigError("unknown palette '" + text + "' (expected A, B, C or D)");
}

SceneKind scene_from_string(const std::string& text) {
  if (text == "standard") return SceneKind::standard;
  if (text == "tall_short") return SceneKind::tall_short;
  throw ConfigError("unknown scene kind '" + text + "'");
}

bool Object::covers(double px, double py, double margin) const {
  const double reach = half + margin + kEps;
  return std::abs(px - x) <= reach && std::abs(py - y) <= reach;
}

std::optional<std::size_t> WorldState::held_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].held) return i;
  return std::nullopt;
}

std::size_t WorldState::index_of(ObjectKind kind) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].kind == kind) return i;
  throw TaskError("scene has no " + to_string(kind));
}

WorldState make_env(std::uint64_t seed, Palette palette, SceneKind scene) {
  // Geometry uses its own stream so the palette never perturbs layout.
  Rng rng(Rng::mix(seed, 0x5ce9e + static_cast<std::uint64_t>(scene)));
  WorldState s;
  s.palette = palette;
  s.scene = scene;
  for (;;) {
    std::vector<Object> objects = draw_objects(rng, scene);
    std::vector<Rect> taken;
    // Large fixtures first; blocks fill the remaining space.
    bool ok = true;
    for (ObjectKind kind : {ObjectKind::slider, ObjectKind::bin, ObjectKind::button, ObjectKind::block})
      for (Object& o : objects)
        if (o.kind == kind && !try_place(rng, o, taken)) ok = false;
    if (!ok) continue;
    s.objects = std::move(objects);
    break;
  }
  s.gripper.x = rng.uniform(0.1, kTableSize - 0.1);
  s.gripper.y = rng.uniform(0.1, kTableSize - 0.1);
  s.gripper.z = 0.3;
  s.gripper.closed = false;
  return s;
}

double surface_height(const WorldState& state, double x, double y, double z) {
  double surface = 0.0;
  for (const Object& o : state.objects) {
    if (o.held || !o.covers(x, y)) continue;
    if (o.top() <= z + kEps) surface = std::max(surface, o.top());
  }
  return surface;
}

namespace {

void release(WorldState& s, std::size_t index) {
  Object& o = s.objects[index];
  o.held = false;
  o.x = std::clamp(o.x, o.half, kTableSize - o.half);
  o.y = std::clamp(o.y, o.half, kTableSize - o.half);
  const Object& bin = s.objects[s.index_of(ObjectKind::bin)];
  if (bin.covers(o.x, o.y)) {
    o.in_bin = true;
    o.z = 0.0;
    return;
  }
  o.z = surface_height(s, o.x, o.y, o.z);
}

void try_grasp(WorldState& s) {
  const Gripper& g = s.gripper;
  std::optional<std::size_t> best;
  double best_distance = 0.0;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const Object& o = s.objects[i];
    if (o.kind != ObjectKind::block) continue;
    const double distance = std::hypot(o.x - g.x, o.y - g.y);
    if (distance > kGraspRadius + kEps) continue;
    if (g.z < o.z - kEps || g.z > o.top() + kGraspHeadroom + kEps) continue;
    if (!best || distance < best_distance) {
      best = i;
      best_distance = distance;
    }
  }
  if (!best) return;
  Object& o = s.objects[*best];
  o.held = true;
  o.in_bin = false;
}

}  // namespace

WorldState step_env(const WorldState& state, const Action& action, double clip_bound) {
  WorldState s = state;
  Gripper& g = s.gripper;
  const double dx = clamp_unit(action.pose[0], clip_bound);
  const double dy = clamp_unit(action.pose[1], clip_bound);
  const double dz = clamp_unit(action.pose[2], clip_bound);

  if (action.gripper_closed && !g.closed) {
    g.closed = true;
    if (!s.held_index()) try_grasp(s);
  } else if (!action.gripper_closed && g.closed) {
    g.closed = false;
    if (auto held = s.held_index()) release(s, *held);
  }

  const double nx = std::clamp(g.x + dx, 0.0, kTableSize);
  const double ny = std::clamp(g.y + dy, 0.0, kTableSize);
  const double mx = nx - g.x;
  const double my = ny - g.y;
  if (mx != 0.0 || my != 0.0) {
    for (Object& o : s.objects) {
      if (o.held || g.z >= o.top() - kEps || !o.covers(nx, ny, kGripperRadius)) continue;
      if (o.kind == ObjectKind::block) {
        o.x = std::clamp(o.x + mx, o.half, kTableSize - o.half);
        o.y = std::clamp(o.y + my, o.half, kTableSize - o.half);
      } else if (o.kind == ObjectKind::slider) {
        o.x = std::clamp(o.x + mx, o.track_x0, o.track_x0 + kSliderTravel);
      }
    }
  }
  g.x = nx;
  g.y = ny;

  const auto held = s.held_index();
  const double carried = held ? s.objects[*held].height : 0.0;
  const double floor = surface_height(s, nx, ny, g.z - carried) + carried;
  // floor ≤ g.z by construction: only surfaces at or below the gripper count.
  g.z = std::clamp(g.z + dz, floor, kGripperMaxZ);
  if (held) {
    Object& o = s.objects[*held];
    o.x = nx;
    o.y = ny;
    o.z = g.z - o.height;
  }

  Object& button = s.objects[s.index_of(ObjectKind::button)];
  if (!button.pressed && button.covers(nx, ny) && g.z <= button.top() + kEps) {
    button.pressed = true;
    button.height = kPressedButtonHeight;
  }
  return s;
}

}  // namespace rfpx::sim
