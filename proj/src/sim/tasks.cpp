#include "rfpx/sim/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rfpx/error.hpp"

namespace rfpx::sim {

namespace {

constexpr double kEps = 1e-9;
constexpr double kAlignTolerance = 0.01;
constexpr double kLiftTargetZ = 0.3;
constexpr double kLowZ = 0.01;
constexpr double kPushStep = 0.06;
constexpr double kPushOffset = 0.06;
constexpr double kPushDistance = 0.1;
constexpr double kSlideRightDone = 0.2;
constexpr double kSlideLeftDone = 0.04;

double clip(double v) { return std::clamp(v, -kDefaultClipBound, kDefaultClipBound); }

Action move_toward(const Gripper& g, double x, double y, double z, bool closed) {
  Action a;
  a.pose[0] = clip(x - g.x);
  a.pose[1] = clip(y - g.y);
  a.pose[2] = clip(z - g.z);
  a.gripper_closed = closed;
  return a;
}

Action hold_still(bool closed) {
  Action a;
  a.gripper_closed = closed;
  return a;
}

double xy_distance(const Gripper& g, double x, double y) { return std::hypot(g.x - x, g.y - y); }

// Travel at hover height to (x, y); rise first when low and far away so the
// gripper never sweeps through objects on the way.
std::optional<Action> approach_from_above(const Gripper& g, double x, double y, bool closed) {
  const double distance = xy_distance(g, x, y);
  if (distance <= kAlignTolerance) return std::nullopt;
  if (g.z < kHoverHeight - kEps && distance > 3 * kAlignTolerance) return move_toward(g, g.x, g.y, kHoverHeight, closed);
  return move_toward(g, x, y, std::max(g.z, kHoverHeight), closed);
}

// Push along x from the side opposite to `sign` (sign −1 pushes left).
Action push_along_x(const Gripper& g, const Object& target, double sign) {
  const double pre_x = target.x - sign * kPushOffset;
  const double rel = (g.x - target.x) * -sign;
  const bool in_contact_band = g.z <= 0.03 && std::abs(g.y - target.y) <= 0.005 && rel > 0.0 && rel <= kPushOffset + 0.015;
  if (in_contact_band) return move_toward(g, g.x + sign * kPushStep, target.y, kLowZ, false);
  if (g.z <= 0.03 + kEps && xy_distance(g, pre_x, target.y) > 0.005) return move_toward(g, g.x, g.y, kHoverHeight, false);
  if (auto a = approach_from_above(g, pre_x, target.y, false)) return *a;
  return move_toward(g, pre_x, target.y, kLowZ, false);
}

std::string object_phrase(const TaskSpec& task) {
  std::string phrase;
  if (task.qualifier == Qualifier::tall) phrase = "tall ";
  if (task.qualifier == Qualifier::short_) phrase = "short ";
  return phrase + to_string(task.color) + " block";
}

std::string fill_slots(std::string text, const TaskSpec& task) {
  auto replace = [&](const std::string& slot, const std::string& value) {
    for (auto pos = text.find(slot); pos != std::string::npos; pos = text.find(slot)) text.replace(pos, slot.size(), value);
  };
  replace("{obj}", object_phrase(task));
  replace("{dir}", task.direction == Direction::left ? "left" : "right");
  return text;
}

std::string predicate_for(const TaskSpec& task) {
  switch (task.family) {
    case TaskFamily::lift: return "lift_held_high";
    case TaskFamily::push: return "push_left_moved";
    case TaskFamily::press: return "button_pressed";
    case TaskFamily::place: return "in_bin_released";
    case TaskFamily::slide: return task.direction == Direction::right ? "knob_at_right" : "knob_at_left";
  }
  return "";
}

// Footprint rectangle of an object as [x0, y0, x1, y1]; the slider covers its track.
std::array<double, 4> footprint(const Object& o) {
  if (o.kind == ObjectKind::slider) return {o.track_x0 - o.half, o.y - o.half, o.track_x0 + kSliderTravel + o.half, o.y + o.half};
  return {o.x - o.half, o.y - o.half, o.x + o.half, o.y + o.half};
}

bool region_clear(const WorldState& s, std::size_t skip, double x0, double y0, double x1, double y1) {
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (i == skip || s.objects[i].held) continue;
    const auto f = footprint(s.objects[i]);
    if (f[0] < x1 && x0 < f[2] && f[1] < y1 && y0 < f[3]) return false;
  }
  return true;
}

bool something_on_top(const WorldState& s, std::size_t index) {
  const Object& o = s.objects[index];
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const Object& other = s.objects[i];
    if (i == index || other.held || other.kind != ObjectKind::block) continue;
    if (std::abs(other.x - o.x) < other.half + o.half && std::abs(other.y - o.y) < other.half + o.half &&
        other.z >= o.top() - kEps)
      return true;
  }
  return false;
}

TaskSpec block_task(const WorldState& s, TaskFamily family, std::size_t index) {
  TaskSpec t;
  t.family = family;
  const Object& o = s.objects[index];
  t.color = o.color;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const Object& other = s.objects[i];
    if (i != index && other.kind == ObjectKind::block && other.color == o.color)
      t.qualifier = o.height > other.height ? Qualifier::tall : Qualifier::short_;
  }
  return t;
}

}  // namespace

std::string to_string(TaskFamily family) {
  switch (family) {
    case TaskFamily::lift: return "lift";
    case TaskFamily::push: return "push";
    case TaskFamily::press: return "press";
    case TaskFamily::place: return "place";
    case TaskFamily::slide: return "slide";
  }
  return "?";
}

TaskFamily family_from_string(const std::string& text) {
  for (TaskFamily f : kAllFamilies)
    if (to_string(f) == text) return f;
  throw ConfigError("unknown task family '" + text + "'");
}

std::size_t resolve_target(const WorldState& state, const TaskSpec& task) {
  switch (task.family) {
    case TaskFamily::press: return state.index_of(ObjectKind::button);
    case TaskFamily::slide: return state.index_of(ObjectKind::slider);
    default: break;
  }
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    const Object& o = state.objects[i];
    if (o.kind != ObjectKind::block || o.color != task.color) continue;
    if (!found) {
      found = i;
    } else if ((task.qualifier == Qualifier::tall && o.height > state.objects[*found].height) ||
               (task.qualifier == Qualifier::short_ && o.height < state.objects[*found].height)) {
      found = i;
    }
  }
  if (!found) throw TaskError("no object matches '" + object_phrase(task) + "'");
  return *found;
}

bool task_success(const WorldState& now, const WorldState& start, const TaskSpec& task) {
  const std::size_t i = resolve_target(start, task);
  const Object& o = now.objects[i];
  switch (task.family) {
    case TaskFamily::lift: return o.held && now.gripper.z >= kLiftSuccessHeight - kEps;
    case TaskFamily::push: return !o.held && o.x <= start.objects[i].x - kPushDistance + kEps;
    case TaskFamily::press: return o.pressed;
    case TaskFamily::place: return o.in_bin && !o.held;
    case TaskFamily::slide:
      return task.direction == Direction::right ? o.x >= o.track_x0 + kSlideRightDone - kEps
                                                : o.x <= o.track_x0 + kSlideLeftDone + kEps;
  }
  return false;
}

std::vector<TaskSpec> valid_tasks(const WorldState& s, const std::set<TaskFamily>& families) {
  std::vector<TaskSpec> out;
  const auto held = s.held_index();
  auto emit = [&](TaskSpec t) {
    if (!families.count(t.family)) return;
    t.predicate = predicate_for(t);
    t.instruction = canonical_instruction(t);
    if (task_success(s, s, t)) return;
    out.push_back(std::move(t));
  };
  for (TaskFamily family : kAllFamilies) {
    if (!families.count(family)) continue;
    if (family == TaskFamily::place) {
      if (held) emit(block_task(s, family, *held));
      continue;
    }
    if (held) continue;
    if (family == TaskFamily::press) {
      const std::size_t b = s.index_of(ObjectKind::button);
      const Object& button = s.objects[b];
      if (!button.pressed && region_clear(s, b, button.x - button.half, button.y - button.half, button.x + button.half,
                                          button.y + button.half)) {
        TaskSpec t;
        t.family = family;
        emit(t);
      }
      continue;
    }
    if (family == TaskFamily::slide) {
      const std::size_t k = s.index_of(ObjectKind::slider);
      const Object& knob = s.objects[k];
      const double y0 = knob.y - 0.07, y1 = knob.y + 0.07;
      TaskSpec t;
      t.family = family;
      if (region_clear(s, k, knob.x - 0.1, y0, knob.track_x0 + kSliderTravel + 0.1, y1)) {
        t.direction = Direction::right;
        emit(t);
      }
      if (region_clear(s, k, knob.track_x0 - 0.1, y0, knob.x + 0.1, y1)) {
        t.direction = Direction::left;
        emit(t);
      }
      continue;
    }
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const Object& o = s.objects[i];
      if (o.kind != ObjectKind::block || o.in_bin || something_on_top(s, i)) continue;
      if (family == TaskFamily::lift) {
        emit(block_task(s, family, i));
      } else if (family == TaskFamily::push) {
        const bool room = o.z < kEps && o.x >= 0.19 && o.x + kPushOffset <= kTableSize - 0.01;
        if (room && region_clear(s, i, o.x - 0.19, o.y - 0.07, o.x + 0.1, o.y + 0.07)) emit(block_task(s, family, i));
      }
    }
  }
  return out;
}

Action expert_action(const WorldState& s, const TaskSpec& task) {
  const std::size_t target = resolve_target(s, task);
  const Object& o = s.objects[target];
  const Gripper& g = s.gripper;
  const auto held = s.held_index();

  if (held && *held != target) return hold_still(false);

  switch (task.family) {
    case TaskFamily::lift:
    case TaskFamily::place: {
      if (held) {
        if (task.family == TaskFamily::lift) return move_toward(g, g.x, g.y, kLiftTargetZ, true);
        const Object& bin = s.objects[s.index_of(ObjectKind::bin)];
        if (auto a = approach_from_above(g, bin.x, bin.y, true)) return *a;
        return hold_still(false);
      }
      if (g.closed) return hold_still(false);
      if (auto a = approach_from_above(g, o.x, o.y, false)) return *a;
      if (g.z > o.top() + kAlignTolerance) return move_toward(g, o.x, o.y, o.top(), false);
      return hold_still(true);
    }
    case TaskFamily::press: {
      if (g.closed) return hold_still(false);
      if (auto a = approach_from_above(g, o.x, o.y, false)) return *a;
      return move_toward(g, o.x, o.y, 0.0, false);
    }
    case TaskFamily::push:
      if (g.closed) return hold_still(false);
      return push_along_x(g, o, -1.0);
    case TaskFamily::slide:
      if (g.closed) return hold_still(false);
      return push_along_x(g, o, task.direction == Direction::right ? 1.0 : -1.0);
  }
  return hold_still(false);
}

const ParaphraseBank& default_bank() {
  static const ParaphraseBank bank = {
      {TaskFamily::lift,
       {"lift the {obj}", "pick up the {obj}", "raise the {obj}", "grab and hold the {obj}", "grasp the {obj} and lift it",
        "take the {obj} off the table", "hold the {obj} up", "pick the {obj} up", "lift up the {obj}",
        "grab the {obj} and raise it", "get the {obj} off the table"}},
      {TaskFamily::push,
       {"push the {obj} to the left", "nudge the {obj} to the left", "move the {obj} left", "shove the {obj} to the left",
        "push the {obj} leftward", "sweep the {obj} to the left", "push left the {obj}", "move the {obj} to the left side",
        "give the {obj} a push to the left", "slide the {obj} over to the left", "push the {obj} left"}},
      {TaskFamily::press,
       {"press the button", "push the button", "push down the button", "hit the button", "tap the button",
        "press down on the button", "activate the button", "click the button", "depress the button", "touch the button",
        "press the button down"}},
      {TaskFamily::place,
       {"place the {obj} in the bin", "put the {obj} in the bin", "drop the {obj} into the bin",
        "store the {obj} in the bin", "release the {obj} into the bin", "move the {obj} to the bin",
        "put the {obj} into the bin", "deposit the {obj} in the bin", "set the {obj} in the bin",
        "place the {obj} inside the bin", "drop the {obj} in the bin"}},
      {TaskFamily::slide,
       {"slide the slider to the {dir}", "move the slider to the {dir}", "push the slider to the {dir}",
        "shift the slider {dir}", "slide the slider {dir}", "drag the slider to the {dir}", "move the slider {dir}",
        "push the slider {dir}", "slide the knob to the {dir}", "move the knob to the {dir}",
        "shift the knob to the {dir}"}},
  };
  return bank;
}

std::string canonical_instruction(const TaskSpec& task) {
  const auto& entries = default_bank().at(task.family);
  return fill_slots(entries.front(), task);
}

std::string paraphrase_instruction(const TaskSpec& task, Rng& rng, const ParaphraseBank& bank) {
  const auto it = bank.find(task.family);
  if (it == bank.end() || it->second.empty()) throw BankError("paraphrase bank has no entries for " + to_string(task.family));
  return fill_slots(it->second[rng.index(it->second.size())], task);
}

std::vector<std::string> instruction_words(const ParaphraseBank& bank) {
  std::set<std::string> words = {"tall", "short", "red", "green", "blue", "yellow", "block", "left", "right"};
  for (const auto& [family, templates] : bank) {
    for (const std::string& text : templates) {
      std::istringstream in(text);
      for (std::string w; in >> w;)
        if (w.front() != '{') words.insert(w);
    }
  }
  return {words.begin(), words.end()};
}

std::optional<int> run_expert(WorldState& state, const TaskSpec& task, int horizon) {
  const WorldState start = state;
  for (int step = 1; step <= horizon; ++step) {
    state = step_env(state, expert_action(state, task));
    if (task_success(state, start, task)) return step;
  }
  return std::nullopt;
}

ChainSpec sample_chain(std::uint64_t seed, Palette palette, const ChainOptions& options) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng(Rng::mix(seed, 0xc4a1 + attempt));
    WorldState s = make_env(seed, palette, options.scene);
    ChainSpec chain{seed, palette, options.scene, {}};
    bool ok = true;
    for (int i = 0; i < kChainLength && ok; ++i) {
      std::vector<TaskSpec> candidates = valid_tasks(s, i == 0 ? options.first_families : options.families);
      if (i == 0 && options.depth_critical)
        std::erase_if(candidates, [](const TaskSpec& t) { return t.qualifier == Qualifier::none; });
      if (candidates.empty()) {
        ok = false;
        break;
      }
      TaskSpec task = candidates[rng.index(candidates.size())];
      if (options.enrich) task.instruction = paraphrase_instruction(task, rng);
      if (!run_expert(s, task)) ok = false;
      chain.tasks.push_back(std::move(task));
    }
    if (ok) return chain;
  }
  throw TaskError("could not sample a compatible chain for seed " + std::to_string(seed));
}

}  // namespace rfpx::sim
