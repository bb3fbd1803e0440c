#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rfpx/action.hpp"
#include "rfpx/sim/render.hpp"
#include "rfpx/sim/tasks.hpp"

namespace rfpx::sim {

struct Step {
  Observation obs;
  Action action;
};

/// One expert demonstration of a single instructed task.
struct Trajectory {
  std::string instruction;
  TaskFamily family = TaskFamily::lift;
  Palette palette = Palette::A;
  SceneKind scene = SceneKind::standard;
  std::uint64_t seed = 0;
  std::vector<Step> steps;
};

struct DatasetOptions {
  std::set<TaskFamily> families{std::begin(kAllFamilies), std::end(kAllFamilies)};
  SceneKind scene = SceneKind::standard;
  bool depth_critical = false;
};

/// n expert rollouts. Trajectory i uses seed mix(base_seed, i) and palette
/// palettes[i mod |palettes|]; its task is the first task of a sampled chain
/// whose family is requested (tasks before it are executed unrecorded, which
/// is how place demonstrations start with a block in hand).
std::vector<Trajectory> generate_dataset(std::size_t n, std::uint64_t base_seed, const std::vector<Palette>& palettes,
                                         bool enrich, const DatasetOptions& options = {});

}  // namespace rfpx::sim
