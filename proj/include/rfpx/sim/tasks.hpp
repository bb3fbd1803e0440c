#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rfpx/action.hpp"
#include "rfpx/rng.hpp"
#include "rfpx/sim/world.hpp"

namespace rfpx::sim {

enum class TaskFamily { lift, push, press, place, slide };
enum class Qualifier { none, tall, short_ };
enum class Direction { left, right };

inline constexpr TaskFamily kAllFamilies[] = {TaskFamily::lift, TaskFamily::push, TaskFamily::press,
                                              TaskFamily::place, TaskFamily::slide};
inline constexpr int kChainLength = 5;
inline constexpr int kDefaultHorizon = 64;

std::string to_string(TaskFamily family);
TaskFamily family_from_string(const std::string& text);

struct TaskSpec {
  TaskFamily family = TaskFamily::lift;
  ColorName color = ColorName::none;  // block tasks only
  Qualifier qualifier = Qualifier::none;
  Direction direction = Direction::left;  // push is always left; slide uses both
  std::string instruction;
  std::string predicate;  // success predicate id, e.g. "lift_held_high"

  bool operator==(const TaskSpec&) const = default;
};

/// Object index a task refers to. Block descriptors resolve by color, with
/// tall/short picking the taller/shorter of same-color blocks; fixture tasks
/// resolve to their fixture. Throws TaskError when nothing matches.
std::size_t resolve_target(const WorldState& state, const TaskSpec& task);

/// Φ: success of `task` in `now`, given the state at which the task began.
bool task_success(const WorldState& now, const WorldState& start, const TaskSpec& task);

/// Every task that is physically attemptable from `state` and not already
/// satisfied, restricted to the given families. Order is deterministic.
std::vector<TaskSpec> valid_tasks(const WorldState& state, const std::set<TaskFamily>& families);

/// Scripted proportional controller toward the family's current waypoint.
/// Throws TaskError when the descriptor cannot be resolved.
Action expert_action(const WorldState& state, const TaskSpec& task);

// ---- language -------------------------------------------------------------

/// Instruction templates per family; "{obj}" and "{dir}" are slots.
using ParaphraseBank = std::map<TaskFamily, std::vector<std::string>>;

const ParaphraseBank& default_bank();

/// The family's first template with slots filled.
std::string canonical_instruction(const TaskSpec& task);

/// Uniform draw from the bank entries for the task's family.
std::string paraphrase_instruction(const TaskSpec& task, Rng& rng, const ParaphraseBank& bank = default_bank());

/// Every word any instruction can contain, sorted.
std::vector<std::string> instruction_words(const ParaphraseBank& bank = default_bank());

// ---- chains ---------------------------------------------------------------

struct ChainOptions {
  SceneKind scene = SceneKind::standard;
  std::set<TaskFamily> first_families{std::begin(kAllFamilies), std::end(kAllFamilies)};
  std::set<TaskFamily> families{std::begin(kAllFamilies), std::end(kAllFamilies)};
  bool enrich = false;  // paraphrased instead of canonical instructions
  bool depth_critical = false;  // first task targets the same-color pair (tall_short scenes)
};

struct ChainSpec {
  std::uint64_t seed = 0;
  Palette palette = Palette::A;
  SceneKind scene = SceneKind::standard;
  std::vector<TaskSpec> tasks;  // exactly kChainLength

  bool operator==(const ChainSpec&) const = default;
};

/// Samples a chain by drawing each next task uniformly among the tasks valid
/// in the state the expert leaves behind, so consecutive tasks are always
/// physically compatible.
ChainSpec sample_chain(std::uint64_t seed, Palette palette, const ChainOptions& options = {});

/// Runs the expert on one task until Φ holds or the horizon runs out.
/// Returns the number of steps used, or nullopt on failure.
std::optional<int> run_expert(WorldState& state, const TaskSpec& task, int horizon = kDefaultHorizon);

}  // namespace rfpx::sim
