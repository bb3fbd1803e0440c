#include "rfpx/sim/dataset.hpp"

#include "rfpx/error.hpp"
#include "rfpx/rng.hpp"

namespace rfpx::sim {

std::vector<Trajectory> generate_dataset(std::size_t n, std::uint64_t base_seed, const std::vector<Palette>& palettes,
                                         bool enrich, const DatasetOptions& options) {
  if (n == 0) throw ContractError("generate_dataset: n must be at least 1");
  if (palettes.empty()) throw ContractError("generate_dataset: no palettes requested");
  if (options.families.empty()) throw ContractError("generate_dataset: no task families requested");

  ChainOptions chain_options;
  chain_options.scene = options.scene;
  chain_options.enrich = enrich;
  chain_options.depth_critical = options.depth_critical;
  // Place cannot start a chain (nothing is held at reset).
  std::set<TaskFamily> startable = options.families;
  startable.erase(TaskFamily::place);
  if (!startable.empty()) chain_options.first_families = startable;

  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = Rng::mix(base_seed, i);
    const Palette palette = palettes[i % palettes.size()];
    const ChainSpec chain = sample_chain(seed, palette, chain_options);

    WorldState state = make_env(seed, palette, options.scene);
    std::size_t k = 0;
    while (k < chain.tasks.size() && !options.families.count(chain.tasks[k].family)) {
      if (!run_expert(state, chain.tasks[k])) throw TaskError("expert failed while replaying chain prefix");
      ++k;
    }
    if (k == chain.tasks.size()) throw TaskError("sampled chain contains no task of the requested families");

    const TaskSpec& task = chain.tasks[k];
    Trajectory traj;
    traj.instruction = task.instruction;
    traj.family = task.family;
    traj.palette = palette;
    traj.scene = options.scene;
    traj.seed = seed;
    const WorldState start = state;
    for (int t = 0; t < kDefaultHorizon; ++t) {
      Step step{render_observation(state), expert_action(state, task)};
      state = step_env(state, step.action);
      traj.steps.push_back(std::move(step));
      if (task_success(state, start, task)) break;
    }
    if (!task_success(state, start, task)) throw TaskError("expert did not complete a demonstration");
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace rfpx::sim
