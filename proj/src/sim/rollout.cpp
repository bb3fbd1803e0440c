#include "rfpx/sim/rollout.hpp"

#include <nlohmann/json.hpp>

namespace rfpx::sim {

namespace {

template <typename ActFn>
ChainResult run_chain(const ChainSpec& chain, int max_steps, std::size_t chain_id, ActFn&& act) {
  ChainResult result;
  result.chain_id = chain_id;
  result.seed = chain.seed;
  result.palette = chain.palette;
  WorldState state = make_env(chain.seed, chain.palette, chain.scene);
  for (std::size_t k = 0; k < chain.tasks.size(); ++k) {
    const TaskSpec& task = chain.tasks[k];
    const WorldState start = state;
    bool done = false;
    for (int t = 0; t < max_steps && !done; ++t) {
      state = step_env(state, act(state, task));
      done = task_success(state, start, task);
    }
    result.successes[k] = done;
    if (!done) break;
  }
  return result;
}

}  // namespace

Action RandomPolicy::act(const Observation&, const std::string&) {
  Action a;
  for (int i = 0; i < 3; ++i) a.pose[i] = rng_.uniform(-kDefaultClipBound, kDefaultClipBound);
  a.gripper_closed = rng_.uniform() < 0.5;
  return a;
}

std::string ChainResult::to_json_line() const {
  nlohmann::ordered_json j;
  j["chain_id"] = chain_id;
  j["seed"] = seed;
  j["palette"] = to_string(palette);
  j["successes"] = successes;
  return j.dump();
}

ChainResult rollout_chain(Policy& policy, const ChainSpec& chain, int max_steps, std::size_t chain_id) {
  policy.reset();
  return run_chain(chain, max_steps, chain_id, [&](const WorldState& state, const TaskSpec& task) {
    return policy.act(render_observation(state), task.instruction);
  });
}

ChainResult rollout_chain_expert(const ChainSpec& chain, int max_steps, std::size_t chain_id) {
  return run_chain(chain, max_steps, chain_id, [](const WorldState& state, const TaskSpec& task) {
    return expert_action(state, task);
  });
}

}  // namespace rfpx::sim
