#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rfpx/action.hpp"
#include "rfpx/rng.hpp"
#include "rfpx/sim/render.hpp"
#include "rfpx/sim/tasks.hpp"

namespace rfpx::sim {

/// Anything that maps observations and an instruction to actions. Policies
/// never see the WorldState.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Called once at the start of every chain.
  virtual void reset() = 0;
  virtual Action act(const Observation& obs, const std::string& instruction) = 0;
};

/// Uniform random pose commands and coin-flip gripper commands.
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed), rng_(seed) {}
  void reset() override {}
  Action act(const Observation& obs, const std::string& instruction) override;

 private:
  std::uint64_t seed_;
  Rng rng_;
};

struct ChainResult {
  std::size_t chain_id = 0;
  std::uint64_t seed = 0;
  Palette palette = Palette::A;
  std::array<bool, kChainLength> successes{};

  /// {"chain_id":..,"seed":..,"palette":"D","successes":[..]}
  std::string to_json_line() const;
  bool operator==(const ChainResult&) const = default;
};

/// Executes the chain's tasks in order from its reset state; task i is only
/// attempted if every earlier task succeeded within max_steps.
ChainResult rollout_chain(Policy& policy, const ChainSpec& chain, int max_steps = kDefaultHorizon,
                          std::size_t chain_id = 0);

/// Same protocol driven by the privileged expert.
ChainResult rollout_chain_expert(const ChainSpec& chain, int max_steps = kDefaultHorizon, std::size_t chain_id = 0);

}  // namespace rfpx::sim
