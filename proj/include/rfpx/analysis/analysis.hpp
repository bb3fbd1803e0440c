#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "rfpx/depth/depth_pipeline.hpp"
#include "rfpx/policy/model.hpp"
#include "rfpx/sim/dataset.hpp"
#include "rfpx/sim/rollout.hpp"
#include "rfpx/training/training.hpp"

namespace rfpx::analysis {

struct SuccessTable {
  std::array<double, sim::kChainLength> rates{};
  double avg = 0.0;
  std::size_t n_chains = 0;
  std::string model;
  std::string train_split;
  std::string test_split;
  bool enriched = false;

  /// Throws ContractError unless rates are in [0,1], non-increasing, and
  /// avg equals their sum within 1e-9.
  void validate() const;
  std::string to_json() const;
  static SuccessTable from_json(const std::string& text);
  bool operator==(const SuccessTable&) const = default;
};

/// rate[i] = fraction of chains whose first i+1 tasks all succeeded;
/// avg = Σ rates (mean completed-prefix length).
SuccessTable aggregate_chain_metrics(const std::vector<sim::ChainResult>& results);

/// Evaluation chains i = 0..n−1 with seeds mix(seed, i).
std::vector<sim::ChainSpec> make_eval_chains(std::size_t n, std::uint64_t seed, sim::Palette palette,
                                             const sim::ChainOptions& options = {});

/// Rolls every chain out with the model's policy, in chain order.
std::vector<sim::ChainResult> evaluate_model(const policy::Model& model, const std::vector<sim::ChainSpec>& chains,
                                             int horizon = sim::kDefaultHorizon);

/// Depth maps of every step of every trajectory (static and gripper camera).
std::vector<DepthMap> depth_frames(const std::vector<sim::Trajectory>& data);

struct SensitivityReport {
  std::vector<std::string> labels;               // one per stats entry
  std::vector<std::vector<std::size_t>> counts;  // counts[stats][pair]
};

/// normalize → quantize → count changed pixels, for each stats and each pair.
SensitivityReport depth_sensitivity_report(const std::vector<std::pair<DepthMap, DepthMap>>& pairs,
                                           const std::vector<std::pair<std::string, DepthStats>>& stats);

/// Consecutive static-camera frame pairs from a dataset's trajectories.
std::vector<std::pair<DepthMap, DepthMap>> consecutive_pairs(const std::vector<sim::Trajectory>& data,
                                                             std::size_t max_pairs);

struct AblationConfig {
  policy::ModelConfig model;
  training::TrainConfig train;
  std::size_t n_train = 200;
  std::uint64_t data_seed = 1;
  std::vector<sim::Palette> train_palettes{sim::Palette::A, sim::Palette::B, sim::Palette::C};
  sim::DatasetOptions dataset;
  bool enrich = false;
  sim::Palette test_palette = sim::Palette::D;
  std::size_t n_chains = 200;
  std::uint64_t chain_seed = 1000;
  sim::ChainOptions chains;
  int horizon = sim::kDefaultHorizon;
  bool evaluate_before_training = true;
};

struct VariantResult {
  std::string name;
  SuccessTable before;  // evaluated at initialization (n_chains = 0 when skipped)
  SuccessTable after;
  std::vector<sim::ChainResult> results;
  std::size_t resampler_scalars = 0;
  training::TrainReport training;
};

struct AblationReport {
  std::string name;
  std::vector<VariantResult> variants;
  std::vector<std::uint64_t> chain_seeds;  // shared by every variant
  std::string config_digest;
  SensitivityReport sensitivity;  // depth-extremes only
};

/// Hex digest of the ablation's configuration.
std::string config_digest(const AblationConfig& cfg);

/// Shared vs separate resamplers from identical initialization and data order.
AblationReport run_sep_resampler_ablation(const AblationConfig& cfg);

/// Two otherwise identical models whose depth pipelines use `narrow` and
/// `wide`; the wide range must strictly contain the narrow one.
AblationReport run_depth_extremes_ablation(const AblationConfig& cfg, const DepthStats& narrow, const DepthStats& wide);

}  // namespace rfpx::analysis
