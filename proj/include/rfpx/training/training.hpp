#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rfpx/numerics/grad_check.hpp"
#include "rfpx/policy/model.hpp"
#include "rfpx/sim/dataset.hpp"

namespace rfpx::training {

struct TrainConfig {
  double lambda_gripper = 1.0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables
  std::size_t epochs = 30;
  std::size_t batch_size = 1;  // trajectories per update
  std::uint64_t seed = 0;

  /// RangeError for negative λ or learning rate, decays outside [0,1). A zero
  /// learning rate is allowed and freezes the model.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossTerms {
  Tensor total;  // mse + λ·bce
  Tensor mse;    // Σ_t mean over pose dims
  Tensor bce;    // Σ_t logit-form BCE
};

/// Gripper label used for the BCE target: 1 for a closed command.
double gripper_label(const Action& a);

LossTerms imitation_loss(const std::vector<policy::HeadOutput>& predictions, const std::vector<Action>& demo, double lambda);

/// Resamplers, per-layer cross-attention (W_Q, W_K, W_V, α, cross-MLP) and
/// the policy head. Shares storage with the model.
ParamSet trainable_parameter_set(const policy::Model& model);

struct AdamState {
  std::size_t step = 0;
  std::map<std::string, std::vector<double>> m, v;
};

/// Rescales gradients so their global norm is at most max_norm; returns the
/// norm before scaling.
double clip_gradients(const ParamSet& trainable, double max_norm);

/// Bias-corrected Adam update of every trainable entry from its current
/// gradient. A non-finite gradient raises DivergedTrainingError.
void adaptive_gradient_step(const ParamSet& trainable, AdamState& state, const TrainConfig& cfg);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0, mse = 0.0, bce = 0.0;  // means over trajectories
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
};

/// Teacher-forced behavior cloning: each epoch visits trajectories in a
/// seed-fixed shuffle, unrolls the policy from a reset hidden state, and
/// steps the optimizer once per batch. `on_epoch` runs after every epoch.
TrainReport train_run(const std::vector<sim::Trajectory>& data, policy::Model& model, const TrainConfig& cfg,
                      const std::function<void(const EpochReport&)>& on_epoch = {});

/// Small model with two decoder layers used by the end-to-end gradient check.
policy::ModelConfig gradcheck_model_config(std::uint64_t seed);

/// Central-difference check of the imitation loss over every trainable entry,
/// through the whole per-step pipeline (depth preprocessing, frozen ViT,
/// resampler, decoder, LSTM, heads) on a 2-step synthetic trajectory. Gates
/// start at random non-zero values so the cross-attention branches contribute.
GradCheckReport full_model_gradcheck(std::uint64_t seed, double eps = 1e-6);

}  // namespace rfpx::training
