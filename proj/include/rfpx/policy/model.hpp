#pragma once

#include <map>
#include <string>
#include <vector>

#include "rfpx/action.hpp"
#include "rfpx/depth/depth_pipeline.hpp"
#include "rfpx/encoders/encoders.hpp"
#include "rfpx/fusion/decoder.hpp"
#include "rfpx/numerics/param_set.hpp"
#include "rfpx/sim/render.hpp"
#include "rfpx/sim/rollout.hpp"

namespace rfpx::policy {

inline constexpr std::size_t kPoseDims = 6;

struct ModelConfig {
  encoders::EncoderConfig encoder;
  std::size_t decoder_layers = 2;
  std::size_t lstm_layers = 2;
  std::size_t lstm_width = 64;
  double clip_bound = kDefaultClipBound;
  bool rgb_only = false;  // depth frames replaced by constants before encoding
  std::uint64_t seed = 0;

  /// Throws RangeError naming the first non-positive dimension.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Per-layer LSTM state, each 1×width.
struct HiddenState {
  std::vector<Tensor> h, c;
};

struct LstmLayer {
  Tensor w;  // (in + width) × 4·width, gate order i, f, g, o
  Tensor b;  // 1 × 4·width
};

struct HeadParams {
  std::vector<LstmLayer> lstm;
  Tensor pose_w1, pose_b1, pose_w2, pose_b2;
  Tensor grip_w1, grip_b1, grip_w2, grip_b2;

  static HeadParams from(const ParamSet& params);
};

/// Adds trainable "head.lstm.<i>.{w,b}", "head.pose.*" and "head.gripper.*".
void init_head(ParamSet& params, const ModelConfig& cfg, Rng& rng);

/// Column-wise max over tokens (1×d).
Tensor maxpool_tokens(const Tensor& tokens);

HiddenState reset_hidden(const ModelConfig& cfg);

/// One step of the stacked LSTM; x is 1×in.
HiddenState lstm_step(const Tensor& x, const HiddenState& prev, const std::vector<LstmLayer>& layers);

struct HeadOutput {
  Tensor pose;    // 1×6, clip·tanh(MLP)
  Tensor logit;   // 1×1, raw gripper logit
};

HeadOutput action_heads(const Tensor& h_top, const HeadParams& head, double clip_bound);

/// Gripper command from a logit: closed iff sigmoid(logit) > 0.5, so a logit
/// of exactly 0 means open.
bool gripper_closed(double logit);

/// Text plus its token ids and frozen embedding.
struct Instruction {
  std::string text;
  std::vector<std::size_t> ids;
  Tensor embedded;  // M×d
};

/// Frozen-ViT tokens of the two RGB frames and the two preprocessed depth
/// frames. Constant with respect to every trainable parameter, so training
/// may compute them once per observation.
struct VisualTokens {
  encoders::TokenSequence rgb;
  encoders::TokenSequence depth;
};

struct StepOutput {
  Action action;
  HeadOutput head;
  HiddenState next;
};

/// Parameters, vocabulary and depth statistics of one policy.
class Model {
 public:
  static Model init(const ModelConfig& cfg, const DepthStats& stats);
  Model(ModelConfig cfg, ParamSet params, fusion::Vocabulary vocab, DepthStats stats);

  const ModelConfig& config() const { return cfg_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const fusion::Vocabulary& vocabulary() const { return vocab_; }
  const DepthStats& depth_stats() const { return stats_; }

  Instruction instruction(const std::string& text) const;
  VisualTokens encode_frames(const sim::Observation& obs) const;
  /// Everything after the frozen ViT: resampler → fusion → decoder → head.
  StepOutput step_from_tokens(const VisualTokens& tokens, const Instruction& instr, const HiddenState& prev) const;

 private:
  ModelConfig cfg_;
  ParamSet params_;
  fusion::Vocabulary vocab_;
  DepthStats stats_;
};

/// Full pipeline for one timestep: depth preprocessing, encoders, fusion
/// decoder, max-pool, LSTM and heads. Errors carry the failing stage's tag.
StepOutput policy_step(const sim::Observation& obs, const Instruction& instr, const HiddenState& prev, const Model& model);

/// Closed-loop policy around a model; resets its hidden state per chain.
class ModelPolicy : public sim::Policy {
 public:
  explicit ModelPolicy(const Model& model) : model_(model), hidden_(reset_hidden(model.config())) {}
  void reset() override { hidden_ = reset_hidden(model_.config()); }
  Action act(const sim::Observation& obs, const std::string& instruction) override;

 private:
  const Model& model_;
  HiddenState hidden_;
  std::map<std::string, Instruction> instructions_;
};

}  // namespace rfpx::policy
