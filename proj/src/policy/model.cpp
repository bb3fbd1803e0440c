#include "rfpx/policy/model.hpp"

#include "rfpx/error.hpp"
#include "rfpx/numerics/ops.hpp"

namespace rfpx::policy {

namespace {

enum StreamSalt : std::uint64_t { kVitStream = 1, kResamplerStream = 2, kDecoderStream = 3, kHeadStream = 4 };

template <typename F>
auto tagged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (Error& e) {
    e.add_stage(stage);
    throw;
  }
}

std::string lstm_name(std::size_t i, const char* leaf) { return "head.lstm." + std::to_string(i) + "." + leaf; }

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw RangeError(std::string(name) + " must be positive");
  };
  positive(encoder.image_size, "image_size");
  positive(encoder.patch, "patch");
  positive(encoder.dim, "d");
  positive(encoder.vit_depth, "vit_depth");
  positive(encoder.latents, "K");
  positive(decoder_layers, "L");
  positive(lstm_layers, "lstm_layers");
  positive(lstm_width, "lstm_width");
  if (encoder.image_size % encoder.patch != 0) throw RangeError("image_size must be divisible by patch");
  if (encoder.image_size != static_cast<std::size_t>(sim::kImageSize))
    throw RangeError("image_size must match the simulator's " + std::to_string(sim::kImageSize) + " pixel renders");
  if (!(clip_bound > 0.0)) throw RangeError("clip_bound must be positive");
}

HeadParams HeadParams::from(const ParamSet& p) {
  HeadParams h;
  for (std::size_t i = 0; p.contains(lstm_name(i, "w")); ++i) h.lstm.push_back({p.get(lstm_name(i, "w")), p.get(lstm_name(i, "b"))});
  h.pose_w1 = p.get("head.pose.w1");
  h.pose_b1 = p.get("head.pose.b1");
  h.pose_w2 = p.get("head.pose.w2");
  h.pose_b2 = p.get("head.pose.b2");
  h.grip_w1 = p.get("head.gripper.w1");
  h.grip_b1 = p.get("head.gripper.b1");
  h.grip_w2 = p.get("head.gripper.w2");
  h.grip_b2 = p.get("head.gripper.b2");
  return h;
}

void init_head(ParamSet& params, const ModelConfig& cfg, Rng& rng) {
  using encoders::random_matrix;
  const std::size_t r = cfg.lstm_width;
  for (std::size_t i = 0; i < cfg.lstm_layers; ++i) {
    const std::size_t in = (i == 0 ? cfg.encoder.dim : r) + r;
    params.add(lstm_name(i, "w"), random_matrix(rng, in, 4 * r), true);
    std::vector<double> bias(4 * r, 0.0);
    std::fill(bias.begin() + static_cast<std::ptrdiff_t>(r), bias.begin() + static_cast<std::ptrdiff_t>(2 * r), 1.0);
    params.add(lstm_name(i, "b"), Tensor::row(std::move(bias)), true);
  }
  params.add("head.pose.w1", random_matrix(rng, r, r), true);
  params.add("head.pose.b1", Tensor::zeros({1, r}), true);
  params.add("head.pose.w2", random_matrix(rng, r, kPoseDims, 0.1), true);
  params.add("head.pose.b2", Tensor::zeros({1, kPoseDims}), true);
  params.add("head.gripper.w1", random_matrix(rng, r, r), true);
  params.add("head.gripper.b1", Tensor::zeros({1, r}), true);
  params.add("head.gripper.w2", random_matrix(rng, r, 1, 0.1), true);
  params.add("head.gripper.b2", Tensor::zeros({1, 1}), true);
}

Tensor maxpool_tokens(const Tensor& tokens) {
  if (tokens.rows() == 0) throw ContractError("maxpool_tokens: no tokens");
  return ops::max_rows(tokens);
}

HiddenState reset_hidden(const ModelConfig& cfg) {
  HiddenState s;
  for (std::size_t i = 0; i < cfg.lstm_layers; ++i) {
    s.h.push_back(Tensor::zeros({1, cfg.lstm_width}));
    s.c.push_back(Tensor::zeros({1, cfg.lstm_width}));
  }
  return s;
}

HiddenState lstm_step(const Tensor& x, const HiddenState& prev, const std::vector<LstmLayer>& layers) {
  if (prev.h.size() != layers.size() || prev.c.size() != layers.size())
    throw DimensionError("lstm_step: hidden state has " + std::to_string(prev.h.size()) + " layers but the stack has " +
                         std::to_string(layers.size()));
  HiddenState next;
  Tensor input = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t r = prev.h[i].cols();
    if (input.cols() + r != layers[i].w.rows() || layers[i].w.cols() != 4 * r)
      throw DimensionError("lstm_step: layer " + std::to_string(i) + " weights " + shape_string(layers[i].w.shape()) +
                           " do not fit input " + shape_string(input.shape()) + " and width " + std::to_string(r));
    const Tensor z = ops::add(ops::matmul(ops::concat_cols(input, prev.h[i]), layers[i].w), layers[i].b);
    const Tensor in_gate = ops::sigmoid(ops::slice_cols(z, 0, r));
    const Tensor forget = ops::sigmoid(ops::slice_cols(z, r, 2 * r));
    const Tensor candidate = ops::tanh(ops::slice_cols(z, 2 * r, 3 * r));
    const Tensor out_gate = ops::sigmoid(ops::slice_cols(z, 3 * r, 4 * r));
    const Tensor c = ops::add(ops::mul(forget, prev.c[i]), ops::mul(in_gate, candidate));
    const Tensor h = ops::mul(out_gate, ops::tanh(c));
    next.h.push_back(h);
    next.c.push_back(c);
    input = h;
  }
  return next;
}

HeadOutput action_heads(const Tensor& h_top, const HeadParams& head, double clip_bound) {
  using encoders::mlp;
  const Tensor pose = ops::scale(ops::tanh(mlp(h_top, head.pose_w1, head.pose_b1, head.pose_w2, head.pose_b2)), clip_bound);
  return {pose, mlp(h_top, head.grip_w1, head.grip_b1, head.grip_w2, head.grip_b2)};
}

bool gripper_closed(double logit) { return logit > 0.0; }

Model Model::init(const ModelConfig& cfg, const DepthStats& stats) {
  cfg.validate();
  stats.validate();
  fusion::Vocabulary vocab = fusion::Vocabulary::instruction_vocabulary();
  ParamSet params;
  Rng vit_rng(Rng::mix(cfg.seed, kVitStream));
  encoders::init_vit(params, cfg.encoder, vit_rng);
  Rng resampler_rng(Rng::mix(cfg.seed, kResamplerStream));
  encoders::init_resampler(params, cfg.encoder, resampler_rng);
  Rng decoder_rng(Rng::mix(cfg.seed, kDecoderStream));
  fusion::init_decoder(params, {cfg.encoder.dim, cfg.decoder_layers}, vocab.size(), decoder_rng);
  Rng head_rng(Rng::mix(cfg.seed, kHeadStream));
  init_head(params, cfg, head_rng);
  return Model(cfg, std::move(params), std::move(vocab), stats);
}

Model::Model(ModelConfig cfg, ParamSet params, fusion::Vocabulary vocab, DepthStats stats)
    : cfg_(std::move(cfg)), params_(std::move(params)), vocab_(std::move(vocab)), stats_(stats) {}

Instruction Model::instruction(const std::string& text) const {
  return tagged("fusion_decoder", [&] {
    Instruction instr;
    instr.text = text;
    instr.ids = vocab_.tokenize(text);
    instr.embedded = fusion::embed_instruction(instr.ids, params_.get("decoder.embedding"));
    return instr;
  });
}

VisualTokens Model::encode_frames(const sim::Observation& obs) const {
  const std::size_t n = cfg_.encoder.image_size;
  auto depth_image = [&](const DepthMap& d) {
    if (cfg_.rgb_only) return ThreeChannelImage(n, n, 0.0);
    return preprocess_depth(d, stats_).image;
  };
  const ThreeChannelImage depth_static = tagged("depth_pipeline", [&] { return depth_image(obs.depth_static); });
  const ThreeChannelImage depth_gripper = tagged("depth_pipeline", [&] { return depth_image(obs.depth_gripper); });
  return tagged("encoders", [&] {
    encoders::validate_rgb(obs.rgb_static);
    encoders::validate_rgb(obs.rgb_gripper);
    const encoders::VitParams vit = encoders::VitParams::from(params_, cfg_.encoder.patch);
    return VisualTokens{encoders::vit_encode_pair(obs.rgb_static, obs.rgb_gripper, vit),
                        encoders::vit_encode_pair(depth_static, depth_gripper, vit)};
  });
}

StepOutput Model::step_from_tokens(const VisualTokens& tokens, const Instruction& instr, const HiddenState& prev) const {
  const encoders::TokenSequence fused = tagged("encoders", [&] {
    const auto rgb = encoders::resample(tokens.rgb, encoders::ResamplerParams::from(params_, encoders::rgb_resampler_prefix(cfg_.encoder)));
    const auto depth =
        encoders::resample(tokens.depth, encoders::ResamplerParams::from(params_, encoders::depth_resampler_prefix(cfg_.encoder)));
    return encoders::fuse_concat(rgb, depth);
  });
  const Tensor decoded =
      tagged("fusion_decoder", [&] { return fusion::decode(instr.embedded, fused.data, fusion::DecoderStack::from(params_)); });
  return tagged("policy_head", [&] {
    const HeadParams head = HeadParams::from(params_);
    StepOutput out;
    out.next = lstm_step(maxpool_tokens(decoded), prev, head.lstm);
    out.head = action_heads(out.next.h.back(), head, cfg_.clip_bound);
    for (std::size_t i = 0; i < kPoseDims; ++i) out.action.pose[i] = out.head.pose.at(0, i);
    out.action.gripper_closed = gripper_closed(out.head.logit.item());
    return out;
  });
}

StepOutput policy_step(const sim::Observation& obs, const Instruction& instr, const HiddenState& prev, const Model& model) {
  return model.step_from_tokens(model.encode_frames(obs), instr, prev);
}

Action ModelPolicy::act(const sim::Observation& obs, const std::string& instruction) {
  auto it = instructions_.find(instruction);
  if (it == instructions_.end()) it = instructions_.emplace(instruction, model_.instruction(instruction)).first;
  const NoGradGuard no_grad;
  StepOutput out = policy_step(obs, it->second, hidden_, model_);
  hidden_ = std::move(out.next);
  return out.action;
}

}  // namespace rfpx::policy
