#include "rfpx/training/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "rfpx/error.hpp"
#include "rfpx/numerics/grad_check.hpp"
#include "rfpx/numerics/ops.hpp"

namespace rfpx::training {

void TrainConfig::validate() const {
  if (!(lambda_gripper >= 0.0)) throw RangeError("lambda_gripper must be >= 0");
  if (!(learning_rate >= 0.0)) throw RangeError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw RangeError("adam decays must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw RangeError("adam_eps must be positive");
  if (!(grad_clip >= 0.0)) throw RangeError("grad_clip must be >= 0");
  if (batch_size == 0) throw RangeError("batch_size must be positive");
}

double gripper_label(const Action& a) { return a.gripper_closed ? 1.0 : 0.0; }

LossTerms imitation_loss(const std::vector<policy::HeadOutput>& predictions, const std::vector<Action>& demo, double lambda) {
  if (predictions.size() != demo.size())
    throw ContractError("imitation_loss: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(demo.size()) + " demonstration steps");
  if (demo.empty()) throw ContractError("imitation_loss: empty sequence");
  std::vector<Tensor> mse_terms, bce_terms;
  for (std::size_t t = 0; t < demo.size(); ++t) {
    const Tensor target = Tensor::row({demo[t].pose.begin(), demo[t].pose.end()});
    mse_terms.push_back(ops::mse(predictions[t].pose, target));
    bce_terms.push_back(ops::bce_with_logits(predictions[t].logit, Tensor::scalar(gripper_label(demo[t]))));
  }
  const Tensor mse = ops::sum(ops::concat_rows(mse_terms));
  const Tensor bce = ops::sum(ops::concat_rows(bce_terms));
  return {ops::add(mse, ops::scale(bce, lambda)), mse, bce};
}

ParamSet trainable_parameter_set(const policy::Model& model) { return model.params().trainable_view(); }

double clip_gradients(const ParamSet& trainable, double max_norm) {
  long double sq = 0.0L;
  for (const auto& [name, e] : trainable)
    if (e.tensor.has_grad())
      for (double g : e.tensor.grad()) sq += static_cast<long double>(g) * g;
  const double norm = std::sqrt(static_cast<double>(sq));
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& [name, e] : trainable) {
      Tensor t = e.tensor;
      if (t.has_grad())
        for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void adaptive_gradient_step(const ParamSet& trainable, AdamState& state, const TrainConfig& cfg) {
  for (const auto& [name, e] : trainable) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad())
      if (!std::isfinite(g)) throw DivergedTrainingError("non-finite gradient in " + name);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, e] : trainable) {
    if (!e.trainable || !e.tensor.has_grad()) continue;
    Tensor t = e.tensor;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(t.numel(), 0.0);
      v.assign(t.numel(), 0.0);
    }
    const auto grad = t.grad();
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      values[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
    }
  }
}

TrainReport train_run(const std::vector<sim::Trajectory>& data, policy::Model& model, const TrainConfig& cfg,
                      const std::function<void(const EpochReport&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ContractError("train_run: empty dataset");
  TrainReport report;
  if (cfg.epochs == 0) return report;

  // Frozen-ViT features never change during training; encode each frame once.
  struct Prepared {
    std::vector<policy::VisualTokens> tokens;
    std::vector<Action> actions;
    policy::Instruction instruction;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(data.size());
  for (const sim::Trajectory& traj : data) {
    if (traj.steps.empty()) throw ContractError("train_run: trajectory without steps");
    Prepared p{{}, {}, model.instruction(traj.instruction)};
    for (const sim::Step& step : traj.steps) {
      p.tokens.push_back(model.encode_frames(step.obs));
      p.actions.push_back(step.action);
    }
    prepared.push_back(std::move(p));
  }

  ParamSet trainable = trainable_parameter_set(model);
  AdamState adam;
  Rng rng(Rng::mix(cfg.seed, 0x7a1));
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    long double loss_sum = 0.0L, mse_sum = 0.0L, bce_sum = 0.0L;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      trainable.zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const Prepared& p = prepared[order[b]];
        policy::HiddenState hidden = policy::reset_hidden(model.config());
        std::vector<policy::HeadOutput> outputs;
        for (const policy::VisualTokens& tokens : p.tokens) {
          policy::StepOutput out = model.step_from_tokens(tokens, p.instruction, hidden);
          outputs.push_back(out.head);
          hidden = std::move(out.next);
        }
        const LossTerms terms = imitation_loss(outputs, p.actions, cfg.lambda_gripper);
        const double loss = terms.total.item();
        if (!std::isfinite(loss))
          throw DivergedTrainingError("loss became non-finite in epoch " + std::to_string(epoch));
        loss_sum += loss;
        mse_sum += terms.mse.item();
        bce_sum += terms.bce.item();
        const Tensor scaled = end - begin == 1 ? terms.total : ops::scale(terms.total, 1.0 / static_cast<double>(end - begin));
        backward(scaled);
      }
      clip_gradients(trainable, cfg.grad_clip);
      try {
        adaptive_gradient_step(trainable, adam, cfg);
      } catch (DivergedTrainingError& e) {
        e.add_stage("epoch " + std::to_string(epoch));
        throw;
      }
    }
    const double n = static_cast<double>(prepared.size());
    EpochReport row;
    row.epoch = epoch;
    row.loss = static_cast<double>(loss_sum) / n;
    row.mse = static_cast<double>(mse_sum) / n;
    row.bce = static_cast<double>(bce_sum) / n;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return report;
}

policy::ModelConfig gradcheck_model_config(std::uint64_t seed) {
  policy::ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.latents = 2;
  cfg.encoder.vit_depth = 1;
  cfg.decoder_layers = 2;
  cfg.lstm_layers = 2;
  cfg.lstm_width = 6;
  cfg.seed = seed;
  return cfg;
}

GradCheckReport full_model_gradcheck(std::uint64_t seed, double eps) {
  Rng rng(Rng::mix(seed, 0x9c));
  policy::Model model = policy::Model::init(gradcheck_model_config(seed), DepthStats{0.0, 1.2, 0.7, 0.3});
  for (const auto& name : model.params().names())
    if (name.ends_with(".alpha")) {
      Tensor alpha = model.params().get(name);
      alpha.mutable_values()[0] = rng.uniform(-1.0, 1.0);
    }

  auto frame = [&] {
    ThreeChannelImage img(32, 32);
    for (double& v : img.data) v = rng.uniform();
    return img;
  };
  auto depth = [&] {
    std::vector<double> v(32 * 32);
    for (double& x : v) x = rng.uniform(0.05, 1.2);
    return DepthMap(32, 32, std::move(v));
  };
  std::vector<sim::Observation> obs;
  std::vector<Action> demo;
  for (int t = 0; t < 2; ++t) {
    obs.push_back(sim::Observation{frame(), frame(), depth(), depth()});
    Action a;
    for (double& p : a.pose) p = rng.uniform(-0.1, 0.1);
    a.gripper_closed = t == 1;
    demo.push_back(a);
  }
  const policy::Instruction instr = model.instruction("lift the red block");

  ParamSet trainable = trainable_parameter_set(model);
  return grad_check(
      [&](const ParamSet&) {
        std::vector<policy::HeadOutput> heads;
        policy::HiddenState h = policy::reset_hidden(model.config());
        for (const sim::Observation& o : obs) {
          policy::StepOutput out = policy::policy_step(o, instr, h, model);
          heads.push_back(out.head);
          h = out.next;
        }
        return imitation_loss(heads, demo, 1.0).total;
      },
      trainable, eps);
}

}  // namespace rfpx::training
