#include "rfpx/analysis/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "rfpx/error.hpp"

namespace rfpx::analysis {

namespace {

constexpr double kAvgTolerance = 1e-9;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string palettes_label(const std::vector<sim::Palette>& palettes) {
  std::string out;
  for (sim::Palette p : palettes) out += sim::to_string(p);
  return out;
}

std::vector<sim::Trajectory> training_data(const AblationConfig& cfg) {
  return sim::generate_dataset(cfg.n_train, cfg.data_seed, cfg.train_palettes, cfg.enrich, cfg.dataset);
}

VariantResult train_and_evaluate(const std::string& name, policy::Model model, const AblationConfig& cfg,
                                 const std::vector<sim::Trajectory>& data, const std::vector<sim::ChainSpec>& chains) {
  VariantResult v;
  v.name = name;
  for (const auto& [param, e] : model.params().with_prefix("resampler.")) v.resampler_scalars += e.tensor.numel();
  auto label = [&](SuccessTable t) {
    t.model = name;
    t.train_split = palettes_label(cfg.train_palettes);
    t.test_split = sim::to_string(cfg.test_palette);
    t.enriched = cfg.chains.enrich;
    return t;
  };
  if (cfg.evaluate_before_training) v.before = label(aggregate_chain_metrics(evaluate_model(model, chains, cfg.horizon)));
  v.training = training::train_run(data, model, cfg.train);
  v.results = evaluate_model(model, chains, cfg.horizon);
  v.after = label(aggregate_chain_metrics(v.results));
  return v;
}

}  // namespace

void SuccessTable::validate() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) throw ContractError("success rate outside [0,1]");
    if (i > 0 && rates[i] > rates[i - 1]) throw ContractError("success rates must be non-increasing");
    sum += rates[i];
  }
  if (std::abs(sum - avg) > kAvgTolerance) throw ContractError("avg does not equal the sum of rates");
}

std::string SuccessTable::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["train"] = train_split;
  j["test"] = test_split;
  j["enriched"] = enriched;
  j["n_chains"] = n_chains;
  j["rates"] = rates;
  j["avg"] = avg;
  return j.dump();
}

SuccessTable SuccessTable::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SuccessTable t;
  t.model = j.at("model").get<std::string>();
  t.train_split = j.at("train").get<std::string>();
  t.test_split = j.at("test").get<std::string>();
  t.enriched = j.at("enriched").get<bool>();
  t.n_chains = j.at("n_chains").get<std::size_t>();
  t.rates = j.at("rates").get<std::array<double, sim::kChainLength>>();
  t.avg = j.at("avg").get<double>();
  return t;
}

SuccessTable aggregate_chain_metrics(const std::vector<sim::ChainResult>& results) {
  if (results.empty()) throw ContractError("aggregate_chain_metrics: no chain results");
  std::array<std::size_t, sim::kChainLength> completed{};
  for (const sim::ChainResult& r : results) {
    for (std::size_t i = 0; i < completed.size() && r.successes[i]; ++i) ++completed[i];
  }
  SuccessTable t;
  t.n_chains = results.size();
  for (std::size_t i = 0; i < completed.size(); ++i) {
    t.rates[i] = static_cast<double>(completed[i]) / static_cast<double>(results.size());
    t.avg += t.rates[i];
  }
  return t;
}

std::vector<sim::ChainSpec> make_eval_chains(std::size_t n, std::uint64_t seed, sim::Palette palette,
                                             const sim::ChainOptions& options) {
  std::vector<sim::ChainSpec> chains;
  chains.reserve(n);
  for (std::size_t i = 0; i < n; ++i) chains.push_back(sim::sample_chain(Rng::mix(seed, i), palette, options));
  return chains;
}

std::vector<sim::ChainResult> evaluate_model(const policy::Model& model, const std::vector<sim::ChainSpec>& chains,
                                             int horizon) {
  policy::ModelPolicy policy(model);
  std::vector<sim::ChainResult> results;
  results.reserve(chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) results.push_back(sim::rollout_chain(policy, chains[i], horizon, i));
  return results;
}

std::vector<DepthMap> depth_frames(const std::vector<sim::Trajectory>& data) {
  std::vector<DepthMap> frames;
  for (const sim::Trajectory& traj : data)
    for (const sim::Step& step : traj.steps) {
      frames.push_back(step.obs.depth_static);
      frames.push_back(step.obs.depth_gripper);
    }
  return frames;
}

SensitivityReport depth_sensitivity_report(const std::vector<std::pair<DepthMap, DepthMap>>& pairs,
                                           const std::vector<std::pair<std::string, DepthStats>>& stats) {
  if (pairs.empty()) throw ContractError("depth_sensitivity_report: no frame pairs");
  SensitivityReport report;
  for (const auto& [label, s] : stats) {
    report.labels.push_back(label);
    std::vector<std::size_t> row;
    for (const auto& [a, b] : pairs)
      row.push_back(pixel_change_count(quantize_u8(normalize_depth(a, s)), quantize_u8(normalize_depth(b, s))));
    report.counts.push_back(std::move(row));
  }
  return report;
}

std::vector<std::pair<DepthMap, DepthMap>> consecutive_pairs(const std::vector<sim::Trajectory>& data,
                                                             std::size_t max_pairs) {
  std::vector<std::pair<DepthMap, DepthMap>> pairs;
  for (const sim::Trajectory& traj : data)
    for (std::size_t t = 1; t < traj.steps.size() && pairs.size() < max_pairs; ++t)
      pairs.emplace_back(traj.steps[t - 1].obs.depth_static, traj.steps[t].obs.depth_static);
  return pairs;
}

std::string config_digest(const AblationConfig& cfg) {
  std::ostringstream s;
  const auto& m = cfg.model;
  s << "d=" << m.encoder.dim << " K=" << m.encoder.latents << " patch=" << m.encoder.patch << " vit=" << m.encoder.vit_depth
    << " L=" << m.decoder_layers << " lstm=" << m.lstm_layers << "x" << m.lstm_width << " clip=" << m.clip_bound
    << " rgb_only=" << m.rgb_only << " seed=" << m.seed;
  const auto& t = cfg.train;
  s << " lambda=" << t.lambda_gripper << " lr=" << t.learning_rate << " betas=" << t.beta1 << "," << t.beta2
    << " clip_norm=" << t.grad_clip << " epochs=" << t.epochs << " batch=" << t.batch_size << " train_seed=" << t.seed;
  s << " n_train=" << cfg.n_train << " data_seed=" << cfg.data_seed << " train=" << palettes_label(cfg.train_palettes)
    << " test=" << sim::to_string(cfg.test_palette) << " chains=" << cfg.n_chains << " chain_seed=" << cfg.chain_seed
    << " scene=" << sim::to_string(cfg.dataset.scene) << " horizon=" << cfg.horizon << " enrich=" << cfg.enrich;
  for (sim::TaskFamily f : cfg.dataset.families) s << " family=" << sim::to_string(f);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(s.str())));
  return hex;
}

AblationReport run_sep_resampler_ablation(const AblationConfig& cfg) {
  const auto data = training_data(cfg);
  const DepthStats stats = compute_stats(depth_frames(data));
  const auto chains = make_eval_chains(cfg.n_chains, cfg.chain_seed, cfg.test_palette, cfg.chains);

  AblationReport report;
  report.name = "sep-resampler";
  report.config_digest = config_digest(cfg);
  for (const sim::ChainSpec& c : chains) report.chain_seeds.push_back(c.seed);
  for (bool separate : {false, true}) {
    policy::ModelConfig mc = cfg.model;
    mc.encoder.separate_resampler = separate;
    report.variants.push_back(
        train_and_evaluate(separate ? "separate" : "shared", policy::Model::init(mc, stats), cfg, data, chains));
  }
  return report;
}

AblationReport run_depth_extremes_ablation(const AblationConfig& cfg, const DepthStats& narrow, const DepthStats& wide) {
  const bool contains = wide.d_min <= narrow.d_min && wide.d_max >= narrow.d_max;
  const bool strict = wide.d_min < narrow.d_min || wide.d_max > narrow.d_max;
  if (!contains || !strict)
    throw ContractError("depth-extremes ablation: wide range [" + std::to_string(wide.d_min) + ", " +
                        std::to_string(wide.d_max) + "] must strictly contain narrow range [" +
                        std::to_string(narrow.d_min) + ", " + std::to_string(narrow.d_max) + "]");
  narrow.validate();
  wide.validate();
  const auto data = training_data(cfg);
  const auto chains = make_eval_chains(cfg.n_chains, cfg.chain_seed, cfg.test_palette, cfg.chains);

  AblationReport report;
  report.name = "depth-extremes";
  report.config_digest = config_digest(cfg);
  for (const sim::ChainSpec& c : chains) report.chain_seeds.push_back(c.seed);
  report.variants.push_back(train_and_evaluate("narrow", policy::Model::init(cfg.model, narrow), cfg, data, chains));
  report.variants.push_back(train_and_evaluate("wide", policy::Model::init(cfg.model, wide), cfg, data, chains));
  report.sensitivity = depth_sensitivity_report(consecutive_pairs(data, 64), {{"narrow", narrow}, {"wide", wide}});
  return report;
}

}  // namespace rfpx::analysis
