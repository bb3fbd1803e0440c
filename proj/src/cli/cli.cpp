#include "rfpx/cli/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <optional>

#include "rfpx/analysis/analysis.hpp"
#include "rfpx/cli/persist.hpp"
#include "rfpx/error.hpp"

namespace rfpx::cli {

namespace {

using json = nlohmann::ordered_json;

struct CommonArgs {
  std::string config;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> chains;
  std::string dataset;
  std::string checkpoint;
};

RunConfig effective_config(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? parse_config_text("") : parse_config_file(args.config);
  if (!args.run_dir.empty()) cfg.paths.run_dir = args.run_dir;
  if (!args.dataset.empty()) cfg.paths.dataset = args.dataset;
  if (!args.checkpoint.empty()) cfg.paths.checkpoint = args.checkpoint;
  if (args.seed) cfg.seed = *args.seed;
  if (args.epochs) cfg.train.epochs = *args.epochs;
  if (args.chains) cfg.eval.n_chains = *args.chains;
  // Reparse so overrides get the same validation and seed propagation.
  return parse_config_text(config_to_json(cfg));
}

fs::path prepare_run_dir(const RunConfig& cfg, const std::string& command) {
  const fs::path dir = resolve_run_dir(cfg);
  fs::create_directories(dir);
  write_file(dir / (command + "_config.json"), config_to_json(cfg));
  return dir;
}

sim::DatasetOptions dataset_options(const RunConfig& cfg) {
  sim::DatasetOptions o;
  o.families = {cfg.data.families.begin(), cfg.data.families.end()};
  o.scene = cfg.data.scene;
  o.depth_critical = cfg.data.depth_critical;
  return o;
}

sim::ChainOptions chain_options(const RunConfig& cfg) {
  sim::ChainOptions o;
  o.first_families = {cfg.eval.first_families.begin(), cfg.eval.first_families.end()};
  o.scene = cfg.data.scene;
  o.depth_critical = cfg.data.depth_critical;
  o.enrich = cfg.data.enrich;
  return o;
}

std::vector<sim::Trajectory> training_data(const RunConfig& cfg) {
  if (!cfg.paths.dataset.empty()) return load_dataset(cfg.paths.dataset);
  return sim::generate_dataset(cfg.data.n_train, cfg.data.seed, cfg.data.palettes, cfg.data.enrich, dataset_options(cfg));
}

DepthStats depth_stats_for(const RunConfig& cfg, const std::vector<sim::Trajectory>& data) {
  const auto frames = analysis::depth_frames(data);
  if (cfg.depth.mode == "fixed") return stats_for_range(frames, cfg.depth.d_min, cfg.depth.d_max);
  return compute_stats(frames);
}

std::string palettes_label(const std::vector<sim::Palette>& ps) {
  std::string s;
  for (auto p : ps) s += sim::to_string(p);
  return s;
}

analysis::SuccessTable labelled(analysis::SuccessTable t, const std::string& model, const RunConfig& cfg) {
  t.model = model;
  t.train_split = palettes_label(cfg.data.palettes);
  t.test_split = sim::to_string(cfg.eval.palette);
  t.enriched = cfg.data.enrich;
  return t;
}

analysis::AblationConfig ablation_config(const RunConfig& cfg) {
  analysis::AblationConfig a;
  a.model = cfg.model;
  a.train = cfg.train;
  a.n_train = cfg.data.n_train;
  a.data_seed = cfg.data.seed;
  a.train_palettes = cfg.data.palettes;
  a.dataset = dataset_options(cfg);
  a.enrich = cfg.data.enrich;
  a.test_palette = cfg.eval.palette;
  a.n_chains = cfg.eval.n_chains;
  a.chain_seed = cfg.eval.chain_seed;
  a.chains = chain_options(cfg);
  a.horizon = cfg.eval.horizon;
  return a;
}

json table_json(const analysis::SuccessTable& t) { return json::parse(t.to_json()); }

json report_json(const analysis::AblationReport& r) {
  json j;
  j["ablation"] = r.name;
  j["config_digest"] = r.config_digest;
  j["chain_seeds"] = r.chain_seeds;
  json variants = json::array();
  for (const auto& v : r.variants) {
    json vj;
    vj["name"] = v.name;
    vj["resampler_scalars"] = v.resampler_scalars;
    vj["before"] = table_json(v.before);
    vj["after"] = table_json(v.after);
    json losses = json::array();
    for (const auto& e : v.training.epochs) losses.push_back(e.loss);
    vj["epoch_loss"] = std::move(losses);
    variants.push_back(std::move(vj));
  }
  j["variants"] = std::move(variants);
  if (!r.sensitivity.labels.empty()) {
    json s;
    for (std::size_t i = 0; i < r.sensitivity.labels.size(); ++i) s[r.sensitivity.labels[i]] = r.sensitivity.counts[i];
    j["sensitivity"] = std::move(s);
  }
  return j;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const CommonArgs& args, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  const fs::path dir = prepare_run_dir(cfg, "gen-data");
  const fs::path target = out_dir.empty() ? dir / "dataset" : fs::path(out_dir);
  const auto data =
      sim::generate_dataset(cfg.data.n_train, cfg.data.seed, cfg.data.palettes, cfg.data.enrich, dataset_options(cfg));
  save_dataset(data, target);
  std::size_t steps = 0;
  for (const auto& t : data) steps += t.steps.size();
  out << "wrote " << data.size() << " trajectories (" << steps << " steps) to " << target.string() << "\n";
  return 0;
}

int cmd_stats(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  const fs::path dir = prepare_run_dir(cfg, "stats");
  const DepthStats stats = depth_stats_for(cfg, training_data(cfg));
  write_file(dir / "depth_stats.json", stats.to_json() + "\n");
  out << stats.to_json() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  const fs::path dir = prepare_run_dir(cfg, "train");
  const auto data = training_data(cfg);
  const DepthStats stats = depth_stats_for(cfg, data);
  policy::Model model = policy::Model::init(cfg.model, stats);
  const auto report = training::train_run(data, model, cfg.train, [&](const training::EpochReport& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %zu loss %.6f mse %.6f bce %.6f (%.1fs)\n", e.epoch, e.loss, e.mse, e.bce,
                  e.seconds);
    out << line << std::flush;
  });
  write_train_metrics(report, dir);
  save_checkpoint(model, dir / "model.ckpt");
  out << "checkpoint: " << (dir / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  if (cfg.paths.checkpoint.empty()) throw ConfigError("eval: --checkpoint (or paths.checkpoint) is required");
  const fs::path dir = prepare_run_dir(cfg, "eval");
  const policy::Model model = load_checkpoint(cfg.paths.checkpoint);
  const auto chains = analysis::make_eval_chains(cfg.eval.n_chains, cfg.eval.chain_seed, cfg.eval.palette, chain_options(cfg));
  const auto results = analysis::evaluate_model(model, chains, cfg.eval.horizon);
  std::string lines;
  for (const auto& r : results) lines += r.to_json_line() + "\n";
  write_file(dir / "chains.jsonl", lines);
  const auto table =
      labelled(analysis::aggregate_chain_metrics(results), model.config().rgb_only ? "rgb" : "rgbd", cfg);
  write_metrics(table, dir);
  out << table.to_json() << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& which, double wide_max, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  const fs::path dir = prepare_run_dir(cfg, "ablate-" + which);
  const analysis::AblationConfig acfg = ablation_config(cfg);
  analysis::AblationReport report;
  if (which == "sep-resampler") {
    report = analysis::run_sep_resampler_ablation(acfg);
  } else {
    const auto frames = analysis::depth_frames(training_data(cfg));
    const DepthStats narrow = compute_stats(frames);
    const DepthStats wide = stats_for_range(frames, 0.0, wide_max);
    report = analysis::run_depth_extremes_ablation(acfg, narrow, wide);
  }
  for (const auto& v : report.variants) write_metrics(labelled(v.after, v.name, cfg), dir);
  const std::string text = report_json(report).dump(2);
  write_file(dir / ("ablation_" + which + ".json"), text + "\n");
  out << text << "\n";
  return 0;
}

int cmd_sensitivity(const CommonArgs& args, std::size_t max_pairs, double wide_max, std::ostream& out) {
  const RunConfig cfg = effective_config(args);
  const fs::path dir = prepare_run_dir(cfg, "sensitivity");
  const auto data = training_data(cfg);
  const auto frames = analysis::depth_frames(data);
  const DepthStats narrow = compute_stats(frames);
  const DepthStats wide = stats_for_range(frames, 0.0, wide_max);
  const auto report =
      analysis::depth_sensitivity_report(analysis::consecutive_pairs(data, max_pairs), {{"narrow", narrow}, {"wide", wide}});
  // The constructed 0.50 m → 0.51 m single-pixel pair on [0,1] and [0,10].
  const auto constructed = analysis::depth_sensitivity_report(
      {{DepthMap(1, 1, {0.50}), DepthMap(1, 1, {0.51})}},
      {{"narrow", DepthStats{0.0, 1.0, 0.5, 0.3}}, {"wide", DepthStats{0.0, 10.0, 0.05, 0.03}}});
  json j;
  j["narrow_range"] = {narrow.d_min, narrow.d_max};
  j["wide_range"] = {wide.d_min, wide.d_max};
  std::size_t totals[2] = {0, 0};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c : report.counts[i]) totals[i] += c;
  j["pairs"] = report.counts[0].size();
  j["changed_pixels"] = {{"narrow", totals[0]}, {"wide", totals[1]}};
  j["constructed_pair"] = {{"narrow", constructed.counts[0][0]}, {"wide", constructed.counts[1][0]}};
  write_file(dir / "sensitivity.json", j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  const auto report = training::full_model_gradcheck(seed);
  char line[200];
  std::snprintf(line, sizeof line, "max relative error %.3e over %zu entries (worst: %s[%zu])\n",
                report.max_relative_error, report.entries_checked, report.worst_param.c_str(), report.worst_index);
  out << line;
  return report.max_relative_error < 1e-4 ? 0 : 2;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "JSON run configuration");
  sub->add_option("--run-dir", args.run_dir, "Output directory (default $RFPX_RUN_DIR or ./runs)");
  sub->add_option("--seed", args.seed, "Override the run seed");
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-aware language-conditioned policy toolkit", "rfpx"};
  app.require_subcommand(1);
  CommonArgs args;
  std::string out_dir;
  std::size_t max_pairs = 256;
  double wide_max = 10.0;
  std::uint64_t gc_seed = 7;

  auto* gen = app.add_subcommand("gen-data", "Generate an expert dataset");
  add_common(gen, args);
  gen->add_option("--out", out_dir, "Dataset directory (default <run-dir>/dataset)");

  auto* stats = app.add_subcommand("stats", "Compute depth statistics of the training data");
  add_common(stats, args);
  stats->add_option("--dataset", args.dataset, "Existing dataset directory");

  auto* train = app.add_subcommand("train", "Train a policy and write a checkpoint");
  add_common(train, args);
  train->add_option("--dataset", args.dataset, "Existing dataset directory");
  train->add_option("--epochs", args.epochs, "Override the epoch count");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out chains");
  add_common(eval, args);
  eval->add_option("--checkpoint", args.checkpoint, "Checkpoint file");
  eval->add_option("--chains", args.chains, "Number of evaluation chains");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation");
  ablate->require_subcommand(1);
  auto* sep = ablate->add_subcommand("sep-resampler", "Shared vs separate resamplers");
  add_common(sep, args);
  sep->add_option("--epochs", args.epochs, "Override the epoch count");
  sep->add_option("--chains", args.chains, "Number of evaluation chains");
  auto* extremes = ablate->add_subcommand("depth-extremes", "Dataset depth range vs a wide fixed range");
  add_common(extremes, args);
  extremes->add_option("--epochs", args.epochs, "Override the epoch count");
  extremes->add_option("--chains", args.chains, "Number of evaluation chains");
  extremes->add_option("--wide-max", wide_max, "Upper end of the wide range in meters");

  auto* sens = app.add_subcommand("sensitivity", "Pixel-change counts under narrow and wide depth ranges");
  add_common(sens, args);
  sens->add_option("--pairs", max_pairs, "Maximum consecutive frame pairs");
  sens->add_option("--wide-max", wide_max, "Upper end of the wide range in meters");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model's gradients");
  gc->add_option("--seed", gc_seed, "Seed for the synthetic batch and initialization");

  if (argc <= 1) {
    err << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(args, out_dir, out);
    if (*stats) return cmd_stats(args, out);
    if (*train) return cmd_train(args, out);
    if (*eval) return cmd_eval(args, out);
    if (*sep) return cmd_ablate(args, "sep-resampler", wide_max, out);
    if (*extremes) return cmd_ablate(args, "depth-extremes", wide_max, out);
    if (*sens) return cmd_sensitivity(args, max_pairs, wide_max, out);
    if (*gc) return cmd_gradcheck(gc_seed, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace rfpx::cli
