#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rfpx/analysis/analysis.hpp"
#include "rfpx/policy/model.hpp"
#include "rfpx/sim/dataset.hpp"
#include "rfpx/training/training.hpp"

namespace rfpx::cli {

namespace fs = std::filesystem;

/// How the depth pipeline's statistics are obtained. "dataset" uses the
/// training set's own extremes; "fixed" pins [d_min, d_max] and computes the
/// moments on the training set against that range.
struct DepthSource {
  std::string mode = "dataset";
  double d_min = 0.0;
  double d_max = 10.0;
  bool operator==(const DepthSource&) const = default;
};

struct DataConfig {
  std::size_t n_train = 200;
  std::uint64_t seed = 1;
  std::vector<sim::Palette> palettes{sim::Palette::A, sim::Palette::B, sim::Palette::C};
  std::vector<sim::TaskFamily> families{sim::TaskFamily::lift};
  sim::SceneKind scene = sim::SceneKind::standard;
  bool depth_critical = false;
  bool enrich = false;
  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  sim::Palette palette = sim::Palette::D;
  std::size_t n_chains = 50;
  std::uint64_t chain_seed = 1000;
  int horizon = sim::kDefaultHorizon;
  std::vector<sim::TaskFamily> first_families{sim::TaskFamily::lift};
  bool operator==(const EvalConfig&) const = default;
};

struct PathConfig {
  std::string run_dir;     // empty: $RFPX_RUN_DIR, else "runs"
  std::string dataset;     // existing dataset directory to read instead of generating
  std::string checkpoint;  // existing checkpoint to evaluate
  bool operator==(const PathConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;  // model initialization and shuffle order
  policy::ModelConfig model;
  DepthSource depth;
  training::TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  PathConfig paths;

  /// Dimensions positive, ranges ordered, referenced paths present.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Defaults filled for absent keys. Unknown keys throw ConfigError naming the
/// dotted key; invalid dimensions throw RangeError. Empty text is all-defaults.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const fs::path& path);
/// Canonical, fully populated JSON; reparses to an equal RunConfig.
std::string config_to_json(const RunConfig& cfg);

std::string model_config_to_json(const policy::ModelConfig& cfg);
policy::ModelConfig model_config_from_json(const std::string& text);

/// $RFPX_RUN_DIR when paths.run_dir is empty, "runs" when both are.
fs::path resolve_run_dir(const RunConfig& cfg);

/// Checkpoint layout: "RFPX1", u32 LE manifest length, JSON manifest, f32 LE
/// payload in manifest order, u32 LE CRC32 of the payload.
std::string checkpoint_bytes(const policy::Model& model);
policy::Model checkpoint_from_bytes(const std::string& bytes, const policy::ModelConfig* expected = nullptr);
void save_checkpoint(const policy::Model& model, const fs::path& path);
/// CorruptionError on a bad magic, truncation or CRC mismatch;
/// CompatibilityError when `expected` needs parameters or shapes the file lacks.
policy::Model load_checkpoint(const fs::path& path, const policy::ModelConfig* expected = nullptr);

/// Directory with index.json and traj_<i>.bin per trajectory (frames as f32
/// planes, actions as f32 rows).
void save_dataset(const std::vector<sim::Trajectory>& data, const fs::path& dir);
std::vector<sim::Trajectory> load_dataset(const fs::path& dir);

/// Appends one JSON line to metrics.jsonl and one row to metrics.csv
/// (Model,Train,Test,Task1..Task5,Avg), writing the CSV header on first use.
void write_metrics(const analysis::SuccessTable& table, const fs::path& dir);
std::vector<analysis::SuccessTable> read_metrics(const fs::path& dir);

/// train_metrics.csv (epoch,loss,mse,bce) is deterministic; wall-clock times
/// go to train_timing.csv.
void write_train_metrics(const training::TrainReport& report, const fs::path& dir);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& bytes);

}  // namespace rfpx::cli
