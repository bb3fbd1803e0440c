#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "rfpx/cli/persist.hpp"
#include "rfpx/error.hpp"

using namespace rfpx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rfpx_persist_" + name);
  fs::remove_all(p);
  return p;
}

policy::ModelConfig small_model(bool separate = false) {
  policy::ModelConfig m;
  m.encoder.dim = 16;
  m.encoder.latents = 2;
  m.encoder.vit_depth = 1;
  m.encoder.separate_resampler = separate;
  m.decoder_layers = 1;
  m.lstm_layers = 1;
  m.lstm_width = 8;
  m.seed = 3;
  return m;
}

DepthStats stats() { return DepthStats{0.001, 1.1, 0.7, 0.3}; }

}  // namespace

TEST(Config, EmptyTextIsAllDefaults) {
  const auto cfg = cli::parse_config_text("");
  EXPECT_EQ(cfg, cli::RunConfig{});
  EXPECT_EQ(cli::parse_config_text("  \n"), cfg);
  EXPECT_EQ(cli::parse_config_text("{}"), cfg);
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    cli::parse_config_text(R"({"model": {"dimm": 4}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.dimm"), std::string::npos);
    EXPECT_TRUE(e.is_validation());
  }
  EXPECT_THROW(cli::parse_config_text(R"({"sed": 1})"), ConfigError);
}

TEST(Config, ZeroLatentsIsRangeError) {
  EXPECT_THROW(cli::parse_config_text(R"({"model": {"latents": 0}})"), RangeError);
  EXPECT_THROW(cli::parse_config_text(R"({"model": {"dim": 0}})"), RangeError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(cli::parse_config_text(R"({"model": {"dim": "big"}})"), ConfigError);
  EXPECT_THROW(cli::parse_config_text(R"({"data": {"palettes": ["Q"]}})"), ConfigError);
  EXPECT_THROW(cli::parse_config_text("{not json"), ConfigError);
  EXPECT_THROW(cli::parse_config_text(R"({"depth": {"mode": "fixed", "d_min": 2, "d_max": 1}})"), RangeError);
  EXPECT_THROW(cli::parse_config_text(R"({"paths": {"dataset": "/nonexistent/rfpx"}})"), ConfigError);
}

TEST(Config, EchoReparsesToEqualConfig) {
  const auto cfg = cli::parse_config_text(
      R"({"seed": 9, "model": {"latents": 4, "separate_resampler": true}, "train": {"lambda_gripper": 0.01},
          "data": {"palettes": ["A", "D"], "families": ["lift", "push"], "scene": "tall_short"},
          "eval": {"palette": "B", "n_chains": 7}})");
  EXPECT_EQ(cfg.model.seed, 9u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.model.encoder.latents, 4u);
  EXPECT_EQ(cli::parse_config_text(cli::config_to_json(cfg)), cfg);
  EXPECT_EQ(cli::config_to_json(cli::parse_config_text(cli::config_to_json(cfg))), cli::config_to_json(cfg));
}

TEST(Config, RunDirResolution) {
  cli::RunConfig cfg;
  cfg.paths.run_dir = "explicit";
  EXPECT_EQ(cli::resolve_run_dir(cfg), fs::path("explicit"));
  cfg.paths.run_dir.clear();
  setenv("RFPX_RUN_DIR", "/tmp/rfpx_env_root", 1);
  EXPECT_EQ(cli::resolve_run_dir(cfg), fs::path("/tmp/rfpx_env_root"));
  unsetenv("RFPX_RUN_DIR");
  EXPECT_EQ(cli::resolve_run_dir(cfg), fs::path("runs"));
}

TEST(Checkpoint, RoundTripToF32) {
  const auto model = policy::Model::init(small_model(), stats());
  const auto loaded = cli::checkpoint_from_bytes(cli::checkpoint_bytes(model));
  EXPECT_EQ(loaded.config(), model.config());
  EXPECT_EQ(loaded.depth_stats(), model.depth_stats());
  EXPECT_EQ(loaded.vocabulary(), model.vocabulary());
  ASSERT_EQ(loaded.params().names(), model.params().names());
  for (const auto& name : model.params().names()) {
    EXPECT_EQ(loaded.params().is_trainable(name), model.params().is_trainable(name)) << name;
    const auto a = model.params().get(name).values();
    const auto b = loaded.params().get(name).values();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], static_cast<double>(static_cast<float>(a[i]))) << name;
  }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto model = policy::Model::init(small_model(), stats());
  const fs::path dir = scratch("ckpt");
  cli::save_checkpoint(model, dir / "a.ckpt");
  cli::save_checkpoint(cli::load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
  EXPECT_EQ(cli::read_file(dir / "a.ckpt"), cli::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, LayoutHasMagicLengthAndCrc) {
  const std::string bytes = cli::checkpoint_bytes(policy::Model::init(small_model(), stats()));
  EXPECT_EQ(bytes.substr(0, 5), "RFPX1");
  std::uint32_t len;
  std::memcpy(&len, bytes.data() + 5, 4);
  EXPECT_EQ(bytes[9], '{');
  EXPECT_EQ(bytes[9 + len - 1], '}');
}

TEST(Checkpoint, TruncationAndBitFlipsAreCorruption) {
  const std::string bytes = cli::checkpoint_bytes(policy::Model::init(small_model(), stats()));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(cli::checkpoint_from_bytes(bytes.substr(0, cut)), CorruptionError) << cut;
  std::string flipped = bytes;
  flipped[bytes.size() - 40] ^= 0x10;
  EXPECT_THROW(cli::checkpoint_from_bytes(flipped), CorruptionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(cli::checkpoint_from_bytes(bad_magic), CorruptionError);
}

TEST(Checkpoint, SeparateIntoSharedNamesMissingPrefix) {
  const std::string bytes = cli::checkpoint_bytes(policy::Model::init(small_model(true), stats()));
  const auto shared = small_model(false);
  try {
    cli::checkpoint_from_bytes(bytes, &shared);
    FAIL();
  } catch (const CompatibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("resampler.shared."), std::string::npos) << e.what();
  }
  const auto separate = small_model(true);
  EXPECT_NO_THROW(cli::checkpoint_from_bytes(bytes, &separate));
  auto wider = small_model(true);
  wider.lstm_width = 12;
  EXPECT_THROW(cli::checkpoint_from_bytes(bytes, &wider), CompatibilityError);
}

TEST(DatasetContainer, RoundTripsToF32) {
  sim::DatasetOptions opt;
  opt.families = {sim::TaskFamily::lift, sim::TaskFamily::press};
  const auto data = sim::generate_dataset(3, 4, {sim::Palette::A, sim::Palette::B}, false, opt);
  const fs::path dir = scratch("dataset");
  cli::save_dataset(data, dir);
  EXPECT_TRUE(fs::exists(dir / "index.json"));
  const auto loaded = cli::load_dataset(dir);
  ASSERT_EQ(loaded.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(loaded[i].instruction, data[i].instruction);
    EXPECT_EQ(loaded[i].family, data[i].family);
    EXPECT_EQ(loaded[i].palette, data[i].palette);
    EXPECT_EQ(loaded[i].seed, data[i].seed);
    ASSERT_EQ(loaded[i].steps.size(), data[i].steps.size());
    for (std::size_t t = 0; t < data[i].steps.size(); ++t) {
      const auto& a = data[i].steps[t];
      const auto& b = loaded[i].steps[t];
      EXPECT_EQ(a.action.gripper_closed, b.action.gripper_closed);
      for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(b.action.pose[k], static_cast<float>(a.action.pose[k]));
      for (std::size_t k = 0; k < a.obs.rgb_static.data.size(); ++k)
        ASSERT_EQ(b.obs.rgb_static.data[k], static_cast<float>(a.obs.rgb_static.data[k]));
      for (std::size_t k = 0; k < a.obs.depth_gripper.values().size(); ++k)
        ASSERT_EQ(b.obs.depth_gripper.values()[k], static_cast<float>(a.obs.depth_gripper.values()[k]));
    }
  }
  const fs::path again = scratch("dataset2");
  cli::save_dataset(loaded, again);
  EXPECT_EQ(cli::read_file(dir / "traj_1.bin"), cli::read_file(again / "traj_1.bin"));
}

TEST(DatasetContainer, TruncatedTrajectoryIsCorruption) {
  sim::DatasetOptions opt;
  opt.families = {sim::TaskFamily::lift};
  const fs::path dir = scratch("dataset_trunc");
  cli::save_dataset(sim::generate_dataset(1, 4, {sim::Palette::A}, false, opt), dir);
  const std::string bytes = cli::read_file(dir / "traj_0.bin");
  cli::write_file(dir / "traj_0.bin", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(cli::load_dataset(dir), CorruptionError);
}

TEST(Metrics, CsvRowLayoutAndAppend) {
  const fs::path dir = scratch("metrics");
  analysis::SuccessTable t;
  t.rates = {0.96, 0.87, 0.78, 0.705, 0.625};
  t.avg = 3.94;
  t.n_chains = 200;
  t.model = "rgbd";
  t.train_split = "ABC";
  t.test_split = "D";
  cli::write_metrics(t, dir);
  cli::write_metrics(t, dir);
  const std::string csv = cli::read_file(dir / "metrics.csv");
  EXPECT_EQ(csv,
            "Model,Train,Test,Task1,Task2,Task3,Task4,Task5,Avg\n"
            "rgbd,ABC,D,0.9600,0.8700,0.7800,0.7050,0.6250,3.9400\n"
            "rgbd,ABC,D,0.9600,0.8700,0.7800,0.7050,0.6250,3.9400\n");
  const auto back = cli::read_metrics(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], t);
}

TEST(Metrics, InvalidTableNotWritten) {
  const fs::path dir = scratch("metrics_bad");
  analysis::SuccessTable t;
  t.rates = {0.1, 0.2, 0.0, 0.0, 0.0};
  t.avg = 0.3;
  EXPECT_THROW(cli::write_metrics(t, dir), ContractError);
  EXPECT_FALSE(fs::exists(dir / "metrics.csv"));
}

TEST(Metrics, TrainMetricsSeparateTiming) {
  const fs::path dir = scratch("train_metrics");
  training::TrainReport r;
  r.epochs.push_back({1, 0.5, 0.25, 0.25, 3.2});
  cli::write_train_metrics(r, dir);
  EXPECT_EQ(cli::read_file(dir / "train_metrics.csv"), "epoch,loss,mse,bce\n1,0.5,0.25,0.25\n");
  EXPECT_EQ(cli::read_file(dir / "train_timing.csv"), "epoch,seconds\n1,3.200\n");
}

TEST(Files, MissingFileIsIoErrorWithPath) {
  try {
    cli::read_file("/nonexistent/rfpx/file");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/rfpx/file"), std::string::npos);
  }
}
