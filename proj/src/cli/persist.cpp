#include "rfpx/cli/persist.hpp"

#include <zlib.h>

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "rfpx/error.hpp"

namespace rfpx::cli {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[] = "RFPX1";
constexpr std::size_t kMagicSize = 5;

// Reads keys from one JSON object, remembering which were consumed so that
// leftovers can be reported by their dotted path.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + label() + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: key '" + dotted(key) + "' has the wrong type");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + dotted(key) + "'");
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename F>
std::vector<E> parse_enum_list(ObjectReader& r, const std::string& key, std::vector<E> fallback, F from_string) {
  std::vector<std::string> names;
  r.read(key, names);
  if (names.empty()) return fallback;
  std::vector<E> out;
  for (const auto& n : names) out.push_back(from_string(n));
  return out;
}

template <typename E>
std::vector<std::string> enum_names(const std::vector<E>& values) {
  std::vector<std::string> out;
  for (E v : values) out.push_back(sim::to_string(v));
  return out;
}

json model_json(const policy::ModelConfig& m) {
  json j;
  j["dim"] = m.encoder.dim;
  j["patch"] = m.encoder.patch;
  j["image_size"] = m.encoder.image_size;
  j["vit_depth"] = m.encoder.vit_depth;
  j["latents"] = m.encoder.latents;
  j["separate_resampler"] = m.encoder.separate_resampler;
  j["decoder_layers"] = m.decoder_layers;
  j["lstm_layers"] = m.lstm_layers;
  j["lstm_width"] = m.lstm_width;
  j["clip_bound"] = m.clip_bound;
  j["rgb_only"] = m.rgb_only;
  return j;
}

void read_model(ObjectReader& r, policy::ModelConfig& m) {
  r.read("dim", m.encoder.dim);
  r.read("patch", m.encoder.patch);
  r.read("image_size", m.encoder.image_size);
  r.read("vit_depth", m.encoder.vit_depth);
  r.read("latents", m.encoder.latents);
  r.read("separate_resampler", m.encoder.separate_resampler);
  r.read("decoder_layers", m.decoder_layers);
  r.read("lstm_layers", m.lstm_layers);
  r.read("lstm_width", m.lstm_width);
  r.read("clip_bound", m.clip_bound);
  r.read("rgb_only", m.rgb_only);
}

void append_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  char buf[4];
  std::memcpy(buf, &f, 4);
  out.append(buf, 4);
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::uint32_t read_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

double read_f32(const char* p) {
  float f;
  std::memcpy(&f, p, 4);
  return f;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string param_prefix(const std::string& name) {
  const auto first = name.find('.');
  if (first == std::string::npos) return name;
  const auto second = name.find('.', first + 1);
  return second == std::string::npos ? name.substr(0, first + 1) : name.substr(0, second + 1);
}

// Reads f32 values sequentially from a byte buffer.
class F32Cursor {
 public:
  F32Cursor(const std::string& bytes, const fs::path& source) : bytes_(bytes), source_(source) {}
  std::vector<double> take(std::size_t n) {
    if (pos_ + 4 * n > bytes_.size()) throw CorruptionError("truncated data in " + source_.string());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = read_f32(bytes_.data() + pos_ + 4 * i);
    pos_ += 4 * n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const fs::path& source_;
  std::size_t pos_ = 0;
};

void append_image(std::string& out, const ThreeChannelImage& img) {
  for (double v : img.data) append_f32(out, v);
}

void append_depth(std::string& out, const DepthMap& d) {
  for (double v : d.values()) append_f32(out, v);
}

}  // namespace

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (depth.mode != "dataset" && depth.mode != "fixed")
    throw ConfigError("config: depth.mode must be 'dataset' or 'fixed', got '" + depth.mode + "'");
  if (depth.mode == "fixed" && !(depth.d_max > depth.d_min))
    throw RangeError("config: depth.d_max must exceed depth.d_min");
  if (data.n_train == 0) throw RangeError("config: data.n_train must be positive");
  if (data.palettes.empty()) throw RangeError("config: data.palettes must be non-empty");
  if (data.families.empty()) throw RangeError("config: data.families must be non-empty");
  if (eval.n_chains == 0) throw RangeError("config: eval.n_chains must be positive");
  if (eval.horizon <= 0) throw RangeError("config: eval.horizon must be positive");
  if (eval.first_families.empty()) throw RangeError("config: eval.first_families must be non-empty");
  if (!paths.dataset.empty() && !fs::exists(fs::path(paths.dataset) / "index.json"))
    throw ConfigError("config: paths.dataset '" + paths.dataset + "' is not a dataset directory");
  if (!paths.checkpoint.empty() && !fs::exists(paths.checkpoint))
    throw ConfigError("config: paths.checkpoint '" + paths.checkpoint + "' does not exist");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  bool blank = true;
  for (char c : text) blank = blank && std::isspace(static_cast<unsigned char>(c));
  if (!blank) {
    json root;
    try {
      root = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    ObjectReader r(root, "");
    r.read("seed", cfg.seed);
    if (const json* m = r.child("model")) {
      ObjectReader mr(*m, "model");
      read_model(mr, cfg.model);
      mr.finish();
    }
    if (const json* d = r.child("depth")) {
      ObjectReader dr(*d, "depth");
      dr.read("mode", cfg.depth.mode);
      dr.read("d_min", cfg.depth.d_min);
      dr.read("d_max", cfg.depth.d_max);
      dr.finish();
    }
    if (const json* t = r.child("train")) {
      ObjectReader tr(*t, "train");
      tr.read("lambda_gripper", cfg.train.lambda_gripper);
      tr.read("learning_rate", cfg.train.learning_rate);
      tr.read("beta1", cfg.train.beta1);
      tr.read("beta2", cfg.train.beta2);
      tr.read("adam_eps", cfg.train.adam_eps);
      tr.read("grad_clip", cfg.train.grad_clip);
      tr.read("epochs", cfg.train.epochs);
      tr.read("batch_size", cfg.train.batch_size);
      tr.finish();
    }
    if (const json* d = r.child("data")) {
      ObjectReader dr(*d, "data");
      dr.read("n_train", cfg.data.n_train);
      dr.read("seed", cfg.data.seed);
      cfg.data.palettes = parse_enum_list(dr, "palettes", cfg.data.palettes, sim::palette_from_string);
      cfg.data.families = parse_enum_list(dr, "families", cfg.data.families, sim::family_from_string);
      std::string scene = sim::to_string(cfg.data.scene);
      dr.read("scene", scene);
      cfg.data.scene = sim::scene_from_string(scene);
      dr.read("depth_critical", cfg.data.depth_critical);
      dr.read("enrich", cfg.data.enrich);
      dr.finish();
    }
    if (const json* e = r.child("eval")) {
      ObjectReader er(*e, "eval");
      std::string palette = sim::to_string(cfg.eval.palette);
      er.read("palette", palette);
      cfg.eval.palette = sim::palette_from_string(palette);
      er.read("n_chains", cfg.eval.n_chains);
      er.read("chain_seed", cfg.eval.chain_seed);
      er.read("horizon", cfg.eval.horizon);
      cfg.eval.first_families = parse_enum_list(er, "first_families", cfg.eval.first_families, sim::family_from_string);
      er.finish();
    }
    if (const json* p = r.child("paths")) {
      ObjectReader pr(*p, "paths");
      pr.read("run_dir", cfg.paths.run_dir);
      pr.read("dataset", cfg.paths.dataset);
      pr.read("checkpoint", cfg.paths.checkpoint);
      pr.finish();
    }
    r.finish();
  }
  cfg.model.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config_text(read_file(path));
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["model"] = model_json(cfg.model);
  j["depth"] = {{"mode", cfg.depth.mode}, {"d_min", cfg.depth.d_min}, {"d_max", cfg.depth.d_max}};
  const auto& t = cfg.train;
  j["train"] = {{"lambda_gripper", t.lambda_gripper}, {"learning_rate", t.learning_rate}, {"beta1", t.beta1},
                {"beta2", t.beta2},   {"adam_eps", t.adam_eps},   {"grad_clip", t.grad_clip},
                {"epochs", t.epochs}, {"batch_size", t.batch_size}};
  j["data"] = {{"n_train", cfg.data.n_train},
               {"seed", cfg.data.seed},
               {"palettes", enum_names(cfg.data.palettes)},
               {"families", enum_names(cfg.data.families)},
               {"scene", sim::to_string(cfg.data.scene)},
               {"depth_critical", cfg.data.depth_critical},
               {"enrich", cfg.data.enrich}};
  j["eval"] = {{"palette", sim::to_string(cfg.eval.palette)},
               {"n_chains", cfg.eval.n_chains},
               {"chain_seed", cfg.eval.chain_seed},
               {"horizon", cfg.eval.horizon},
               {"first_families", enum_names(cfg.eval.first_families)}};
  j["paths"] = {{"run_dir", cfg.paths.run_dir}, {"dataset", cfg.paths.dataset}, {"checkpoint", cfg.paths.checkpoint}};
  return j.dump(2) + "\n";
}

std::string model_config_to_json(const policy::ModelConfig& cfg) {
  json j = model_json(cfg);
  j["seed"] = cfg.seed;
  return j.dump();
}

policy::ModelConfig model_config_from_json(const std::string& text) {
  policy::ModelConfig m;
  const json j = json::parse(text);
  ObjectReader r(j, "model");
  read_model(r, m);
  r.read("seed", m.seed);
  r.finish();
  m.validate();
  return m;
}

fs::path resolve_run_dir(const RunConfig& cfg) {
  if (!cfg.paths.run_dir.empty()) return cfg.paths.run_dir;
  if (const char* env = std::getenv("RFPX_RUN_DIR"); env && *env) return env;
  return "runs";
}

// ---------------------------------------------------------------- files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

void append_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

// ---------------------------------------------------------------- checkpoint

std::string checkpoint_bytes(const policy::Model& model) {
  std::vector<std::string> names = model.params().names();
  std::sort(names.begin(), names.end());

  json manifest;
  manifest["config"] = json::parse(model_config_to_json(model.config()));
  manifest["depth_stats"] = json::parse(model.depth_stats().to_json());
  manifest["vocabulary"] = json::parse(model.vocabulary().to_json());
  json tensors = json::array();
  std::string payload;
  for (const auto& name : names) {
    const Tensor& t = model.params().get(name);
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"dtype", "f32"},
                       {"offset", payload.size()},
                       {"trainable", model.params().is_trainable(name)}});
    for (double v : t.values()) append_f32(payload, v);
  }
  manifest["tensors"] = std::move(tensors);

  const std::string header = manifest.dump();
  std::string out(kMagic, kMagicSize);
  append_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out += payload;
  append_u32(out, crc32_of(payload));
  return out;
}

policy::Model checkpoint_from_bytes(const std::string& bytes, const policy::ModelConfig* expected) {
  if (bytes.size() < kMagicSize + 8 || bytes.compare(0, kMagicSize, kMagic) != 0)
    throw CorruptionError("checkpoint: bad magic or truncated header");
  const std::size_t header_len = read_u32(bytes, kMagicSize);
  const std::size_t payload_at = kMagicSize + 4 + header_len;
  if (payload_at + 4 > bytes.size()) throw CorruptionError("checkpoint: truncated manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(kMagicSize + 4, header_len));
  } catch (const nlohmann::json::exception&) {
    throw CorruptionError("checkpoint: unreadable manifest");
  }
  const std::string_view payload(bytes.data() + payload_at, bytes.size() - payload_at - 4);
  if (crc32_of(payload) != read_u32(bytes, bytes.size() - 4))
    throw CorruptionError("checkpoint: CRC mismatch (file corrupted or truncated)");

  policy::ModelConfig cfg;
  DepthStats stats;
  fusion::Vocabulary vocab = fusion::Vocabulary::instruction_vocabulary();
  ParamSet params;
  try {
    cfg = model_config_from_json(manifest.at("config").dump());
    stats = DepthStats::from_json(manifest.at("depth_stats").dump());
    vocab = fusion::Vocabulary::from_json(manifest.at("vocabulary").dump());
    std::size_t next = 0;
    for (const auto& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (t.at("dtype").get<std::string>() != "f32") throw CorruptionError("checkpoint: unsupported dtype for " + name);
      if (offset != next) throw CorruptionError("checkpoint: offsets not contiguous at " + name);
      std::size_t n = 1;
      for (auto s : shape) n *= s;
      if (offset + 4 * n > payload.size()) throw CorruptionError("checkpoint: payload too short for " + name);
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) values[i] = read_f32(payload.data() + offset + 4 * i);
      params.add(name, Tensor(shape, std::move(values)), t.at("trainable").get<bool>());
      next = offset + 4 * n;
    }
    if (next != payload.size()) throw CorruptionError("checkpoint: payload has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint: malformed manifest: ") + e.what());
  }

  if (expected) {
    const policy::Model reference = policy::Model::init(*expected, stats);
    for (const auto& name : reference.params().names()) {
      if (!params.contains(name))
        throw CompatibilityError("checkpoint lacks parameters with prefix '" + param_prefix(name) +
                                 "' required by the configuration");
      if (params.get(name).shape() != reference.params().get(name).shape())
        throw CompatibilityError("checkpoint parameter '" + name + "' has a different shape than the configuration");
    }
    for (const auto& name : params.names())
      if (!reference.params().contains(name))
        throw CompatibilityError("checkpoint has parameters with prefix '" + param_prefix(name) +
                                 "' that the configuration does not use");
  }
  return policy::Model(cfg, std::move(params), std::move(vocab), stats);
}

void save_checkpoint(const policy::Model& model, const fs::path& path) { write_file(path, checkpoint_bytes(model)); }

policy::Model load_checkpoint(const fs::path& path, const policy::ModelConfig* expected) {
  return checkpoint_from_bytes(read_file(path), expected);
}

// ---------------------------------------------------------------- dataset

void save_dataset(const std::vector<sim::Trajectory>& data, const fs::path& dir) {
  fs::create_directories(dir);
  json index;
  index["format"] = "rfpx-dataset-1";
  json entries = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const sim::Trajectory& traj = data[i];
    const std::string file = "traj_" + std::to_string(i) + ".bin";
    std::string bytes;
    std::size_t h = 0, w = 0;
    for (const sim::Step& s : traj.steps) {
      h = s.obs.rgb_static.height;
      w = s.obs.rgb_static.width;
      append_image(bytes, s.obs.rgb_static);
      append_image(bytes, s.obs.rgb_gripper);
      append_depth(bytes, s.obs.depth_static);
      append_depth(bytes, s.obs.depth_gripper);
      for (double v : s.action.pose) append_f32(bytes, v);
      append_f32(bytes, s.action.gripper_closed ? 1.0 : 0.0);
    }
    write_file(dir / file, bytes);
    entries.push_back({{"file", file},
                       {"instruction", traj.instruction},
                       {"family", sim::to_string(traj.family)},
                       {"palette", sim::to_string(traj.palette)},
                       {"scene", sim::to_string(traj.scene)},
                       {"seed", traj.seed},
                       {"steps", traj.steps.size()},
                       {"height", h},
                       {"width", w}});
  }
  index["trajectories"] = std::move(entries);
  write_file(dir / "index.json", index.dump(1) + "\n");
}

std::vector<sim::Trajectory> load_dataset(const fs::path& dir) {
  json index;
  try {
    index = json::parse(read_file(dir / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("dataset index " + (dir / "index.json").string() + ": " + e.what());
  }
  std::vector<sim::Trajectory> data;
  for (const auto& e : index.at("trajectories")) {
    sim::Trajectory traj;
    traj.instruction = e.at("instruction").get<std::string>();
    traj.family = sim::family_from_string(e.at("family").get<std::string>());
    traj.palette = sim::palette_from_string(e.at("palette").get<std::string>());
    traj.scene = sim::scene_from_string(e.at("scene").get<std::string>());
    traj.seed = e.at("seed").get<std::uint64_t>();
    const auto h = e.at("height").get<std::size_t>(), w = e.at("width").get<std::size_t>();
    const fs::path file = dir / e.at("file").get<std::string>();
    const std::string bytes = read_file(file);
    F32Cursor cur(bytes, file);
    const auto n_steps = e.at("steps").get<std::size_t>();
    for (std::size_t s = 0; s < n_steps; ++s) {
      ThreeChannelImage rs(h, w), rg(h, w);
      rs.data = cur.take(3 * h * w);
      rg.data = cur.take(3 * h * w);
      DepthMap ds(h, w, cur.take(h * w));
      DepthMap dg(h, w, cur.take(h * w));
      const auto a = cur.take(7);
      Action action;
      std::copy(a.begin(), a.begin() + 6, action.pose.begin());
      action.gripper_closed = a[6] > 0.5;
      traj.steps.push_back(sim::Step{sim::Observation{rs, rg, ds, dg}, action});
    }
    if (!cur.done()) throw CorruptionError("trailing bytes in " + file.string());
    data.push_back(std::move(traj));
  }
  return data;
}

// ---------------------------------------------------------------- metrics

void write_metrics(const analysis::SuccessTable& table, const fs::path& dir) {
  table.validate();
  const fs::path csv = dir / "metrics.csv";
  const bool fresh = !fs::exists(csv);
  std::ostringstream row;
  if (fresh) row << "Model,Train,Test,Task1,Task2,Task3,Task4,Task5,Avg\n";
  row << table.model << ',' << table.train_split << ',' << table.test_split;
  char buf[32];
  for (double r : table.rates) {
    std::snprintf(buf, sizeof buf, ",%.4f", r);
    row << buf;
  }
  std::snprintf(buf, sizeof buf, ",%.4f\n", table.avg);
  row << buf;
  append_text(dir / "metrics.jsonl", table.to_json() + "\n");
  append_text(csv, row.str());
}

std::vector<analysis::SuccessTable> read_metrics(const fs::path& dir) {
  std::istringstream in(read_file(dir / "metrics.jsonl"));
  std::vector<analysis::SuccessTable> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(analysis::SuccessTable::from_json(line));
  return out;
}

void write_train_metrics(const training::TrainReport& report, const fs::path& dir) {
  std::ostringstream metrics, timing;
  metrics << "epoch,loss,mse,bce\n";
  timing << "epoch,seconds\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.loss, e.mse, e.bce);
    metrics << buf;
    std::snprintf(buf, sizeof buf, "%zu,%.3f\n", e.epoch, e.seconds);
    timing << buf;
  }
  write_file(dir / "train_metrics.csv", metrics.str());
  write_file(dir / "train_timing.csv", timing.str());
}

}  // namespace rfpx::cli
