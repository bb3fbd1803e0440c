#include "rfpx/encoders/encoders.hpp"

#include <cmath>

#include "rfpx/error.hpp"
#include "rfpx/numerics/ops.hpp"

namespace rfpx::encoders {

namespace {

// Residual branches start small so the untrained stack stays well scaled
// without normalization layers.
constexpr double kBranchScale = 0.5;

std::string block_name(std::size_t i, const char* leaf) { return "vit.block." + std::to_string(i) + "." + leaf; }

Tensor vit_block(const Tensor& x, const VitBlock& b) {
  const Tensor attended =
      ops::add(x, ops::scaled_dot_attention(ops::matmul(x, b.wq), ops::matmul(x, b.wk), ops::matmul(x, b.wv)));
  return ops::add(attended, mlp(attended, b.w1, b.b1, b.w2, b.b2));
}

}  // namespace

void validate_rgb(const ThreeChannelImage& image) {
  if (image.data.size() != 3 * image.height * image.width)
    throw DimensionError("rgb image: data size does not match 3x" + std::to_string(image.height) + "x" +
                         std::to_string(image.width));
  for (double v : image.data)
    if (!(v >= 0.0 && v <= 1.0)) throw NumericInputError("rgb image: value outside [0,1]");
}

VitParams VitParams::from(const ParamSet& params, std::size_t patch) {
  VitParams v;
  v.patch = patch;
  v.projection = params.get("vit.projection");
  v.bias = params.get("vit.bias");
  v.positions = params.get("vit.positions");
  for (std::size_t i = 0; params.contains(block_name(i, "wq")); ++i) {
    v.blocks.push_back({params.get(block_name(i, "wq")), params.get(block_name(i, "wk")),
                        params.get(block_name(i, "wv")), params.get(block_name(i, "mlp.w1")),
                        params.get(block_name(i, "mlp.b1")), params.get(block_name(i, "mlp.w2")),
                        params.get(block_name(i, "mlp.b2"))});
  }
  return v;
}

ResamplerParams ResamplerParams::from(const ParamSet& params, const std::string& prefix) {
  return {params.get(prefix + "latents"), params.get(prefix + "wk"), params.get(prefix + "wv")};
}

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  std::vector<double> values(rows * cols);
  const double sd = scale / std::sqrt(static_cast<double>(rows));
  for (double& v : values) v = sd * rng.normal();
  return Tensor::matrix(rows, cols, std::move(values));
}

void init_vit(ParamSet& params, const EncoderConfig& cfg, Rng& rng) {
  if (cfg.patch == 0 || cfg.image_size % cfg.patch != 0)
    throw RangeError("image size " + std::to_string(cfg.image_size) + " is not divisible by patch " +
                     std::to_string(cfg.patch));
  const std::size_t d = cfg.dim;
  const std::size_t grid = cfg.image_size / cfg.patch;
  params.add("vit.projection", random_matrix(rng, 3 * cfg.patch * cfg.patch, d), false);
  params.add("vit.bias", Tensor::zeros({1, d}), false);
  params.add("vit.positions", random_matrix(rng, grid * grid, d, 0.5 * std::sqrt(static_cast<double>(grid * grid))), false);
  for (std::size_t i = 0; i < cfg.vit_depth; ++i) {
    params.add(block_name(i, "wq"), random_matrix(rng, d, d), false);
    params.add(block_name(i, "wk"), random_matrix(rng, d, d), false);
    params.add(block_name(i, "wv"), random_matrix(rng, d, d, kBranchScale), false);
    params.add(block_name(i, "mlp.w1"), random_matrix(rng, d, 4 * d), false);
    params.add(block_name(i, "mlp.b1"), Tensor::zeros({1, 4 * d}), false);
    params.add(block_name(i, "mlp.w2"), random_matrix(rng, 4 * d, d, kBranchScale), false);
    params.add(block_name(i, "mlp.b2"), Tensor::zeros({1, d}), false);
  }
}

std::string rgb_resampler_prefix(const EncoderConfig& cfg) {
  return cfg.separate_resampler ? "resampler.rgb." : "resampler.shared.";
}

std::string depth_resampler_prefix(const EncoderConfig& cfg) {
  return cfg.separate_resampler ? "resampler.depth." : "resampler.shared.";
}

void init_resampler(ParamSet& params, const EncoderConfig& cfg, Rng& rng) {
  if (cfg.latents == 0) throw RangeError("resampler needs at least one latent (K >= 1)");
  const std::size_t d = cfg.dim;
  const Tensor latents = random_matrix(rng, cfg.latents, d, std::sqrt(static_cast<double>(cfg.latents)));
  const Tensor wk = random_matrix(rng, d, d);
  const Tensor wv = random_matrix(rng, d, d);
  const std::vector<std::string> prefixes =
      cfg.separate_resampler ? std::vector<std::string>{"resampler.rgb.", "resampler.depth."}
                             : std::vector<std::string>{"resampler.shared."};
  for (const std::string& p : prefixes) {
    params.add(p + "latents", latents, true);
    params.add(p + "wk", wk, true);
    params.add(p + "wv", wv, true);
  }
}

TokenSequence patchify(const ThreeChannelImage& image, const VitParams& vit) {
  const std::size_t p = vit.patch;
  if (p == 0 || image.height % p != 0 || image.width % p != 0)
    throw DimensionError("patchify: extents " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " are not divisible by patch " + std::to_string(p));
  const std::size_t rows = image.height / p, cols = image.width / p;
  const std::size_t n = rows * cols, width = 3 * p * p;
  if (vit.projection.rows() != width)
    throw DimensionError("patchify: projection expects " + std::to_string(vit.projection.rows()) +
                         " inputs but patches have " + std::to_string(width));
  if (vit.positions.rows() != n)
    throw DimensionError("patchify: " + std::to_string(n) + " patches but " + std::to_string(vit.positions.rows()) +
                         " positional embeddings");
  std::vector<double> flat(n * width);
  for (std::size_t pr = 0; pr < rows; ++pr)
    for (std::size_t pc = 0; pc < cols; ++pc) {
      double* out = &flat[(pr * cols + pc) * width];
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t r = 0; r < p; ++r)
          for (std::size_t q = 0; q < p; ++q) *out++ = image.at(c, pr * p + r, pc * p + q);
    }
  const Tensor patches = Tensor::matrix(n, width, std::move(flat));
  return {ops::add(ops::add_row(ops::matmul(patches, vit.projection), vit.bias), vit.positions)};
}

TokenSequence vit_encode_pair(const ThreeChannelImage& a, const ThreeChannelImage& b, const VitParams& vit) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("vit_encode_pair: frames differ in extents (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                         ")");
  auto encode = [&](const ThreeChannelImage& img) {
    Tensor x = patchify(img, vit).data;
    for (const VitBlock& block : vit.blocks) x = vit_block(x, block);
    return x;
  };
  // The ViT is frozen, so its output is a constant for everything downstream.
  return {ops::concat_rows(encode(a), encode(b)).detach()};
}

TokenSequence resample(const TokenSequence& tokens, const ResamplerParams& r) {
  if (tokens.dim() != r.wk.rows())
    throw DimensionError("resample: tokens have dim " + std::to_string(tokens.dim()) + " but the resampler expects " +
                         std::to_string(r.wk.rows()));
  return {ops::scaled_dot_attention(r.latents, ops::matmul(tokens.data, r.wk), ops::matmul(tokens.data, r.wv))};
}

TokenSequence fuse_concat(const TokenSequence& rgb, const TokenSequence& depth) {
  if (rgb.dim() != depth.dim())
    throw DimensionError("fuse_concat: dims differ (" + shape_string(rgb.data.shape()) + " vs " +
                         shape_string(depth.data.shape()) + ")");
  return {ops::concat_rows(rgb.data, depth.data)};
}

Tensor mlp(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  return ops::add_row(ops::matmul(ops::tanh(ops::add_row(ops::matmul(x, w1), b1)), w2), b2);
}

}  // namespace rfpx::encoders
