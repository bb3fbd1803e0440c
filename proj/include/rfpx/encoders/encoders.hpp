#pragma once

#include <string>
#include <vector>

#include "rfpx/image.hpp"
#include "rfpx/numerics/param_set.hpp"
#include "rfpx/numerics/tensor.hpp"
#include "rfpx/rng.hpp"

namespace rfpx::encoders {

struct EncoderConfig {
  std::size_t image_size = 32;
  std::size_t patch = 8;
  std::size_t dim = 64;
  std::size_t vit_depth = 2;
  std::size_t latents = 8;  // K
  bool separate_resampler = false;
  bool operator==(const EncoderConfig&) const = default;
};

/// N×dim token matrix.
struct TokenSequence {
  Tensor data;
  std::size_t count() const { return data.rows(); }
  std::size_t dim() const { return data.cols(); }
};

/// Throws NumericInputError unless every value lies in [0,1].
void validate_rgb(const ThreeChannelImage& image);

struct VitBlock {
  Tensor wq, wk, wv;         // dim×dim
  Tensor w1, b1, w2, b2;     // MLP: dim→4dim→dim
};

/// Read-only view of the frozen ViT entries stored under "vit.".
struct VitParams {
  std::size_t patch = 8;
  Tensor projection;  // 3P²×dim
  Tensor bias;        // 1×dim
  Tensor positions;   // patches×dim
  std::vector<VitBlock> blocks;

  static VitParams from(const ParamSet& params, std::size_t patch);
};

/// Read-only view of one resampler: K latent queries and key/value maps.
struct ResamplerParams {
  Tensor latents;  // K×dim
  Tensor wk, wv;   // dim×dim

  static ResamplerParams from(const ParamSet& params, const std::string& prefix);
};

/// Adds frozen, seed-determined ViT weights under "vit.".
void init_vit(ParamSet& params, const EncoderConfig& cfg, Rng& rng);

/// Adds trainable resampler weights: "resampler.shared." or, for the separate
/// variant, identical copies under "resampler.rgb." and "resampler.depth.".
/// Both variants draw the same values from the same rng state.
void init_resampler(ParamSet& params, const EncoderConfig& cfg, Rng& rng);

/// Prefixes of the resamplers used for RGB and depth tokens.
std::string rgb_resampler_prefix(const EncoderConfig& cfg);
std::string depth_resampler_prefix(const EncoderConfig& cfg);

/// Flattened P×P patches (channel-major inside a patch, patches row-major)
/// projected to dim, plus positional embeddings.
TokenSequence patchify(const ThreeChannelImage& image, const VitParams& vit);

/// Both frames through the frozen ViT independently; tokens of `a` first.
TokenSequence vit_encode_pair(const ThreeChannelImage& a, const ThreeChannelImage& b, const VitParams& vit);

/// K tokens: softmax(Q_R (X W_K)ᵀ / sqrt(d)) X W_V.
TokenSequence resample(const TokenSequence& tokens, const ResamplerParams& r);

/// RGB tokens followed by depth tokens.
TokenSequence fuse_concat(const TokenSequence& rgb, const TokenSequence& depth);

/// Dense two-layer MLP with tanh between: W2·tanh(W1x + b1) + b2, row-wise.
Tensor mlp(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2);

/// Matrix of N(0, scale²/fan_in) draws, fan_in = rows.
Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

}  // namespace rfpx::encoders
