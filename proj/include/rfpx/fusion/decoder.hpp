#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rfpx/numerics/param_set.hpp"
#include "rfpx/numerics/tensor.hpp"
#include "rfpx/rng.hpp"

namespace rfpx::fusion {

/// Closed word list with id 0 reserved for unknown words.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr const char* kUnkWord = "<unk>";

  /// `words` must not contain the UNK marker; ids are assigned in order from 1.
  explicit Vocabulary(const std::vector<std::string>& words);
  /// Built from every word the simulator's instructions can contain.
  static Vocabulary instruction_vocabulary();

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  /// Lowercase, whitespace split, unknown words → kUnk. Empty or
  /// whitespace-only text throws EmptyInstructionError.
  std::vector<std::size_t> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<std::size_t>& ids) const;

  /// JSON array of words, index = id.
  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);
  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  Vocabulary() = default;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct DecoderConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;  // L
};

struct DecoderLayerParams {
  Tensor cross_wq, cross_wk, cross_wv, alpha;          // trainable
  Tensor cross_w1, cross_b1, cross_w2, cross_b2;       // trainable
  Tensor self_wq, self_wk, self_wv;                    // frozen
  Tensor self_w1, self_b1, self_w2, self_b2;           // frozen
};

struct DecoderStack {
  Tensor embedding;  // vocab×dim, frozen
  std::vector<DecoderLayerParams> layers;

  static DecoderStack from(const ParamSet& params);
};

/// Adds "decoder.embedding" and "decoder.<l>.{cross,cross_mlp,self,self_mlp}.*"
/// with α = 0. Frozen entries stand in for the pretrained language model.
void init_decoder(ParamSet& params, const DecoderConfig& cfg, std::size_t vocab_size, Rng& rng);

/// Rows of the embedding table; ids beyond the table are a ContractError.
Tensor embed_instruction(const std::vector<std::size_t>& ids, const Tensor& embedding);

/// tanh(α)·MLP(A(Xl W_Q, Xvde W_K, Xvde W_V)) + Xl.
Tensor gated_cross_attention(const Tensor& xl, const Tensor& xvde, const DecoderLayerParams& layer);

/// MLP(A(X W_Q, X W_K, X W_V)) + X with the frozen weights.
Tensor self_attention_block(const Tensor& x, const DecoderLayerParams& layer);

/// L layers of (gated cross-attention, self-attention block).
Tensor decode(const Tensor& x, const Tensor& xvde, const DecoderStack& stack);

}  // namespace rfpx::fusion
