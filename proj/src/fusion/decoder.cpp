#include "rfpx/fusion/decoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "rfpx/encoders/encoders.hpp"
#include "rfpx/error.hpp"
#include "rfpx/numerics/ops.hpp"
#include "rfpx/sim/tasks.hpp"

namespace rfpx::fusion {

namespace {

std::string layer_name(std::size_t l, const std::string& leaf) { return "decoder." + std::to_string(l) + "." + leaf; }

void check_dims(const char* where, const Tensor& x, const Tensor& w) {
  if (x.cols() != w.rows())
    throw DimensionError(std::string(where) + ": tokens " + shape_string(x.shape()) + " do not match weights " +
                         shape_string(w.shape()));
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  words_.push_back(kUnkWord);
  ids_[kUnkWord] = kUnk;
  for (const std::string& w : words) {
    if (w == kUnkWord) throw ContractError("vocabulary words must not include the UNK marker");
    if (ids_.count(w)) throw ContractError("duplicate vocabulary word '" + w + "'");
    ids_[w] = words_.size();
    words_.push_back(w);
  }
}

Vocabulary Vocabulary::instruction_vocabulary() { return Vocabulary(sim::instruction_words()); }

std::vector<std::size_t> Vocabulary::tokenize(const std::string& text) const {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::istringstream in(lower);
  std::vector<std::size_t> ids;
  for (std::string w; in >> w;) {
    const auto it = ids_.find(w);
    ids.push_back(it == ids_.end() ? kUnk : it->second);
  }
  if (ids.empty()) throw EmptyInstructionError("instruction text is empty");
  return ids;
}

std::string Vocabulary::detokenize(const std::vector<std::size_t>& ids) const {
  std::string out;
  for (std::size_t id : ids) {
    if (id >= words_.size()) throw ContractError("token id " + std::to_string(id) + " is outside the vocabulary");
    if (!out.empty()) out += ' ';
    out += words_[id];
  }
  return out;
}

std::string Vocabulary::to_json() const { return nlohmann::json(words_).dump(); }

Vocabulary Vocabulary::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  auto words = j.get<std::vector<std::string>>();
  if (words.empty() || words.front() != kUnkWord) throw CorruptionError("vocabulary must start with " + std::string(kUnkWord));
  words.erase(words.begin());
  return Vocabulary(words);
}

DecoderStack DecoderStack::from(const ParamSet& p) {
  DecoderStack s;
  s.embedding = p.get("decoder.embedding");
  for (std::size_t l = 0; p.contains(layer_name(l, "cross.wq")); ++l) {
    auto g = [&](const std::string& leaf) { return p.get(layer_name(l, leaf)); };
    s.layers.push_back({g("cross.wq"), g("cross.wk"), g("cross.wv"), g("cross.alpha"), g("cross_mlp.w1"),
                        g("cross_mlp.b1"), g("cross_mlp.w2"), g("cross_mlp.b2"), g("self.wq"), g("self.wk"),
                        g("self.wv"), g("self_mlp.w1"), g("self_mlp.b1"), g("self_mlp.w2"), g("self_mlp.b2")});
  }
  return s;
}

void init_decoder(ParamSet& params, const DecoderConfig& cfg, std::size_t vocab_size, Rng& rng) {
  if (cfg.layers == 0) throw RangeError("decoder needs at least one layer (L >= 1)");
  const std::size_t d = cfg.dim;
  using encoders::random_matrix;
  params.add("decoder.embedding", random_matrix(rng, vocab_size, d, std::sqrt(static_cast<double>(vocab_size))), false);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    params.add(layer_name(l, "cross.wq"), random_matrix(rng, d, d), true);
    params.add(layer_name(l, "cross.wk"), random_matrix(rng, d, d), true);
    params.add(layer_name(l, "cross.wv"), random_matrix(rng, d, d), true);
    params.add(layer_name(l, "cross.alpha"), Tensor::scalar(0.0), true);
    params.add(layer_name(l, "cross_mlp.w1"), random_matrix(rng, d, 4 * d), true);
    params.add(layer_name(l, "cross_mlp.b1"), Tensor::zeros({1, 4 * d}), true);
    params.add(layer_name(l, "cross_mlp.w2"), random_matrix(rng, 4 * d, d), true);
    params.add(layer_name(l, "cross_mlp.b2"), Tensor::zeros({1, d}), true);
    params.add(layer_name(l, "self.wq"), random_matrix(rng, d, d), false);
    params.add(layer_name(l, "self.wk"), random_matrix(rng, d, d), false);
    params.add(layer_name(l, "self.wv"), random_matrix(rng, d, d, 0.5), false);
    params.add(layer_name(l, "self_mlp.w1"), random_matrix(rng, d, 4 * d), false);
    params.add(layer_name(l, "self_mlp.b1"), Tensor::zeros({1, 4 * d}), false);
    params.add(layer_name(l, "self_mlp.w2"), random_matrix(rng, 4 * d, d, 0.5), false);
    params.add(layer_name(l, "self_mlp.b2"), Tensor::zeros({1, d}), false);
  }
}

Tensor embed_instruction(const std::vector<std::size_t>& ids, const Tensor& embedding) {
  if (ids.empty()) throw EmptyInstructionError("cannot embed an empty token sequence");
  const std::size_t d = embedding.cols();
  std::vector<double> rows;
  rows.reserve(ids.size() * d);
  const auto table = embedding.values();
  for (std::size_t id : ids) {
    if (id >= embedding.rows())
      throw ContractError("token id " + std::to_string(id) + " is outside the embedding table of " +
                          std::to_string(embedding.rows()) + " rows");
    rows.insert(rows.end(), table.begin() + static_cast<std::ptrdiff_t>(id * d),
                table.begin() + static_cast<std::ptrdiff_t>((id + 1) * d));
  }
  return Tensor::matrix(ids.size(), d, std::move(rows));
}

Tensor gated_cross_attention(const Tensor& xl, const Tensor& xvde, const DecoderLayerParams& p) {
  check_dims("gated_cross_attention", xl, p.cross_wq);
  check_dims("gated_cross_attention", xvde, p.cross_wk);
  const Tensor attended =
      ops::scaled_dot_attention(ops::matmul(xl, p.cross_wq), ops::matmul(xvde, p.cross_wk), ops::matmul(xvde, p.cross_wv));
  const Tensor branch = encoders::mlp(attended, p.cross_w1, p.cross_b1, p.cross_w2, p.cross_b2);
  return ops::add(ops::scale_by(branch, ops::tanh(p.alpha)), xl);
}

Tensor self_attention_block(const Tensor& x, const DecoderLayerParams& p) {
  check_dims("self_attention_block", x, p.self_wq);
  const Tensor attended = ops::scaled_dot_attention(ops::matmul(x, p.self_wq), ops::matmul(x, p.self_wk), ops::matmul(x, p.self_wv));
  return ops::add(encoders::mlp(attended, p.self_w1, p.self_b1, p.self_w2, p.self_b2), x);
}

Tensor decode(const Tensor& x, const Tensor& xvde, const DecoderStack& stack) {
  if (stack.layers.empty()) throw ContractError("decoder stack has no layers");
  Tensor h = x;
  for (const DecoderLayerParams& layer : stack.layers) h = self_attention_block(gated_cross_attention(h, xvde, layer), layer);
  return h;
}

}  // namespace rfpx::fusion
