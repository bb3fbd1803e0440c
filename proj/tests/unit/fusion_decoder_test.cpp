#include <gtest/gtest.h>

#include "oracle.hpp"
#include "rfpx/error.hpp"
#include "rfpx/fusion/decoder.hpp"
#include "rfpx/numerics/grad_check.hpp"
#include "rfpx/numerics/ops.hpp"

using namespace rfpx;
using namespace rfpx::fusion;

namespace {

Tensor random_tokens(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.normal();
  return Tensor::matrix(n, d, std::move(v));
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ParamSet decoder_params(std::size_t d, std::size_t layers, std::uint64_t seed, std::size_t vocab = 12) {
  ParamSet p;
  Rng rng(seed);
  init_decoder(p, {d, layers}, vocab, rng);
  return p;
}

void set_scalar(const ParamSet& p, const std::string& name, double v) {
  Tensor t = p.get(name);
  t.mutable_values()[0] = v;
}

}  // namespace

TEST(Vocabulary, TokenizeKnownWords) {
  const Vocabulary v = Vocabulary::instruction_vocabulary();
  const auto ids = v.tokenize("Lift the red block");
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(v.detokenize(ids), "lift the red block");
  for (std::size_t id : ids) EXPECT_NE(id, Vocabulary::kUnk);
}

TEST(Vocabulary, UnknownWordsMapToUnk) {
  const Vocabulary v = Vocabulary::instruction_vocabulary();
  const auto ids = v.tokenize("zzzq block");
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(ids[0], Vocabulary::kUnk);
  EXPECT_EQ(v.words()[ids[1]], "block");
}

TEST(Vocabulary, RoundTripIsIdentityUpToCase) {
  const Vocabulary v = Vocabulary::instruction_vocabulary();
  for (const std::string text : {"Slide the slider to the LEFT", "put the tall blue block into the bin"})
    EXPECT_EQ(v.tokenize(v.detokenize(v.tokenize(text))), v.tokenize(text));
}

TEST(Vocabulary, EmptyTextIsRejected) {
  const Vocabulary v = Vocabulary::instruction_vocabulary();
  EXPECT_THROW(v.tokenize(""), EmptyInstructionError);
  EXPECT_THROW(v.tokenize(" \t\n"), EmptyInstructionError);
}

TEST(Vocabulary, ClosedAndSmallWithJsonRoundTrip) {
  const Vocabulary v = Vocabulary::instruction_vocabulary();
  EXPECT_GE(v.size(), 40u);
  EXPECT_LE(v.size(), 100u);
  EXPECT_EQ(v.words()[0], Vocabulary::kUnkWord);
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
}

TEST(Embed, ShapeLookupAndFrozen) {
  const ParamSet p = decoder_params(8, 1, 1);
  const Tensor table = p.get("decoder.embedding");
  const Tensor x = embed_instruction({3, 5, 3}, table);
  EXPECT_EQ(x.shape(), (Shape{3, 8}));
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(x.at(0, j), x.at(2, j));
    EXPECT_EQ(x.at(1, j), table.at(5, j));
  }
  EXPECT_FALSE(x.requires_grad());
  EXPECT_FALSE(p.is_trainable("decoder.embedding"));
  EXPECT_THROW(embed_instruction({12}, table), ContractError);
}

TEST(GatedCrossAttention, ZeroGateIsBitwiseIdentity) {
  const DecoderStack s = DecoderStack::from(decoder_params(8, 1, 2));
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor xl = random_tokens(rng, 5, 8);
    EXPECT_EQ(vec(gated_cross_attention(xl, random_tokens(rng, 6, 8), s.layers[0])), vec(xl));
  }
}

TEST(GatedCrossAttention, MatchesCompositionOracle) {
  const ParamSet p = decoder_params(8, 1, 4);
  set_scalar(p, "decoder.0.cross.alpha", 0.7);
  const DecoderStack s = DecoderStack::from(p);
  const DecoderLayerParams& l = s.layers[0];
  Rng rng(5);
  const Tensor xl = random_tokens(rng, 4, 8), xv = random_tokens(rng, 6, 8);
  const auto q = oracle::matmul(oracle::from(xl), oracle::from(l.cross_wq));
  const auto k = oracle::matmul(oracle::from(xv), oracle::from(l.cross_wk));
  const auto v = oracle::matmul(oracle::from(xv), oracle::from(l.cross_wv));
  const auto branch = oracle::mlp(oracle::attention(q, k, v), l.cross_w1, l.cross_b1, l.cross_w2, l.cross_b2);
  const auto expected = oracle::add(oracle::scale(branch, std::tanh(0.7L)), oracle::from(xl));
  EXPECT_LE(oracle::max_abs_diff(expected, gated_cross_attention(xl, xv, l)), 1e-12L);
}

TEST(GatedCrossAttention, SaturatedGateStaysBelowOne) {
  const ParamSet p = decoder_params(8, 1, 6);
  set_scalar(p, "decoder.0.cross.alpha", 50.0);
  const DecoderStack s = DecoderStack::from(p);
  const Tensor gate = ops::tanh(s.layers[0].alpha);
  EXPECT_LE(gate.item(), 1.0);
  EXPECT_GT(gate.item(), 0.999);
  set_scalar(p, "decoder.0.cross.alpha", -50.0);
  EXPECT_GE(ops::tanh(s.layers[0].alpha).item(), -1.0);
}

TEST(GatedCrossAttention, DimMismatchIsADimensionError) {
  const DecoderStack s = DecoderStack::from(decoder_params(8, 1, 7));
  Rng rng(8);
  EXPECT_THROW(gated_cross_attention(random_tokens(rng, 3, 8), random_tokens(rng, 3, 6), s.layers[0]), DimensionError);
  EXPECT_THROW(self_attention_block(random_tokens(rng, 3, 5), s.layers[0]), DimensionError);
}

TEST(SelfAttentionBlock, SingleTokenMatchesFormula) {
  const DecoderStack s = DecoderStack::from(decoder_params(8, 1, 9));
  const DecoderLayerParams& l = s.layers[0];
  Rng rng(10);
  const Tensor x = random_tokens(rng, 1, 8);
  // one token: attention weight is 1, so A(...) = x W_V
  const auto value = oracle::matmul(oracle::from(x), oracle::from(l.self_wv));
  const auto expected = oracle::add(oracle::mlp(value, l.self_w1, l.self_b1, l.self_w2, l.self_b2), oracle::from(x));
  EXPECT_LE(oracle::max_abs_diff(expected, self_attention_block(x, l)), 1e-12L);
}

TEST(SelfAttentionBlock, ZeroWeightsPassThroughAndShape) {
  DecoderStack s = DecoderStack::from(decoder_params(8, 1, 11));
  DecoderLayerParams l = s.layers[0];
  for (Tensor* t : {&l.self_wq, &l.self_wk, &l.self_wv, &l.self_w1, &l.self_b1, &l.self_w2, &l.self_b2})
    *t = Tensor::zeros(t->shape());
  Rng rng(12);
  const Tensor x = random_tokens(rng, 3, 8);
  EXPECT_EQ(vec(self_attention_block(x, l)), vec(x));
  EXPECT_EQ(self_attention_block(random_tokens(rng, 7, 8), s.layers[0]).shape(), (Shape{7, 8}));
}

TEST(Decode, OneLayerIsOneApplication) {
  const DecoderStack s = DecoderStack::from(decoder_params(8, 1, 13));
  Rng rng(14);
  const Tensor x = random_tokens(rng, 4, 8), xv = random_tokens(rng, 6, 8);
  EXPECT_EQ(vec(decode(x, xv, s)), vec(self_attention_block(gated_cross_attention(x, xv, s.layers[0]), s.layers[0])));
}

TEST(Decode, TwoLayersMatchManualComposition) {
  const ParamSet p = decoder_params(8, 2, 15);
  set_scalar(p, "decoder.0.cross.alpha", 0.3);
  set_scalar(p, "decoder.1.cross.alpha", -0.4);
  const DecoderStack s = DecoderStack::from(p);
  Rng rng(16);
  const Tensor x = random_tokens(rng, 4, 8), xv = random_tokens(rng, 6, 8);
  oracle::Mat h = oracle::from(x);
  const oracle::Mat v = oracle::from(xv);
  for (const DecoderLayerParams& l : s.layers) {
    const auto a = oracle::attention(oracle::matmul(h, oracle::from(l.cross_wq)), oracle::matmul(v, oracle::from(l.cross_wk)),
                                     oracle::matmul(v, oracle::from(l.cross_wv)));
    h = oracle::add(oracle::scale(oracle::mlp(a, l.cross_w1, l.cross_b1, l.cross_w2, l.cross_b2), std::tanh(static_cast<long double>(l.alpha.item()))), h);
    const auto sa = oracle::attention(oracle::matmul(h, oracle::from(l.self_wq)), oracle::matmul(h, oracle::from(l.self_wk)),
                                      oracle::matmul(h, oracle::from(l.self_wv)));
    h = oracle::add(oracle::mlp(sa, l.self_w1, l.self_b1, l.self_w2, l.self_b2), h);
  }
  EXPECT_LE(oracle::max_abs_diff(h, decode(x, xv, s)), 1e-11L);
}

TEST(Decode, ZeroGatesMakeVisualTokensIrrelevant) {
  const DecoderStack s = DecoderStack::from(decoder_params(8, 2, 17));
  Rng rng(18);
  const Tensor x = random_tokens(rng, 4, 8);
  const Tensor rgb = random_tokens(rng, 3, 8);
  const Tensor fused = ops::concat_rows(rgb, random_tokens(rng, 3, 8));
  const Tensor duplicated = ops::concat_rows(rgb, rgb);
  EXPECT_EQ(vec(decode(x, fused, s)), vec(decode(x, duplicated, s)));
}

TEST(Decode, ZeroLayersRejected) {
  ParamSet p;
  Rng rng(1);
  EXPECT_THROW(init_decoder(p, {8, 0}, 5, rng), RangeError);
}

TEST(Decode, TrainablePathsPassGradCheckAndFrozenPathsGetNoGradient) {
  ParamSet p = decoder_params(6, 2, 19);
  set_scalar(p, "decoder.0.cross.alpha", 0.5);
  set_scalar(p, "decoder.1.cross.alpha", -0.3);
  Rng rng(20);
  const Tensor x = random_tokens(rng, 3, 6), xv = random_tokens(rng, 4, 6);
  auto loss = [&](const ParamSet& ps) {
    const Tensor out = decode(x, xv, DecoderStack::from(ps));
    return ops::sum(ops::mul(out, out));
  };
  const auto report = grad_check(loss, p, 1e-6);
  EXPECT_LT(report.max_relative_error, 1e-4);
  EXPECT_GT(report.entries_checked, 0u);

  backward(loss(p), p);
  for (const auto& [name, e] : p) {
    const bool frozen = name.find(".self") != std::string::npos || name == "decoder.embedding";
    EXPECT_EQ(e.trainable, !frozen) << name;
    if (frozen) EXPECT_FALSE(e.tensor.has_grad()) << name;
  }
}
