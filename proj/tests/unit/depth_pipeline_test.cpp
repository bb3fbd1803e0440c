#include <gtest/gtest.h>

#include <cmath>

#include "rfpx/depth/depth_pipeline.hpp"
#include "rfpx/error.hpp"
#include "rfpx/rng.hpp"

using namespace rfpx;

namespace {

DepthMap random_map(Rng& rng, std::size_t h, std::size_t w, double lo, double hi) {
  std::vector<double> v(h * w);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return DepthMap(h, w, std::move(v));
}

NormalizedDepth single(double d, double lo, double hi) {
  return normalize_depth(DepthMap(1, 1, {d}), DepthStats{lo, hi, 0.5, 0.5});
}

}  // namespace

TEST(DepthMapTest, RejectsInvalid) {
  EXPECT_THROW(DepthMap(0, 2, {}), DimensionError);
  EXPECT_THROW(DepthMap(1, 2, {1.0}), DimensionError);
  EXPECT_THROW(DepthMap(1, 1, {-0.1}), NumericInputError);
  EXPECT_THROW(DepthMap(1, 1, {NAN}), NumericInputError);
}

TEST(Replicate3, ThreeIdenticalChannels) {
  const auto img = replicate3(DepthMap(2, 2, {1, 2, 3, 4}));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(img.at(c, 0, 0), 1.0);
    EXPECT_EQ(img.at(c, 0, 1), 2.0);
    EXPECT_EQ(img.at(c, 1, 0), 3.0);
    EXPECT_EQ(img.at(c, 1, 1), 4.0);
  }
}

TEST(ComputeStats, FourPixelExample) {
  const std::vector<DepthMap> data = {DepthMap(1, 2, {0, 4}), DepthMap(1, 2, {2, 6})};
  const auto s = compute_stats(data);
  EXPECT_EQ(s.d_min, 0.0);
  EXPECT_EQ(s.d_max, 6.0);
  // Normalized values {0, 2/3, 1/3, 1}: mean 1/2, population variance 5/36.
  EXPECT_NEAR(s.mu, 0.5, 1e-12);
  EXPECT_NEAR(s.sigma, std::sqrt(5.0 / 36.0), 1e-12);
  EXPECT_NEAR(s.sigma, 0.37268, 1e-5);
}

TEST(ComputeStats, TwoPointSymmetry) {
  const std::vector<DepthMap> data = {DepthMap(1, 2, {0, 1})};
  const auto s = compute_stats(data);
  EXPECT_EQ(s.d_min, 0.0);
  EXPECT_EQ(s.d_max, 1.0);
  EXPECT_EQ(s.mu, 0.5);
  EXPECT_EQ(s.sigma, 0.5);
}

TEST(ComputeStats, ConstantDatasetIsDegenerate) {
  const std::vector<DepthMap> data = {DepthMap(1, 2, {3, 3}), DepthMap(1, 1, {3})};
  EXPECT_THROW(compute_stats(data), DegenerateRangeError);
}

TEST(NormalizeDepth, MidpointEndpointsAndClamp) {
  EXPECT_EQ(single(2.0, 0, 4).values[0], 0.5);
  EXPECT_EQ(single(0.0, 0, 4).values[0], 0.0);
  EXPECT_EQ(single(4.0, 0, 4).values[0], 1.0);
  EXPECT_EQ(single(5.0, 0, 4).values[0], 1.0);
  EXPECT_THROW(normalize_depth(DepthMap(1, 1, {1}), DepthStats{2, 2, 0, 1}), DegenerateRangeError);
}

TEST(NormalizeDepth, MonotoneInDepth) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(0, 12), b = rng.uniform(0, 12);
    const auto na = single(a, 1.0, 9.0).values[0], nb = single(b, 1.0, 9.0).values[0];
    if (a <= b) EXPECT_LE(na, nb);
    else EXPECT_GE(na, nb);
  }
}

TEST(StandardizeDepth, CenteringAndUnitStep) {
  const DepthStats s{0, 1, 0.4, 0.2};
  const auto z = standardize_depth(NormalizedDepth{1, 2, {0.4, 0.6}}, s);
  EXPECT_EQ(z.image.at(0, 0, 0), 0.0);
  EXPECT_NEAR(z.image.at(0, 0, 1), 1.0, 1e-15);
  EXPECT_THROW(standardize_depth(NormalizedDepth{1, 1, {0.1}}, DepthStats{0, 1, 0, 0}), DegenerateRangeError);
}

TEST(StandardizeDepth, FourPixelExampleHandValues) {
  const std::vector<DepthMap> data = {DepthMap(1, 2, {0, 4}), DepthMap(1, 2, {2, 6})};
  const auto s = compute_stats(data);
  const double sigma = std::sqrt(5.0 / 36.0);
  const auto z = preprocess_depth(data[0], s);
  EXPECT_NEAR(z.image.at(0, 0, 0), (0.0 - 0.5) / sigma, 1e-9);
  EXPECT_NEAR(z.image.at(0, 0, 1), (2.0 / 3.0 - 0.5) / sigma, 1e-9);
}

TEST(StandardizeDepth, SourceDatasetHasZeroMeanUnitStd) {
  Rng rng(12);
  std::vector<DepthMap> data;
  for (int i = 0; i < 6; ++i) data.push_back(random_map(rng, 8, 8, 0.2, 1.4));
  const auto s = compute_stats(data);
  long double total = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& m : data) {
    const auto z = preprocess_depth(m, s);
    for (std::size_t i = 0; i < 64; ++i) {
      total += z.image.data[i];
      ++n;
    }
  }
  const long double mean = total / n;
  for (const auto& m : data) {
    const auto z = preprocess_depth(m, s);
    for (std::size_t i = 0; i < 64; ++i) sq += (z.image.data[i] - mean) * (z.image.data[i] - mean);
  }
  EXPECT_NEAR(static_cast<double>(mean), 0.0, 1e-10);
  EXPECT_NEAR(static_cast<double>(std::sqrt(sq / n)), 1.0, 1e-10);
}

TEST(StandardizeDepth, ChannelsStayIdentical) {
  Rng rng(13);
  const auto m = random_map(rng, 5, 7, 0, 3);
  const auto z = preprocess_depth(m, DepthStats{0, 3, 0.5, 0.3});
  const auto plane = 35u;
  for (std::size_t i = 0; i < plane; ++i) {
    EXPECT_EQ(z.image.data[i], z.image.data[plane + i]);
    EXPECT_EQ(z.image.data[i], z.image.data[2 * plane + i]);
  }
}

TEST(QuantizeU8, EndpointsAndHalfUp) {
  const auto q = quantize_u8(NormalizedDepth{1, 4, {0.0, 1.0, 0.5, 0.501960}});
  EXPECT_EQ(q.values[0], 0);
  EXPECT_EQ(q.values[1], 255);
  EXPECT_EQ(q.values[2], 128);
  EXPECT_EQ(q.values[3], 128);
  EXPECT_THROW(quantize_u8(NormalizedDepth{1, 1, {1.2}}), ContractError);
}

TEST(PixelChangeCount, DirectCounts) {
  const QuantizedDepth a{2, 2, {0, 10, 20, 30}}, b{2, 2, {0, 10, 21, 30}};
  EXPECT_EQ(pixel_change_count(a, a), 0u);
  EXPECT_EQ(pixel_change_count(a, b), 1u);
  EXPECT_EQ(pixel_change_count(b, a), 1u);
  EXPECT_THROW(pixel_change_count(a, QuantizedDepth{1, 4, {0, 0, 0, 0}}), DimensionError);
}

TEST(PixelChangeCount, NarrowRangeSeesCentimeterChange) {
  const DepthMap f0(1, 1, {0.50}), f1(1, 1, {0.51});
  const DepthStats narrow{0, 1, 0.5, 0.5}, wide{0, 10, 0.5, 0.5};
  const auto n0 = quantize_u8(normalize_depth(f0, narrow)), n1 = quantize_u8(normalize_depth(f1, narrow));
  const auto w0 = quantize_u8(normalize_depth(f0, wide)), w1 = quantize_u8(normalize_depth(f1, wide));
  EXPECT_EQ(n0.values[0], 128);
  EXPECT_EQ(n1.values[0], 130);
  EXPECT_EQ(w0.values[0], 13);
  EXPECT_EQ(w1.values[0], 13);
  EXPECT_EQ(pixel_change_count(n0, n1), 1u);
  EXPECT_EQ(pixel_change_count(w0, w1), 0u);
}

// Any change at least one narrow quantization step wide is always counted
// under the narrow range, so the wide range can never count more.
TEST(PixelChangeCount, WiderRangeNeverCountsMoreForStepSizedChanges) {
  Rng rng(14);
  const DepthStats narrow{0, 2, 0.5, 0.3}, wide{0, 20, 0.05, 0.03};
  const double narrow_step = 2.0 / 255.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_map(rng, 6, 6, 0.1, 1.9);
    std::vector<double> moved(a.values().begin(), a.values().end());
    for (auto& v : moved) {
      if (rng.uniform() < 0.5) v += (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(narrow_step, 0.08);
    }
    const DepthMap b(6, 6, moved);
    const auto nc = pixel_change_count(quantize_u8(normalize_depth(a, narrow)), quantize_u8(normalize_depth(b, narrow)));
    const auto wc = pixel_change_count(quantize_u8(normalize_depth(a, wide)), quantize_u8(normalize_depth(b, wide)));
    EXPECT_LE(wc, nc);
    EXPECT_LE(nc, 36u);
  }
}

// Sub-step changes that straddle a wide-grid boundary are the exception.
TEST(PixelChangeCount, SubStepChangeCanFlipOnlyTheWideGrid) {
  const DepthMap a(1, 1, {0.0390}), b(1, 1, {0.0394});
  const DepthStats narrow{0, 2, 0.5, 0.3}, wide{0, 20, 0.05, 0.03};
  EXPECT_EQ(pixel_change_count(quantize_u8(normalize_depth(a, narrow)), quantize_u8(normalize_depth(b, narrow))), 0u);
  EXPECT_EQ(pixel_change_count(quantize_u8(normalize_depth(a, wide)), quantize_u8(normalize_depth(b, wide))), 1u);
}

TEST(DepthStatsJson, RoundTrip) {
  const DepthStats s{0.05, 1.1, 0.41, 0.27};
  EXPECT_EQ(DepthStats::from_json(s.to_json()), s);
  EXPECT_NE(s.to_json().find("\"d_min\""), std::string::npos);
}
