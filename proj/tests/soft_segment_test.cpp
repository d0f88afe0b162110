#include <gtest/gtest.h>

#include "support.hpp"

namespace stocs {
namespace {

PointCloud line_cloud(std::size_t n) {
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(0.01 * static_cast<double>(i), 0, 0);
    nrm.emplace_back(0, 0, 1);
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

TEST(Segment, UniformWeightsGiveUniformPrior) {
  const auto cloud = line_cloud(8);
  const std::vector<double> w(8, 0.3);
  const auto seg = build_segment(cloud, w, 0.0);
  ASSERT_EQ(seg.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(seg.prior(i), 1.0 / 8.0);
}

TEST(Segment, ZeroWeightsExcluded) {
  const auto cloud = line_cloud(6);
  const std::vector<double> w{3, 1, 0, 0, 0, 0};
  const auto seg = build_segment(cloud, w, 0.0, 1);
  ASSERT_EQ(seg.size(), 2u);
  EXPECT_DOUBLE_EQ(seg.prior(0), 0.75);
  EXPECT_DOUBLE_EQ(seg.prior(1), 0.25);
  EXPECT_EQ(seg.source_indices(), (std::vector<std::uint32_t>{0, 1}));
}

TEST(Segment, PriorProportionalToRawWeights) {
  auto rng = testing::stream(40);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cloud = line_cloud(100);
    std::vector<double> w(100);
    for (auto& x : w) x = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng);
    const double eps = 0.002;
    const auto seg = build_segment(cloud, w, eps);
    double total = 0.0;
    for (const double x : w) total += x;
    double kept = 0.0;
    std::vector<std::uint32_t> expected;
    for (std::uint32_t i = 0; i < w.size(); ++i) {
      if (w[i] / total > eps) {
        expected.push_back(i);
        kept += w[i];
      }
    }
    ASSERT_EQ(seg.source_indices(), expected);
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(seg.prior(k), w[expected[k]] / kept, 1e-12);
  }
}

TEST(Segment, RaisingThresholdNeverAddsPoints) {
  auto rng = testing::stream(41);
  const auto cloud = line_cloud(200);
  std::vector<double> w(200);
  for (auto& x : w) x = uniform01(rng);
  std::vector<std::uint32_t> previous = build_segment(cloud, w, 0.0).source_indices();
  for (const double eps : {0.001, 0.003, 0.005, 0.007}) {
    const auto current = build_segment(cloud, w, eps).source_indices();
    EXPECT_TRUE(std::includes(previous.begin(), previous.end(), current.begin(), current.end()));
    previous = current;
  }
}

TEST(Segment, PriorInvariantToWeightScaling) {
  auto rng = testing::stream(42);
  const auto cloud = line_cloud(50);
  std::vector<double> w(50);
  for (auto& x : w) x = uniform01(rng);
  std::vector<double> scaled = w;
  for (auto& x : scaled) x *= 37.5;
  const auto a = build_segment(cloud, w, 0.01);
  const auto b = build_segment(cloud, scaled, 0.01);
  ASSERT_EQ(a.source_indices(), b.source_indices());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.prior(i), b.prior(i), 1e-15);
}

TEST(Segment, Errors) {
  const auto cloud = line_cloud(5);
  EXPECT_THROW(build_segment(cloud, std::vector<double>(4, 1.0), 0.0), Error);
  EXPECT_THROW(build_segment(cloud, std::vector<double>{1, 1, -1, 1, 1}, 0.0), Error);
  try {
    build_segment(cloud, std::vector<double>(5, 0.0), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroWeights);
  }
  try {
    build_segment(cloud, std::vector<double>{1, 0, 0, 0, 0}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SegmentTooSmall);
  }
}

TEST(Segment, UniformPriorOverThresholdedPoints) {
  const auto cloud = line_cloud(6);
  const std::vector<double> w{0.9, 0.1, 0.5, 0.41, 0.4, 0.7};
  const auto seg = build_uniform_segment(cloud, w, 0.4);
  EXPECT_EQ(seg.source_indices(), (std::vector<std::uint32_t>{0, 2, 3, 5}));
  for (std::size_t i = 0; i < seg.size(); ++i) EXPECT_DOUBLE_EQ(seg.prior(i), 0.25);
}

TEST(Sampling, SinglePoint) {
  const auto cloud = line_cloud(1);
  const auto seg = build_segment(cloud, std::vector<double>{2.0}, 0.0, 1);
  auto rng = testing::stream(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(seg.sample(rng), 0u);
}

TEST(Sampling, EmpiricalFrequencyMatchesPrior) {
  const auto cloud = line_cloud(2);
  const auto seg = build_segment(cloud, std::vector<double>{3, 1}, 0.0, 1);
  auto rng = testing::stream(44);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) zeros += seg.sample(rng) == 0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.75, 0.01);
}

TEST(Sampling, DeterministicGivenStream) {
  const auto cloud = line_cloud(20);
  std::vector<double> w(20);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 + static_cast<double>(i);
  const auto seg = build_segment(cloud, w, 0.0);
  auto a = make_stream(9, 3);
  auto b = make_stream(9, 3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(seg.sample(a), seg.sample(b));
}

}  // namespace
}  // namespace stocs
