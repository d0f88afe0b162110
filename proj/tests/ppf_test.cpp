#include <gtest/gtest.h>

#include "support.hpp"

namespace stocs {
namespace {

using std::numbers::pi;

TEST(Feature, OrthogonalConfigurations) {
  const auto f = compute_ppf({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 0, 1});
  EXPECT_DOUBLE_EQ(f.dist, 1.0);
  EXPECT_NEAR(f.angle_n1_d, pi / 2, 1e-15);
  EXPECT_NEAR(f.angle_n2_d, pi / 2, 1e-15);
  EXPECT_NEAR(f.angle_n1_n2, 0.0, 1e-15);

  const auto g = compute_ppf({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 0});
  EXPECT_DOUBLE_EQ(g.dist, 1.0);
  EXPECT_NEAR(g.angle_n1_d, pi / 2, 1e-15);
  EXPECT_NEAR(g.angle_n2_d, 0.0, 1e-15);
  EXPECT_NEAR(g.angle_n1_n2, pi / 2, 1e-15);
}

TEST(Feature, CoincidentPointsRejected) {
  try {
    compute_ppf({1, 1, 1}, {0, 0, 1}, {1, 1, 1}, {0, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CoincidentPoints);
  }
}

TEST(Feature, MatchesIndependentFormula) {
  auto rng = testing::stream(20);
  for (int i = 0; i < 10000; ++i) {
    const Point3 p1 = testing::random_vector(rng, 1.0);
    const Point3 p2 = testing::random_vector(rng, 1.0);
    const UnitVec3 n1 = random_unit_vector(rng);
    const UnitVec3 n2 = random_unit_vector(rng);
    EXPECT_LT(testing::max_abs_diff(compute_ppf(p1, n1, p2, n2), testing::reference_ppf(p1, n1, p2, n2)), 1e-7);
  }
}

TEST(Feature, RigidInvariance) {
  auto rng = testing::stream(21);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Point3 p1 = testing::random_vector(rng, 0.2);
    const Point3 p2 = testing::random_vector(rng, 0.2);
    const UnitVec3 n1 = random_unit_vector(rng);
    const UnitVec3 n2 = random_unit_vector(rng);
    const auto t = testing::random_transform(rng, 1.0);
    const auto a = compute_ppf(p1, n1, p2, n2);
    const auto b = compute_ppf(t.apply(p1), t.apply_normal(n1), t.apply(p2), t.apply_normal(n2));
    worst = std::max(worst, testing::max_abs_diff(a, b));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Feature, SwappingEndpointsMirrorsAngles) {
  auto rng = testing::stream(22);
  for (int i = 0; i < 1000; ++i) {
    const Point3 p1 = testing::random_vector(rng, 1.0);
    const Point3 p2 = testing::random_vector(rng, 1.0);
    const UnitVec3 n1 = random_unit_vector(rng);
    const UnitVec3 n2 = random_unit_vector(rng);
    const auto a = compute_ppf(p1, n1, p2, n2);
    const auto b = compute_ppf(p2, n2, p1, n1);
    EXPECT_NEAR(a.dist, b.dist, 1e-15);
    EXPECT_NEAR(a.angle_n1_d, pi - b.angle_n2_d, 1e-12);
    EXPECT_NEAR(a.angle_n2_d, pi - b.angle_n1_d, 1e-12);
    EXPECT_NEAR(a.angle_n1_n2, b.angle_n1_n2, 1e-15);
  }
}

TEST(Key, FloorBins) {
  const Discretization disc{0.005, testing::rad(10)};
  const PPF f{0.012, testing::rad(94), testing::rad(3), testing::rad(171)};
  EXPECT_EQ(discretize(f, disc).bins(), (std::array<std::uint32_t, 4>{2, 9, 0, 17}));
  EXPECT_EQ(discretize(PPF{}, disc).bins(), (std::array<std::uint32_t, 4>{0, 0, 0, 0}));
}

TEST(Key, ExactMultiplesLandInTheirBin) {
  const Discretization disc{0.005, testing::rad(10)};
  for (std::uint32_t k = 0; k <= 10; ++k) {
    const PPF f{k * 0.005, 0, 0, 0};
    EXPECT_EQ(discretize(f, disc).dist_bin(), k);
  }
  for (std::uint32_t k = 0; k <= 18; ++k) {
    const PPF f{0, testing::rad(10.0 * k), 0, 0};
    EXPECT_EQ(discretize(f, disc).bins()[1], k);
  }
}

TEST(Key, PackRoundTrip) {
  auto rng = testing::stream(23);
  for (int i = 0; i < 1000; ++i) {
    std::array<std::uint32_t, 4> bins{};
    for (auto& b : bins) b = static_cast<std::uint32_t>(rng() & 0xFFFF);
    EXPECT_EQ(PPFKey::pack(bins).bins(), bins);
    EXPECT_EQ(PPFKey::pack(bins).dist_bin(), bins[0]);
  }
}

TEST(Key, OverflowAndInvalidSteps) {
  const Discretization disc{1e-6, testing::rad(10)};
  EXPECT_THROW(discretize(PPF{1.0, 0, 0, 0}, disc), Error);
  EXPECT_THROW(discretize(PPF{}, Discretization{0.0, 1.0}), Error);
  EXPECT_THROW(discretize(PPF{}, Discretization{0.01, -1.0}), Error);
}

TEST(Voting, SixteenKeysIncludingFloor) {
  const Discretization disc{0.005, testing::rad(10)};
  const PPF f{0.0123, testing::rad(44), testing::rad(96), testing::rad(15)};
  std::array<PPFKey, 16> keys{};
  ASSERT_EQ(voting_keys(f, disc, keys), 16u);
  EXPECT_EQ(keys[0], discretize(f, disc));
  std::set<std::uint64_t> distinct;
  for (const auto& k : keys) {
    distinct.insert(k.value);
    const auto b = k.bins();
    const auto floor = discretize(f, disc).bins();
    for (std::size_t d = 0; d < 4; ++d) EXPECT_LE(std::abs(static_cast<int>(b[d]) - static_cast<int>(floor[d])), 1);
  }
  EXPECT_EQ(distinct.size(), 16u);
}

TEST(Voting, ZeroBinCollapsesDuplicates) {
  const Discretization disc{0.005, testing::rad(10)};
  const PPF f{0.001, testing::rad(1), testing::rad(1), testing::rad(1)};
  std::array<PPFKey, 16> keys{};
  EXPECT_EQ(voting_keys(f, disc, keys), 1u);
}

/// Half-step guarantee: a query within half a step of a voted feature, per
/// dimension, has its floor key among the feature's voted keys.
TEST(Voting, HalfStepPerturbationsFindTheVote) {
  auto rng = testing::stream(24);
  const Discretization disc{0.005, testing::rad(10)};
  for (int i = 0; i < 20000; ++i) {
    const PPF f{uniform(rng, 0.0, 0.3), uniform(rng, 0.0, pi), uniform(rng, 0.0, pi), uniform(rng, 0.0, pi)};
    std::array<PPFKey, 16> keys{};
    const auto n = voting_keys(f, disc, keys);
    PPF q = f;
    q.dist += uniform(rng, -0.49, 0.49) * disc.dist_step;
    q.angle_n1_d += uniform(rng, -0.49, 0.49) * disc.angle_step;
    q.angle_n2_d += uniform(rng, -0.49, 0.49) * disc.angle_step;
    q.angle_n1_n2 += uniform(rng, -0.49, 0.49) * disc.angle_step;
    const auto key = try_discretize(q, disc);
    if (!key) continue;
    EXPECT_NE(std::find(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), *key),
              keys.begin() + static_cast<std::ptrdiff_t>(n));
  }
}

}  // namespace
}  // namespace stocs
