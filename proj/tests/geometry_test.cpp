#include <gtest/gtest.h>

#include "support.hpp"

namespace stocs {
namespace {

using testing::random_transform;
using testing::stream;

TEST(RigidFit, IdenticalPointsGiveIdentity) {
  const std::vector<Point3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto t = estimate_rigid_transform(src, src);
  EXPECT_LT((t.rotation() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation().norm(), 1e-12);
  EXPECT_LT(rms_residual(t, src, src), 1e-12);
}

TEST(RigidFit, PureTranslation) {
  const std::vector<Point3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Point3> dst;
  for (const auto& p : src) dst.push_back(p + Eigen::Vector3d(1, 2, 3));
  const auto t = estimate_rigid_transform(src, dst);
  EXPECT_LT((t.rotation() - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT((t.translation() - Eigen::Vector3d(1, 2, 3)).norm(), 1e-12);
}

TEST(RigidFit, RecoversRandomForwardTransforms) {
  auto rng = stream(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto truth = random_transform(rng, 2.0);
    std::vector<Point3> src, dst;
    const int n = 3 + trial % 20;
    for (int i = 0; i < n; ++i) {
      src.push_back(testing::random_vector(rng, 1.0));
      dst.push_back(truth.rotation() * src.back() + truth.translation());
    }
    const auto t = estimate_rigid_transform(src, dst);
    EXPECT_LT((t.matrix() - truth.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(rms_residual(t, src, dst), 1e-9);
  }
}

TEST(RigidFit, ReflectionCorrectedToProperRotation) {
  const std::vector<Point3> src{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  std::vector<Point3> dst;
  for (const auto& p : src) dst.emplace_back(-p.x(), p.y(), p.z());
  const auto t = estimate_rigid_transform(src, dst);
  EXPECT_NEAR(t.rotation().determinant(), 1.0, 1e-12);
}

TEST(RigidFit, DegenerateInputsRejected) {
  const std::vector<Point3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  try {
    estimate_rigid_transform(line, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCorrespondences);
  }
  const std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(estimate_rigid_transform(two, two), Error);
  const std::vector<Point3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(estimate_rigid_transform(three, two), Error);
}

TEST(Transform, IdentityAndInverse) {
  auto rng = stream(2);
  const Point3 p(0.3, -0.2, 0.5);
  EXPECT_EQ(apply(RigidTransform::identity(), p), p);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_transform(rng);
    const auto id = compose(t, invert(t));
    EXPECT_LT((id.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Transform, ComposeMatchesMatrixProduct) {
  auto rng = stream(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    EXPECT_LT((compose(a, b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    const Point3 p = testing::random_vector(rng, 1.0);
    EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
  }
}

TEST(Transform, NormalsStayUnit) {
  auto rng = stream(4);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_transform(rng);
    EXPECT_NEAR(apply_normal(t, random_unit_vector(rng)).norm(), 1.0, 1e-12);
  }
}

TEST(Transform, LongCompositionChainsStayOrthonormal) {
  auto rng = stream(5);
  RigidTransform acc;
  for (int i = 0; i < 1000; ++i) acc = acc.compose(random_transform(rng, 0.1));
  const Eigen::Matrix3d r = acc.rotation();
  EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
}

TEST(Transform, RejectsImproperRotation) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = -1;
  EXPECT_THROW(RigidTransform(m, Eigen::Vector3d::Zero()), Error);
  m = 2.0 * Eigen::Matrix3d::Identity();
  EXPECT_THROW(RigidTransform(m, Eigen::Vector3d::Zero()), Error);
}

TEST(PointCloudTest, ValidatesInput) {
  EXPECT_THROW(PointCloud({Point3(0, 0, 0)}, {UnitVec3(0, 0, 1), UnitVec3(0, 0, 1)}), Error);
  EXPECT_THROW(PointCloud({Point3(0, 0, 0)}, {UnitVec3(0, 0, 0)}), Error);
  EXPECT_THROW(PointCloud({Point3(std::nan(""), 0, 0)}), Error);
  const PointCloud c({Point3(0, 0, 0)}, {UnitVec3(0, 0, 2)});
  EXPECT_NEAR(c.normal(0).norm(), 1.0, 1e-15);
}

TEST(Normals, PlaneGivesVerticalNormals) {
  auto rng = stream(6);
  std::vector<Point3> pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0);
  for (const std::size_t k : {3u, 8u, 30u}) {
    const auto c = estimate_normals(PointCloud(pts), k, Point3(0, 0, 5));
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT(testing::deg(testing::angle_between(c.normal(i), UnitVec3(0, 0, 1))), 5.0);
    }
  }
}

TEST(Normals, FullNeighbourhoodGivesOneNormal) {
  auto rng = stream(7);
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0);
  const auto c = estimate_normals(PointCloud(pts), pts.size(), Point3(0, 0, 1));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((c.normal(i) - c.normal(0)).norm(), 1e-12);
}

TEST(Normals, SphereNormalsPointToInteriorViewpoint) {
  auto rng = stream(8);
  std::vector<Point3> pts;
  for (int i = 0; i < 800; ++i) pts.push_back(random_unit_vector(rng));
  const auto c = estimate_normals(PointCloud(pts), 10, Point3::Zero());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_GE(c.normal(i).dot(-c.point(i)), 0.0);
}

TEST(Normals, InvalidNeighbourhoodSize) {
  const PointCloud c({Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)});
  EXPECT_THROW(estimate_normals(c, 2), Error);
  EXPECT_THROW(estimate_normals(c, 4), Error);
}

TEST(SpatialIndexTest, NearestMatchesBruteForce) {
  auto rng = stream(9);
  for (int cloud = 0; cloud < 100; ++cloud) {
    const auto n = 1 + static_cast<std::size_t>(uniform(rng, 0, 500));
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(testing::random_vector(rng, 1.0));
    const SpatialIndex index(pts);
    for (int q = 0; q < 20; ++q) {
      const Point3 query = testing::random_vector(rng, 1.2);
      std::uint32_t best = 0;
      for (std::uint32_t i = 1; i < n; ++i) {
        if ((pts[i] - query).squaredNorm() < (pts[best] - query).squaredNorm()) best = i;
      }
      const auto hit = index.nearest(query);
      ASSERT_TRUE(hit);
      EXPECT_EQ(hit->squared_distance, (pts[best] - query).squaredNorm());
    }
  }
}

TEST(SpatialIndexTest, RadiusAndKnnMatchBruteForce) {
  auto rng = stream(10);
  std::vector<Point3> pts;
  for (int i = 0; i < 400; ++i) pts.push_back(testing::random_vector(rng, 1.0));
  const SpatialIndex index(pts);
  for (int q = 0; q < 50; ++q) {
    const Point3 query = testing::random_vector(rng, 1.0);
    std::vector<std::uint32_t> expected;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - query).squaredNorm() <= 0.3 * 0.3) expected.push_back(i);
    }
    EXPECT_EQ(index.radius_search(query, 0.3), expected);
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - query).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    const auto knn = index.knn(query, 7);
    ASSERT_EQ(knn.size(), 7u);
    for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(knn[k].index, all[k].second);
  }
}

TEST(RadiusGridTest, AgreesWithTreeWithinRadius) {
  auto rng = stream(11);
  std::vector<Point3> pts;
  for (int i = 0; i < 600; ++i) pts.push_back(testing::random_vector(rng, 0.1));
  const double radius = 0.012;
  const auto grid = RadiusGrid::try_build(pts, radius);
  ASSERT_TRUE(grid);
  const SpatialIndex index(pts);
  for (int q = 0; q < 2000; ++q) {
    const Point3 query = testing::random_vector(rng, 0.13);
    const auto a = grid->nearest_within(query);
    const auto b = index.nearest_within(query, radius);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->index, b->index);
      EXPECT_EQ(a->squared_distance, b->squared_distance);
    }
  }
}

TEST(CloudSummary, CentroidAndDiameter) {
  const std::vector<Point3> pts{{0, 0, 0}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2}};
  EXPECT_LT((centroid(pts) - Point3(0.5, 0.5, 0.5)).norm(), 1e-15);
  EXPECT_NEAR(diameter(pts), 2.0 * std::sqrt(2.0), 1e-15);
}

}  // namespace
}  // namespace stocs
