#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <vector>

#include "stocs/stocs.hpp"

namespace stocs::testing {

inline RngStream stream(std::uint64_t seed) { return make_stream(seed, 0x7e57); }

inline Eigen::Vector3d random_vector(RngStream& rng, double extent) {
  return {uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent)};
}

inline RigidTransform random_transform(RngStream& rng, double max_translation = 1.0) {
  return RigidTransform(random_rotation(rng), random_vector(rng, max_translation));
}

inline PointCloud random_cloud(RngStream& rng, std::size_t n, double extent = 0.1) {
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back(random_vector(rng, extent));
    nrm.push_back(random_unit_vector(rng));
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

/// Angle between two vectors via atan2 of the cross and dot products; an
/// independent formula from the arccos used by the library.
inline double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

inline PPF reference_ppf(const Point3& p1, const UnitVec3& n1, const Point3& p2, const UnitVec3& n2) {
  const Eigen::Vector3d d = p2 - p1;
  return {d.norm(), angle_between(n1, d), angle_between(n2, d), angle_between(n1, n2)};
}

inline double max_abs_diff(const PPF& a, const PPF& b) {
  double m = 0.0;
  const auto x = a.as_array();
  const auto y = b.as_array();
  for (std::size_t i = 0; i < 4; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Rotation angle of a rotation matrix via the quaternion form, independent
/// of the trace formula.
inline double rotation_angle_deg(const Eigen::Matrix3d& r) {
  const Eigen::Quaterniond q(r);
  return deg(2.0 * std::atan2(q.vec().norm(), std::abs(q.w())));
}

}  // namespace stocs::testing
