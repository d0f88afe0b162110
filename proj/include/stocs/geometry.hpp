#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "stocs/error.hpp"
#include "stocs/spatial_index.hpp"

namespace stocs {

/// Position in meters.
using Point3 = Eigen::Vector3d;
/// Direction with unit Euclidean norm.
using UnitVec3 = Eigen::Vector3d;

inline constexpr double kUnitNormTolerance = 1e-6;

inline bool is_unit(const Eigen::Vector3d& v, double tol = kUnitNormTolerance) {
  return std::abs(v.norm() - 1.0) <= tol;
}

/// Points with optional per-point unit normals. The spatial index and the
/// resolution (median nearest-neighbour spacing) are computed once at
/// construction and shared between copies.
class PointCloud {
 public:
  PointCloud() : index_(std::make_shared<SpatialIndex>()) {}

  explicit PointCloud(std::vector<Point3> points, std::vector<UnitVec3> normals = {})
      : points_(std::move(points)), normals_(std::move(normals)) {
    if (!normals_.empty() && normals_.size() != points_.size()) {
      throw Error(ErrorCode::InvalidInput,
                  "normal count " + std::to_string(normals_.size()) + " differs from point count " +
                      std::to_string(points_.size()));
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "point " + std::to_string(i) + " is not finite");
      }
    }
    for (std::size_t i = 0; i < normals_.size(); ++i) {
      const double n = normals_[i].norm();
      if (!std::isfinite(n) || n < 1e-12) {
        throw Error(ErrorCode::InvalidInput, "normal " + std::to_string(i) + " has zero length");
      }
      normals_[i] /= n;
    }
    index_ = std::make_shared<SpatialIndex>(points_);
    resolution_ = compute_resolution();
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  bool has_normals() const { return !points_.empty() && normals_.size() == points_.size(); }

  const std::vector<Point3>& points() const { return points_; }
  const std::vector<UnitVec3>& normals() const { return normals_; }
  const Point3& point(std::size_t i) const { return points_[i]; }
  const UnitVec3& normal(std::size_t i) const { return normals_[i]; }

  double resolution() const { return resolution_; }
  const SpatialIndex& index() const { return *index_; }

 private:
  double compute_resolution() const {
    if (points_.size() < 2) return 0.0;
    std::vector<double> spacing;
    spacing.reserve(points_.size());
    for (const auto& p : points_) {
      const auto nn = index_->knn(p, 2);
      const double d = std::sqrt(nn.back().squared_distance);
      if (d > 0.0) spacing.push_back(d);
    }
    if (spacing.empty()) return 0.0;
    const auto mid = spacing.begin() + static_cast<std::ptrdiff_t>(spacing.size() / 2);
    std::nth_element(spacing.begin(), mid, spacing.end());
    return *mid;
  }

  std::vector<Point3> points_;
  std::vector<UnitVec3> normals_;
  std::shared_ptr<const SpatialIndex> index_;
  double resolution_ = 0.0;
};

inline Point3 centroid(std::span<const Point3> points) {
  Point3 c = Point3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Point3(c / static_cast<double>(points.size()));
}

/// Exact maximum pairwise distance, O(n^2).
inline double diameter(std::span<const Point3> points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

/// Rotation plus translation mapping the model frame into the scene frame.
class RigidTransform {
 public:
  static constexpr double kOrthonormalTolerance = 1e-6;
  static constexpr double kReorthonormalizeThreshold = 1e-9;

  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "rigid transform has non-finite entries");
    }
    const double ortho = orthonormality_error(rotation);
    if (ortho > kOrthonormalTolerance || std::abs(rotation.determinant() - 1.0) > kOrthonormalTolerance) {
      throw Error(ErrorCode::InvalidInput, "rotation is not a proper orthonormal matrix");
    }
    if (ortho > kReorthonormalizeThreshold) rotation_ = nearest_rotation(rotation_);
  }

  static RigidTransform identity() { return {}; }

  /// Homogeneous 4x4 (row-major reading order: [R t; 0 0 0 1]).
  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  UnitVec3 apply_normal(const UnitVec3& n) const { return rotation_ * n; }

  /// (*this ∘ inner)(p) = this(inner(p)).
  RigidTransform compose(const RigidTransform& inner) const {
    RigidTransform out;
    out.rotation_ = rotation_ * inner.rotation_;
    out.translation_ = rotation_ * inner.translation_ + translation_;
    if (orthonormality_error(out.rotation_) > kReorthonormalizeThreshold) {
      out.rotation_ = nearest_rotation(out.rotation_);
    }
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  static double orthonormality_error(const Eigen::Matrix3d& r) {
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  }

  /// Polar factor of `m`, i.e. the closest proper rotation in Frobenius norm.
  static Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

inline Point3 apply(const RigidTransform& t, const Point3& p) { return t.apply(p); }
inline UnitVec3 apply_normal(const RigidTransform& t, const UnitVec3& n) { return t.apply_normal(n); }
inline RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  return outer.compose(inner);
}
inline RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

inline PointCloud transform_cloud(const RigidTransform& t, const PointCloud& cloud) {
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(t.apply(p));
  std::vector<UnitVec3> nrm;
  nrm.reserve(cloud.normals().size());
  for (const auto& n : cloud.normals()) nrm.push_back(t.apply_normal(n));
  return PointCloud(std::move(pts), std::move(nrm));
}

inline constexpr double kDegeneracyTolerance = 1e-9;

/// Least-squares rigid transform taking `src` onto `dst` (Kabsch with
/// determinant correction, so the rotation is always proper).
inline RigidTransform estimate_rigid_transform(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::InvalidInput, "correspondence lists differ in length");
  }
  if (src.size() < 3) {
    throw Error(ErrorCode::DegenerateCorrespondences, "need at least 3 correspondences");
  }
  const Point3 cs = centroid(src);
  const Point3 cd = centroid(dst);

  Eigen::MatrixX3d centered(static_cast<Eigen::Index>(src.size()), 3);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d a = src[i] - cs;
    centered.row(static_cast<Eigen::Index>(i)) = a.transpose();
    h += a * (dst[i] - cd).transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixX3d> spread(centered);
  if (spread.singularValues()(1) <= kDegeneracyTolerance) {
    throw Error(ErrorCode::DegenerateCorrespondences, "source points are collinear or coincident");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d v = svd.matrixV();
  if ((v * svd.matrixU().transpose()).determinant() < 0.0) v.col(2) *= -1.0;
  const Eigen::Matrix3d r = v * svd.matrixU().transpose();
  return RigidTransform(r, cd - r * cs);
}

inline double rms_residual(const RigidTransform& t, std::span<const Point3> src, std::span<const Point3> dst) {
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (t.apply(src[i]) - dst[i]).squaredNorm();
  return src.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(src.size()));
}

/// PCA normals from the `k`-point neighbourhood of each point (the point
/// itself included), oriented toward `viewpoint`.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k,
                                   const Point3& viewpoint = Point3::Zero()) {
  if (k < 3 || k > cloud.size()) {
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs 3 <= k <= |points| (k=" +
                                             std::to_string(k) + ", n=" + std::to_string(cloud.size()) + ")");
  }
  std::vector<UnitVec3> normals;
  normals.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    const auto nn = cloud.index().knn(p, k);
    Point3 c = Point3::Zero();
    for (const auto& n : nn) c += cloud.point(n.index);
    c /= static_cast<double>(nn.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& n : nn) {
      const Eigen::Vector3d d = cloud.point(n.index) - c;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    UnitVec3 normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(viewpoint - p) < 0.0) normal = -normal;
    normals.push_back(normal);
  }
  return PointCloud(cloud.points(), std::move(normals));
}

}  // namespace stocs
