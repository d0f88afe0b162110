#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/random.hpp"
#include "stocs/soft_segment.hpp"

namespace stocs {

// Synthetic test objects, roughly 20 cm across, sampled at 4-6 mm.

/// Closed box surface on a centered regular grid per face.
inline PointCloud make_box_model(double sx = 0.2, double sy = 0.13, double sz = 0.08, double spacing = 0.006) {
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  const std::array<double, 3> half{sx / 2, sy / 2, sz / 2};
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const auto na = std::max(1, static_cast<int>(std::round(2 * half[a] / spacing)));
    const auto nb = std::max(1, static_cast<int>(std::round(2 * half[b] / spacing)));
    for (const double side : {-1.0, 1.0}) {
      for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
          Point3 p;
          p[axis] = side * half[axis];
          p[a] = -half[a] + (i + 0.5) * 2 * half[a] / na;
          p[b] = -half[b] + (j + 0.5) * 2 * half[b] / nb;
          UnitVec3 n = UnitVec3::Zero();
          n[axis] = side;
          pts.push_back(p);
          nrm.push_back(n);
        }
      }
    }
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

/// Surface of revolution about z with a bulging profile, closed by two caps.
inline PointCloud make_revolve_model(double radius = 0.045, double height = 0.18, double spacing = 0.005) {
  const auto profile = [&](double z) { return radius * (1.0 + 0.25 * std::cos(std::numbers::pi * z / height)); };
  const auto slope = [&](double z) {
    return -radius * 0.25 * std::numbers::pi / height * std::sin(std::numbers::pi * z / height);
  };
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  const int rings = std::max(2, static_cast<int>(std::round(height / spacing)));
  for (int k = 0; k < rings; ++k) {
    const double z = -height / 2 + (k + 0.5) * height / rings;
    const double r = profile(z);
    const int around = std::max(6, static_cast<int>(std::round(2 * std::numbers::pi * r / spacing)));
    for (int i = 0; i < around; ++i) {
      const double phi = 2 * std::numbers::pi * i / around;
      pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
      nrm.emplace_back(std::cos(phi), std::sin(phi), -slope(z));
    }
  }
  const double cap_r = profile(height / 2);
  const int cap_rings = std::max(1, static_cast<int>(std::round(cap_r / spacing)));
  for (const double side : {-1.0, 1.0}) {
    for (int k = 0; k < cap_rings; ++k) {
      const double r = (k + 0.5) * cap_r / cap_rings;
      const int around = std::max(3, static_cast<int>(std::round(2 * std::numbers::pi * r / spacing)));
      for (int i = 0; i < around; ++i) {
        const double phi = 2 * std::numbers::pi * i / around;
        pts.emplace_back(r * std::cos(phi), r * std::sin(phi), side * height / 2);
        nrm.emplace_back(0.0, 0.0, side);
      }
    }
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

/// Star-shaped lumpy solid without rotational symmetry: a tri-axial
/// ellipsoid-like body with two unequal bumps.
inline PointCloud make_blob_model(double radius = 0.1, std::size_t count = 3000) {
  const Eigen::Vector3d bump1 = Eigen::Vector3d(0.6, 0.7, 0.4).normalized();
  const Eigen::Vector3d bump2 = Eigen::Vector3d(-0.5, 0.2, -0.85).normalized();
  const auto surface = [&](const Eigen::Vector3d& d) {
    const double body = 1.0 / std::sqrt(d.x() * d.x() / 1.0 + d.y() * d.y() / 0.45 + d.z() * d.z() / 0.2);
    const double lumps = 0.35 * std::exp(-(d - bump1).squaredNorm() / 0.15) +
                         0.25 * std::exp(-(d - bump2).squaredNorm() / 0.08);
    return Point3(radius * (body + lumps) * d);
  };
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(count);
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    const Eigen::Vector3d d(rho * std::cos(phi), rho * std::sin(phi), z);
    const Eigen::Vector3d helper = std::abs(d.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d t1 = d.cross(helper).normalized();
    const Eigen::Vector3d t2 = d.cross(t1);
    constexpr double h = 1e-5;
    const Eigen::Vector3d du = surface((d + h * t1).normalized()) - surface((d - h * t1).normalized());
    const Eigen::Vector3d dv = surface((d + h * t2).normalized()) - surface((d - h * t2).normalized());
    Eigen::Vector3d n = du.cross(dv);
    if (n.dot(d) < 0) n = -n;
    pts.push_back(surface(d));
    nrm.push_back(n.normalized());
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

/// Rotational symmetries of a model about axes through its centroid.
/// Order 0 denotes a full revolution.
struct Symmetry {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  int order = 2;
};

struct SymmetrySpec {
  std::vector<Symmetry> symmetries;

  /// Throws InvalidSpec unless every symmetry maps the model onto itself
  /// within 2 x resolution.
  void validate(const PointCloud& model) const {
    const Point3 c = centroid(model.points());
    const double tol = 2.0 * model.resolution();
    for (const auto& s : symmetries) {
      if (s.order < 0 || s.order == 1 || !(s.axis.norm() > 0.0)) {
        throw Error(ErrorCode::InvalidSpec, "symmetry needs a nonzero axis and order 0 or >= 2");
      }
      std::vector<double> angles;
      if (s.order == 0) {
        for (int k = 1; k < 12; ++k) angles.push_back(2 * std::numbers::pi * k / 12.0 + 0.1);
      } else {
        for (int k = 1; k < s.order; ++k) angles.push_back(2 * std::numbers::pi * k / s.order);
      }
      for (const double angle : angles) {
        const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, s.axis.normalized()).toRotationMatrix();
        for (const auto& p : model.points()) {
          const auto hit = model.index().nearest(r * (p - c) + c);
          if (std::sqrt(hit->squared_distance) > tol) {
            throw Error(ErrorCode::InvalidSpec, "model is not symmetric under the declared rotation");
          }
        }
      }
    }
  }
};

struct SceneSpec {
  /// Drawn from the seed when unset: uniform random rotation, translation
  /// uniform in a cube of half-width one model diameter.
  std::optional<RigidTransform> ground_truth;
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  double occlusion_fraction = 0.0;
  double prior_inlier_mean = 0.6;
  double prior_outlier_mean = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    const auto bad = [](const char* what) { throw Error(ErrorCode::InvalidSpec, what); };
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be finite and >= 0");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) bad("outlier_fraction must lie in [0, 1)");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0)) bad("occlusion_fraction must lie in [0, 1)");
    if (!(prior_inlier_mean > 0.0 && prior_inlier_mean <= 1.0)) bad("prior_inlier_mean must lie in (0, 1]");
    if (!(prior_outlier_mean > 0.0 && prior_outlier_mean <= 1.0)) bad("prior_outlier_mean must lie in (0, 1]");
  }
};

/// A generated scene: inliers first, then outliers. Normals of inliers are
/// the transformed model normals; outlier normals are random.
struct SyntheticScene {
  PointCloud cloud;
  std::vector<double> weights;
  RigidTransform ground_truth;
  std::size_t inlier_count = 0;
  std::size_t outlier_count = 0;
};

inline constexpr double kWeightSpread = 0.1;

inline SyntheticScene generate_scene(const PointCloud& model, const SceneSpec& spec) {
  spec.validate();
  if (!model.has_normals()) throw Error(ErrorCode::InvalidSpec, "scene model needs normals");
  RngStream rng = make_stream(spec.seed, 0);

  SyntheticScene out;
  if (spec.ground_truth) {
    out.ground_truth = *spec.ground_truth;
  } else {
    const Eigen::Matrix3d r = random_rotation(rng);
    const double reach = diameter(model.points());
    const Eigen::Vector3d t(uniform(rng, -reach, reach), uniform(rng, -reach, reach), uniform(rng, -reach, reach));
    out.ground_truth = RigidTransform(r, t);
  }

  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  for (std::size_t i = 0; i < model.size(); ++i) {
    pts.push_back(out.ground_truth.apply(model.point(i)));
    nrm.push_back(out.ground_truth.apply_normal(model.normal(i)));
  }

  const auto cull = static_cast<std::size_t>(std::floor(spec.occlusion_fraction * static_cast<double>(pts.size())));
  if (cull > 0) {
    const Eigen::Vector3d dir = random_unit_vector(rng);
    std::vector<std::uint32_t> order(pts.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return dir.dot(pts[a]) < dir.dot(pts[b]); });
    order.resize(order.size() - cull);
    std::sort(order.begin(), order.end());
    std::vector<Point3> kept_p;
    std::vector<UnitVec3> kept_n;
    for (const auto i : order) {
      kept_p.push_back(pts[i]);
      kept_n.push_back(nrm[i]);
    }
    pts = std::move(kept_p);
    nrm = std::move(kept_n);
  }
  if (pts.size() < 4) throw Error(ErrorCode::InvalidSpec, "fewer than 4 inliers remain after occlusion");

  if (spec.noise_sigma > 0.0) {
    for (auto& p : pts) {
      for (int k = 0; k < 3; ++k) p[k] += spec.noise_sigma * standard_normal(rng);
    }
  }
  out.inlier_count = pts.size();

  out.outlier_count = static_cast<std::size_t>(
      std::llround(spec.outlier_fraction / (1.0 - spec.outlier_fraction) * static_cast<double>(out.inlier_count)));
  if (out.outlier_count > 0) {
    Eigen::Vector3d lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Eigen::Vector3d mid = 0.5 * (lo + hi);
    const Eigen::Vector3d half = 0.75 * (hi - lo);
    for (std::size_t i = 0; i < out.outlier_count; ++i) {
      Point3 p;
      for (int k = 0; k < 3; ++k) p[k] = uniform(rng, mid[k] - half[k], mid[k] + half[k]);
      pts.push_back(p);
      nrm.push_back(random_unit_vector(rng));
    }
  }

  const auto draw_weight = [&](double mean) {
    return std::clamp(mean + kWeightSpread * standard_normal(rng), 0.01, 1.0);
  };
  out.weights.reserve(pts.size());
  for (std::size_t i = 0; i < out.inlier_count; ++i) out.weights.push_back(draw_weight(spec.prior_inlier_mean));
  for (std::size_t i = 0; i < out.outlier_count; ++i) out.weights.push_back(draw_weight(spec.prior_outlier_mean));

  out.cloud = PointCloud(std::move(pts), std::move(nrm));
  return out;
}

/// Default soft-prior admission threshold for a segment of n points: low
/// enough that every point with a clamped positive weight survives.
inline double default_epsilon(std::size_t n) { return 1e-4 / static_cast<double>(std::max<std::size_t>(n, 1)); }

/// Default raw-weight cut for the hard-segmentation baseline.
inline constexpr double kDefaultHardThreshold = 0.4;

}  // namespace stocs
