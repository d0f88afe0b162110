#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/spatial_index.hpp"

namespace stocs {

/// Mean displacement of model points between the two poses.
inline double add_metric(std::span<const Point3> model, const RigidTransform& est, const RigidTransform& gt) {
  if (model.empty()) throw Error(ErrorCode::InvalidInput, "ADD of an empty model");
  double sum = 0.0;
  for (const auto& m : model) sum += (est.apply(m) - gt.apply(m)).norm();
  return sum / static_cast<double>(model.size());
}

/// Closest-point variant: each estimated point is matched to the nearest
/// ground-truth point, which forgives symmetric ambiguity.
inline double adds_metric(std::span<const Point3> model, const RigidTransform& est, const RigidTransform& gt) {
  if (model.empty()) throw Error(ErrorCode::InvalidInput, "ADD-S of an empty model");
  std::vector<Point3> target;
  target.reserve(model.size());
  for (const auto& m : model) target.push_back(gt.apply(m));
  const SpatialIndex index(target);
  double sum = 0.0;
  for (const auto& m : model) sum += std::sqrt(index.nearest(est.apply(m))->squared_distance);
  return sum / static_cast<double>(model.size());
}

inline double add_metric(const PointCloud& model, const RigidTransform& est, const RigidTransform& gt) {
  return add_metric(std::span<const Point3>(model.points()), est, gt);
}

inline double adds_metric(const PointCloud& model, const RigidTransform& est, const RigidTransform& gt) {
  return adds_metric(std::span<const Point3>(model.points()), est, gt);
}

/// Normalized area under accuracy(tau) = fraction of errors <= tau for tau in
/// [0, max_threshold]. Integrated exactly: each error e contributes
/// max(0, max_threshold - e).
inline double auc(std::span<const double> errors, double max_threshold) {
  if (errors.empty()) throw Error(ErrorCode::InvalidInput, "AUC of an empty error list");
  if (!(max_threshold > 0.0)) throw Error(ErrorCode::InvalidInput, "AUC threshold must be positive");
  double area = 0.0;
  for (const double e : errors) {
    if (std::isnan(e)) continue;
    area += std::max(0.0, max_threshold - std::max(e, 0.0));
  }
  return area / (static_cast<double>(errors.size()) * max_threshold);
}

}  // namespace stocs
