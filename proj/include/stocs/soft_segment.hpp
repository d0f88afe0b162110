#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/random.hpp"

namespace stocs {

/// Scene points admitted for one object together with the normalized
/// sampling prior over them.
class SoftSegment {
 public:
  SoftSegment() = default;

  SoftSegment(PointCloud cloud, std::vector<double> raw_weight, std::vector<double> prior, double epsilon,
              std::vector<std::uint32_t> source_index)
      : cloud_(std::move(cloud)),
        raw_weight_(std::move(raw_weight)),
        prior_(std::move(prior)),
        source_index_(std::move(source_index)),
        epsilon_(epsilon) {
    cumulative_.resize(prior_.size());
    std::partial_sum(prior_.begin(), prior_.end(), cumulative_.begin());
  }

  const PointCloud& cloud() const { return cloud_; }
  std::size_t size() const { return cloud_.size(); }
  const std::vector<double>& raw_weights() const { return raw_weight_; }
  const std::vector<double>& prior() const { return prior_; }
  double prior(std::size_t i) const { return prior_[i]; }
  double epsilon() const { return epsilon_; }
  /// Index of each segment point in the scene it was built from.
  const std::vector<std::uint32_t>& source_indices() const { return source_index_; }

  /// Inverse-CDF draw over the prior.
  std::uint32_t sample(RngStream& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    return static_cast<std::uint32_t>(std::min(idx, cumulative_.size() - 1));
  }

 private:
  PointCloud cloud_;
  std::vector<double> raw_weight_;
  std::vector<double> prior_;
  std::vector<double> cumulative_;
  std::vector<std::uint32_t> source_index_;
  double epsilon_ = 0.0;
};

namespace detail {

inline SoftSegment assemble_segment(const PointCloud& scene, std::span<const double> weights,
                                    const std::vector<std::uint32_t>& keep, std::vector<double> prior,
                                    double epsilon) {
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  std::vector<double> raw;
  pts.reserve(keep.size());
  raw.reserve(keep.size());
  for (const auto i : keep) {
    pts.push_back(scene.point(i));
    if (scene.has_normals()) nrm.push_back(scene.normal(i));
    raw.push_back(weights[i]);
  }
  return SoftSegment(PointCloud(std::move(pts), std::move(nrm)), std::move(raw), std::move(prior), epsilon, keep);
}

inline void check_weights(const PointCloud& scene, std::span<const double> weights) {
  if (weights.size() != scene.size()) {
    throw Error(ErrorCode::InvalidInput, "weight count " + std::to_string(weights.size()) +
                                             " differs from point count " + std::to_string(scene.size()));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw Error(ErrorCode::NonFiniteValue, "weight " + std::to_string(i));
    if (weights[i] < 0.0) throw Error(ErrorCode::InvalidInput, "negative weight at " + std::to_string(i));
  }
}

}  // namespace detail

/// Normalizes raw weights over all points, admits the points whose
/// probability exceeds `epsilon`, and renormalizes over the survivors.
inline SoftSegment build_segment(const PointCloud& scene, std::span<const double> weights, double epsilon,
                                 std::size_t min_points = 4) {
  detail::check_weights(scene, weights);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroWeights, "all point weights are zero");

  std::vector<std::uint32_t> keep;
  double kept_total = 0.0;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (weights[i] / total > epsilon) {
      keep.push_back(i);
      kept_total += weights[i];
    }
  }
  if (keep.size() < min_points || keep.empty()) {
    throw Error(ErrorCode::SegmentTooSmall, std::to_string(keep.size()) + " points survive the threshold");
  }
  std::vector<double> prior;
  prior.reserve(keep.size());
  for (const auto i : keep) prior.push_back(weights[i] / kept_total);
  return detail::assemble_segment(scene, weights, keep, std::move(prior), epsilon);
}

/// Hard-segmentation baseline: keeps points whose raw weight exceeds
/// `threshold` and gives every survivor the same prior.
inline SoftSegment build_uniform_segment(const PointCloud& scene, std::span<const double> weights, double threshold,
                                         std::size_t min_points = 4) {
  detail::check_weights(scene, weights);
  std::vector<std::uint32_t> keep;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > threshold) keep.push_back(i);
  }
  if (keep.size() < min_points || keep.empty()) {
    throw Error(ErrorCode::SegmentTooSmall, std::to_string(keep.size()) + " points pass the hard threshold");
  }
  std::vector<double> prior(keep.size(), 1.0 / static_cast<double>(keep.size()));
  return detail::assemble_segment(scene, weights, keep, std::move(prior), threshold);
}

inline std::uint32_t sample_point(const SoftSegment& seg, RngStream& rng) { return seg.sample(rng); }

}  // namespace stocs
