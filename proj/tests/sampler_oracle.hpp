#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "stocs/stocs.hpp"

namespace stocs::testing {

using BaseIndex = std::array<std::uint32_t, 4>;

/// Exact distribution of the bases returned by the sequential sampler,
/// enumerated over every ordered 4-tuple and conditioned on success (a
/// failed pass is retried with fresh randomness). Geometry tests are
/// recomputed here from first principles.
inline std::map<BaseIndex, double> enumerate_base_distribution(const SoftSegment& seg, const ModelDescriptor& desc,
                                                               const SamplerParams& params, PairFilter filter) {
  const auto& c = seg.cloud();
  const auto n = static_cast<std::uint32_t>(seg.size());
  const auto edge = [&](std::uint32_t a, std::uint32_t b) {
    const double d = (c.point(b) - c.point(a)).norm();
    if (d == 0.0) return false;
    if (filter == PairFilter::distance) return desc.has_distance(d);
    return desc.has_feature(compute_ppf(c.point(a), c.normal(a), c.point(b), c.normal(b)));
  };
  const auto far_enough = [&](std::uint32_t a, std::uint32_t b) {
    return (c.point(a) - c.point(b)).norm() >= params.min_pair_dist;
  };
  const auto wide = [&](std::uint32_t apex, std::uint32_t a, std::uint32_t b) {
    const Eigen::Vector3d u = c.point(a) - c.point(apex);
    const Eigen::Vector3d v = c.point(b) - c.point(apex);
    const double theta = std::atan2(u.cross(v).norm(), u.dot(v));
    return theta >= params.eps_angle && theta <= std::numbers::pi - params.eps_angle;
  };
  const auto flat = [&](std::uint32_t a, std::uint32_t b, std::uint32_t q, std::uint32_t p) {
    const Eigen::Vector3d normal = (c.point(b) - c.point(a)).cross(c.point(q) - c.point(a));
    if (normal.norm() == 0.0) return false;
    return std::abs(normal.normalized().dot(c.point(p) - c.point(a))) <= params.eps_plane;
  };

  std::map<BaseIndex, double> out;
  double total = 0.0;
  for (std::uint32_t b1 = 0; b1 < n; ++b1) {
    std::vector<double> w2(n, 0.0);
    for (std::uint32_t p = 0; p < n; ++p) {
      if (p != b1 && far_enough(p, b1) && edge(b1, p)) w2[p] = seg.prior(p);
    }
    double s2 = 0.0;
    for (const double x : w2) s2 += x;
    if (s2 <= 0.0) continue;
    for (std::uint32_t b2 = 0; b2 < n; ++b2) {
      if (w2[b2] <= 0.0) continue;
      std::vector<double> w3(n, 0.0);
      for (std::uint32_t p = 0; p < n; ++p) {
        if (w2[p] > 0.0 && p != b2 && far_enough(p, b2) && wide(b1, b2, p) && edge(b2, p)) w3[p] = w2[p];
      }
      double s3 = 0.0;
      for (const double x : w3) s3 += x;
      if (s3 <= 0.0) continue;
      for (std::uint32_t b3 = 0; b3 < n; ++b3) {
        if (w3[b3] <= 0.0) continue;
        std::vector<double> w4(n, 0.0);
        for (std::uint32_t p = 0; p < n; ++p) {
          if (w3[p] > 0.0 && p != b3 && far_enough(p, b3) && flat(b1, b2, b3, p) && edge(b3, p)) w4[p] = w3[p];
        }
        double s4 = 0.0;
        for (const double x : w4) s4 += x;
        if (s4 <= 0.0) continue;
        for (std::uint32_t b4 = 0; b4 < n; ++b4) {
          if (w4[b4] <= 0.0) continue;
          const double p = seg.prior(b1) * (w2[b2] / s2) * (w3[b3] / s3) * (w4[b4] / s4);
          out[{b1, b2, b3, b4}] += p;
          total += p;
        }
      }
    }
  }
  for (auto& [k, v] : out) v /= total;
  return out;
}

/// Five nearly coplanar oriented points and priors for the distribution
/// check. The model carries the same points but with the fifth normal turned
/// by 60 degrees, so under the feature filter every pair involving the fifth
/// point lacks a model feature while the distance filter still admits it.
/// The fifth point lies on the diagonal from the first to the third, so the
/// wide-angle test prunes that triple.
struct ToySampler {
  SoftSegment segment;
  ModelDescriptor descriptor;
  SamplerParams params;
};

inline ToySampler make_toy_sampler() {
  const std::vector<Point3> pts{{0.0, 0.0, 0.0},
                                {0.11, 0.0, 0.002},
                                {0.1, 0.09, 0.0},
                                {-0.01, 0.1, 0.001},
                                {0.05, 0.045, 0.0}};
  const std::vector<UnitVec3> nrm{UnitVec3(0.1, 0.0, 1.0).normalized(), UnitVec3(0.0, 0.2, 1.0).normalized(),
                                  UnitVec3(-0.1, 0.1, 1.0).normalized(), UnitVec3(0.2, -0.1, 1.0).normalized(),
                                  UnitVec3(0.0, 0.0, 1.0)};
  std::vector<UnitVec3> model_nrm = nrm;
  const double a = 60.0 * std::numbers::pi / 180.0;
  model_nrm[4] = UnitVec3(std::sin(a), 0.0, std::cos(a));
  ToySampler toy;
  toy.descriptor = ModelDescriptor::build(PointCloud(pts, model_nrm));
  const std::vector<double> weights{0.1, 0.3, 0.15, 0.25, 0.2};
  toy.segment = build_segment(PointCloud(pts, nrm), weights, 0.0);
  toy.params.eps_angle = 15.0 * std::numbers::pi / 180.0;
  toy.params.eps_plane = 0.005;
  toy.params.min_pair_dist = 0.02;
  return toy;
}

/// Total-variation distance between the empirical distribution of `draws`
/// bases and the exact one.
inline double total_variation(const std::map<BaseIndex, double>& exact, const std::map<BaseIndex, std::size_t>& counts,
                              std::size_t draws) {
  double tv = 0.0;
  for (const auto& [k, p] : exact) {
    const auto it = counts.find(k);
    const double q = it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(draws);
    tv += std::abs(p - q);
  }
  for (const auto& [k, cnt] : counts) {
    if (!exact.contains(k)) tv += static_cast<double>(cnt) / static_cast<double>(draws);
  }
  return 0.5 * tv;
}

}  // namespace stocs::testing
