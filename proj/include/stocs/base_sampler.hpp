#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stocs/descriptor.hpp"
#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/ppf.hpp"
#include "stocs/random.hpp"
#include "stocs/soft_segment.hpp"

namespace stocs {

/// How point pairs are compared against the model: full point-pair feature,
/// or distance only (plain 4-point congruent sets baseline).
enum class PairFilter { ppf, distance };

struct SamplerParams {
  /// Minimum interior angle at b1 between (b2 - b1) and (b3 - b1), radians.
  double eps_angle = 15.0 * std::numbers::pi / 180.0;
  /// Maximum distance of b4 from plane(b1, b2, b3), meters.
  double eps_plane = 0.01;
  /// Minimum separation between any two base points, meters.
  double min_pair_dist = 0.0;
  /// Attempts before giving up with NoValidBase.
  int retries = 20;

  void validate() const {
    if (!(eps_angle > 0.0 && eps_angle < std::numbers::pi / 2)) {
      throw Error(ErrorCode::InvalidConfig, "eps_angle must lie in (0, pi/2)");
    }
    if (!(eps_plane > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps_plane must be positive");
    if (!(min_pair_dist >= 0.0)) throw Error(ErrorCode::InvalidConfig, "min_pair_dist must be non-negative");
    if (retries < 1) throw Error(ErrorCode::InvalidConfig, "retries must be at least 1");
  }

  /// eps_plane = max(1 cm, 2 x segment resolution); min_pair_dist = 0.15 x model diameter.
  static SamplerParams defaults_for(const SoftSegment& seg, const ModelDescriptor& desc) {
    SamplerParams p;
    p.eps_plane = std::max(0.01, 2.0 * seg.cloud().resolution());
    p.min_pair_dist = 0.15 * desc.model_diameter();
    return p;
  }
};

/// Four segment points in sampling order, with a snapshot of their geometry.
struct Base {
  std::array<std::uint32_t, 4> index{};
  std::array<Point3, 4> point;
  std::array<UnitVec3, 4> normal;

  static Base from_segment(const SoftSegment& seg, const std::array<std::uint32_t, 4>& idx) {
    Base b;
    b.index = idx;
    for (std::size_t i = 0; i < 4; ++i) {
      b.point[i] = seg.cloud().point(idx[i]);
      b.normal[i] = seg.cloud().normal(idx[i]);
    }
    return b;
  }
};

/// Edge potential: 1 when the directed pair (a -> b) exhibits a feature that
/// occurs on the model, else 0.
inline bool edge_potential(const ModelDescriptor& desc, PairFilter filter, const Point3& pa, const UnitVec3& na,
                           const Point3& pb, const UnitVec3& nb) {
  const double dist = (pb - pa).norm();
  if (!(dist > kCoincidentDistance)) return false;
  if (filter == PairFilter::distance) return desc.has_distance(dist);
  return desc.has_feature(compute_ppf(pa, na, pb, nb));
}

/// Interior angle at `apex`, folded into [0, pi/2] so that both narrow and
/// near-straight configurations count as degenerate.
inline double folded_angle(const Point3& apex, const Point3& a, const Point3& b) {
  const Eigen::Vector3d u = a - apex;
  const Eigen::Vector3d v = b - apex;
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu <= 0.0 || nv <= 0.0) return 0.0;
  const double theta = std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
  return std::min(theta, std::numbers::pi - theta);
}

/// Unsigned distance of `p` from the plane through a, b, c; infinity when the
/// three points are collinear.
inline double plane_distance(const Point3& a, const Point3& b, const Point3& c, const Point3& p) {
  const Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len <= 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(n.dot(p - a)) / len;
}

namespace detail {

/// Draws from unnormalized weights by linear inverse-CDF; nullopt when the
/// support is empty.
inline std::optional<std::uint32_t> draw_weighted(std::span<const double> w, RngStream& rng) {
  double total = 0.0;
  for (const double x : w) total += x;
  if (!(total > 0.0)) return std::nullopt;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::optional<std::uint32_t> last;
  for (std::uint32_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace detail

/// One pass of the sequential base sampler. b1 follows the prior; each later
/// point follows the prior times the edge potentials against every point
/// already chosen, with the wide-angle, coplanarity and separation pruning
/// applied before b3 and b4. Returns nullopt when a conditional distribution
/// has empty support. `scratch` is resized as needed.
inline std::optional<Base> try_select_base(const SoftSegment& seg, const ModelDescriptor& desc,
                                           const SamplerParams& params, PairFilter filter, RngStream& rng,
                                           std::vector<double>& scratch) {
  const auto& cloud = seg.cloud();
  const std::size_t n = cloud.size();
  if (n < 4) return std::nullopt;
  scratch.assign(seg.prior().begin(), seg.prior().end());
  auto& w = scratch;
  const double min_d2 = params.min_pair_dist * params.min_pair_dist;
  const auto too_close = [&](std::uint32_t p, std::uint32_t b) {
    return (cloud.point(p) - cloud.point(b)).squaredNorm() < min_d2;
  };
  const auto edge = [&](std::uint32_t from, std::uint32_t to) {
    return edge_potential(desc, filter, cloud.point(from), cloud.normal(from), cloud.point(to), cloud.normal(to));
  };

  const std::uint32_t b1 = seg.sample(rng);
  for (std::uint32_t p = 0; p < n; ++p) {
    if (p == b1 || too_close(p, b1) || !edge(b1, p)) w[p] = 0.0;
  }
  const auto b2 = detail::draw_weighted(w, rng);
  if (!b2) return std::nullopt;

  for (std::uint32_t p = 0; p < n; ++p) {
    if (w[p] <= 0.0) continue;
    if (p == *b2 || too_close(p, *b2) ||
        folded_angle(cloud.point(b1), cloud.point(*b2), cloud.point(p)) < params.eps_angle || !edge(*b2, p)) {
      w[p] = 0.0;
    }
  }
  const auto b3 = detail::draw_weighted(w, rng);
  if (!b3) return std::nullopt;

  for (std::uint32_t p = 0; p < n; ++p) {
    if (w[p] <= 0.0) continue;
    if (p == *b3 || too_close(p, *b3) ||
        plane_distance(cloud.point(b1), cloud.point(*b2), cloud.point(*b3), cloud.point(p)) > params.eps_plane ||
        !edge(*b3, p)) {
      w[p] = 0.0;
    }
  }
  const auto b4 = detail::draw_weighted(w, rng);
  if (!b4) return std::nullopt;

  return Base::from_segment(seg, {b1, *b2, *b3, *b4});
}

/// Retries `try_select_base` up to `params.retries` times.
inline Base select_base(const SoftSegment& seg, const ModelDescriptor& desc, const SamplerParams& params,
                        PairFilter filter, RngStream& rng) {
  params.validate();
  if (!seg.cloud().has_normals()) throw Error(ErrorCode::MissingNormals, "segment has no normals");
  std::vector<double> scratch;
  for (int attempt = 0; attempt < params.retries; ++attempt) {
    if (auto base = try_select_base(seg, desc, params, filter, rng, scratch)) return *base;
  }
  throw Error(ErrorCode::NoValidBase, "no valid base after " + std::to_string(params.retries) + " attempts");
}

/// Unnormalized product of node potentials (prior) and the six edge
/// potentials of the base, edges taken in sampling order.
inline double joint_base_probability(const Base& base, const SoftSegment& seg, const ModelDescriptor& desc,
                                     PairFilter filter = PairFilter::ppf) {
  double prob = 1.0;
  for (std::size_t i = 0; i < 4; ++i) prob *= seg.prior(base.index[i]);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (!edge_potential(desc, filter, base.point[i], base.normal[i], base.point[j], base.normal[j])) return 0.0;
    }
  }
  return prob;
}

}  // namespace stocs
