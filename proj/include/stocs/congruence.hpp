#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "stocs/base_sampler.hpp"
#include "stocs/descriptor.hpp"
#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/ppf.hpp"

namespace stocs {

/// Rigid-invariant description of a base: the discretized features of the
/// directed pairs (b1, b2) and (b3, b4) and where their segments cross.
struct BaseInvariants {
  PPFKey key12;
  PPFKey key34;
  /// Closest-approach position along b1 -> b2 and b3 -> b4. Within
  /// [-kCrossingSlack, 1 + kCrossingSlack]; not clamped, so the offset
  /// between the two approach points stays perpendicular to both lines.
  double r1 = 0.0;
  double r2 = 0.0;
  /// Midpoint of the two closest-approach points.
  Point3 e = Point3::Zero();
  /// Signed closest-approach offset from the (b1, b2) line to the (b3, b4)
  /// line along (b2 - b1) x (b4 - b3); 0 for an exactly planar base.
  double gap = 0.0;
  /// Lengths |b1 b3|, |b1 b4|, |b2 b3|, |b2 b4| of the four cross pairs.
  std::array<double, 4> cross{};
};

inline constexpr double kParallelLimit = 0.5 * std::numbers::pi / 180.0;
inline constexpr double kCrossingSlack = 0.1;

inline BaseInvariants compute_invariants(const Base& base, const Discretization& disc) {
  const auto& b = base.point;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (!((b[i] - b[j]).norm() > kCoincidentDistance)) {
        throw Error(ErrorCode::DegenerateBase, "base has coincident points");
      }
    }
  }
  const Eigen::Vector3d u = b[1] - b[0];
  const Eigen::Vector3d v = b[3] - b[2];
  const Eigen::Vector3d w0 = b[0] - b[2];
  const double a = u.dot(u), bb = u.dot(v), c = v.dot(v), d = u.dot(w0), e = v.dot(w0);
  const double denom = a * c - bb * bb;
  const double sin_limit = std::sin(kParallelLimit);
  if (denom <= sin_limit * sin_limit * a * c) {
    throw Error(ErrorCode::DegenerateBase, "base segments are parallel");
  }
  const double s = (bb * e - c * d) / denom;
  const double t = (a * e - bb * d) / denom;
  if (s < -kCrossingSlack || s > 1.0 + kCrossingSlack || t < -kCrossingSlack || t > 1.0 + kCrossingSlack) {
    throw Error(ErrorCode::DegenerateBase, "base segments do not cross");
  }
  BaseInvariants inv;
  inv.r1 = s;
  inv.r2 = t;
  const Point3 c1 = b[0] + inv.r1 * u;
  const Point3 c2 = b[2] + inv.r2 * v;
  inv.e = 0.5 * (c1 + c2);
  inv.gap = (c2 - c1).dot(u.cross(v).normalized());
  inv.cross = {(b[2] - b[0]).norm(), (b[3] - b[0]).norm(), (b[2] - b[1]).norm(), (b[3] - b[1]).norm()};
  inv.key12 = discretize(compute_ppf(b[0], base.normal[0], b[1], base.normal[1]), disc);
  inv.key34 = discretize(compute_ppf(b[2], base.normal[2], b[3], base.normal[3]), disc);
  return inv;
}

/// Model point indices (u1..u4) matched to base points (b1..b4).
struct CongruentSet {
  std::array<std::uint32_t, 4> index{};

  friend bool operator==(const CongruentSet& a, const CongruentSet& b) { return a.index == b.index; }
  friend bool operator<(const CongruentSet& a, const CongruentSet& b) { return a.index < b.index; }
};

/// Operation counters for one extraction; the work done is
/// r1_size + r2_size + candidates_checked.
struct CongruenceStats {
  std::size_t r1_size = 0;
  std::size_t r2_size = 0;
  std::size_t candidates_checked = 0;
  std::size_t emitted = 0;
  bool truncated = false;
};

namespace detail {

/// Points bucketed by a cubic cell of side `cell`; for_each_near visits every
/// point in the 3x3x3 cells around a query (a superset of the points within
/// one cell width). Uses a dense cell array when the extent is small and a
/// sorted cell list otherwise.
class PointBuckets {
 public:
  PointBuckets(std::span<const Point3> points, double cell) : inv_cell_(1.0 / cell) {
    if (points.empty()) return;
    Eigen::Vector3d lo = points.front(), hi = points.front();
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    std::size_t total = 1;
    bool dense = true;
    for (int k = 0; k < 3; ++k) {
      const double span = std::floor((hi[k] - lo[k]) * inv_cell_) + 1.0;
      if (!(span < 1e6)) {
        dense = false;
        break;
      }
      dims_[k] = static_cast<std::int64_t>(span);
      total *= static_cast<std::size_t>(dims_[k]);
      if (total > std::max<std::size_t>(std::size_t{1} << 16, 16 * points.size())) {
        dense = false;
        break;
      }
    }
    cells_.reserve(points.size());
    for (std::uint32_t i = 0; i < points.size(); ++i) cells_.push_back({cell_of(points[i]), i});
    if (dense) {
      offsets_.assign(total + 1, 0);
      for (const auto& e : cells_) ++offsets_[flat(e.key) + 1];
      for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
      items_.resize(points.size());
      auto fill = offsets_;
      for (const auto& e : cells_) items_[fill[flat(e.key)]++] = e.index;
      cells_.clear();
    } else {
      std::sort(cells_.begin(), cells_.end(), [](const Entry& a, const Entry& b) {
        return a.key < b.key || (a.key == b.key && a.index < b.index);
      });
    }
  }

  template <class Fn>
  void for_each_near(const Point3& q, Fn&& fn) const {
    const auto c = cell_of(q);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const Key key{c[0] + dx, c[1] + dy, c[2] + dz};
          if (!offsets_.empty()) {
            if (key[0] < 0 || key[1] < 0 || key[2] < 0 || key[0] >= dims_[0] || key[1] >= dims_[1] ||
                key[2] >= dims_[2]) {
              continue;
            }
            const auto id = flat(key);
            for (std::uint32_t k = offsets_[id]; k < offsets_[id + 1]; ++k) fn(items_[k]);
          } else {
            auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                                       [](const Entry& e, const Key& k) { return e.key < k; });
            for (; it != cells_.end() && it->key == key; ++it) fn(it->index);
          }
        }
      }
    }
  }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct Entry {
    Key key;
    std::uint32_t index;
  };

  Key cell_of(const Point3& p) const {
    Key c{};
    for (int k = 0; k < 3; ++k) {
      const double v = std::floor((p[k] - origin_[k]) * inv_cell_);
      c[k] = static_cast<std::int64_t>(std::clamp(v, -4e18, 4e18));
    }
    return c;
  }

  std::size_t flat(const Key& c) const {
    return static_cast<std::size_t>((c[0] * dims_[1] + c[1]) * dims_[2] + c[2]);
  }

  double inv_cell_;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  Key dims_{};
  std::vector<Entry> cells_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> items_;
};

}  // namespace detail

/// Model 4-point sets congruent to the base. Candidate pairs come from the
/// descriptor (full feature key, or distance bin only); their crossing
/// points are matched through a uniform grid. A pair (i, j) from R1 and
/// (k, l) from R2 match when e2 - e1 equals the base's closest-approach
/// offset, carried along the normal of the two model pair directions, within
/// `delta_e`. For a planar base this is |e1 - e2| <= delta_e. The four cross
/// distances (u1 u3, u1 u4, u2 u3, u2 u4) must also match the base within
/// `delta_e`, which rejects configurations that share the crossing point but
/// are not rigidly congruent. Output follows R2 order, then R1
/// order, and stops at `max_sets`.
inline std::vector<CongruentSet> find_congruent_sets(const BaseInvariants& inv, const ModelDescriptor& desc,
                                                     double delta_e, std::size_t max_sets,
                                                     PairFilter filter = PairFilter::ppf,
                                                     CongruenceStats* stats = nullptr) {
  std::vector<CongruentSet> out;
  const auto r1 = filter == PairFilter::ppf ? desc.lookup(inv.key12) : desc.lookup_distance(inv.key12.dist_bin());
  const auto r2 = filter == PairFilter::ppf ? desc.lookup(inv.key34) : desc.lookup_distance(inv.key34.dist_bin());
  CongruenceStats local;
  local.r1_size = r1.size();
  local.r2_size = r2.size();
  if (r1.empty() || r2.empty() || max_sets == 0) {
    if (stats) *stats = local;
    return out;
  }

  const auto& pts = desc.model().points();
  const double tol = std::max(delta_e, 0.0) + 1e-9;
  const double cell = std::abs(inv.gap) + tol;
  const double reach2 = cell * cell;
  std::vector<Point3> e1(r1.size());
  for (std::uint32_t i = 0; i < r1.size(); ++i) {
    const Point3& mi = pts[r1[i].first];
    const Point3& mj = pts[r1[i].second];
    e1[i] = mi + inv.r1 * (mj - mi);
  }
  const detail::PointBuckets buckets(e1, cell);

  std::vector<std::uint32_t> hits;
  for (std::size_t k = 0; k < r2.size() && !local.truncated; ++k) {
    const auto [m3, m4] = r2[k];
    const Point3 e2 = pts[m3] + inv.r2 * (pts[m4] - pts[m3]);
    hits.clear();
    buckets.for_each_near(e2, [&](std::uint32_t h) {
      ++local.candidates_checked;
      const auto [m1, m2] = r1[h];
      if (m1 == m3 || m1 == m4 || m2 == m3 || m2 == m4) return;
      if ((e2 - e1[h]).squaredNorm() > reach2) return;
      const Eigen::Vector3d axis = (pts[m2] - pts[m1]).cross(pts[m4] - pts[m3]);
      const double axis_len = axis.norm();
      const Eigen::Vector3d expected =
          axis_len > 0.0 ? Eigen::Vector3d(inv.gap / axis_len * axis) : Eigen::Vector3d::Zero();
      if ((e2 - e1[h] - expected).norm() > tol) return;
      if (std::abs((pts[m3] - pts[m1]).norm() - inv.cross[0]) > tol ||
          std::abs((pts[m4] - pts[m1]).norm() - inv.cross[1]) > tol ||
          std::abs((pts[m3] - pts[m2]).norm() - inv.cross[2]) > tol ||
          std::abs((pts[m4] - pts[m2]).norm() - inv.cross[3]) > tol) {
        return;
      }
      hits.push_back(h);
    });
    std::sort(hits.begin(), hits.end());
    for (const auto h : hits) {
      out.push_back({{r1[h].first, r1[h].second, m3, m4}});
      if (out.size() >= max_sets) {
        local.truncated = true;
        break;
      }
    }
  }
  local.emitted = out.size();
  if (stats) *stats = local;
  return out;
}

inline std::vector<CongruentSet> find_congruent_sets(const Base& base, const ModelDescriptor& desc, double delta_e,
                                                     std::size_t max_sets, PairFilter filter = PairFilter::ppf,
                                                     CongruenceStats* stats = nullptr) {
  return find_congruent_sets(compute_invariants(base, desc.discretization()), desc, delta_e, max_sets, filter,
                             stats);
}

}  // namespace stocs
