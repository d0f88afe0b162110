#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace stocs {

/// Result of a nearest-neighbour query.
struct Neighbor {
  std::uint32_t index = 0;
  double squared_distance = 0.0;
};

/// Static kd-tree over a point set. Queries return exactly what a brute-force
/// scan would, with equal distances resolved toward the lowest point index.
/// Immutable after construction, so concurrent queries are safe.
class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Eigen::Vector3d> points)
      : points_(points.begin(), points.end()) {
    perm_.resize(points_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = static_cast<std::uint32_t>(i);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

  /// Nearest point to `query`; nullopt only when the index is empty.
  std::optional<Neighbor> nearest(const Eigen::Vector3d& query) const {
    return nearest_within_squared(query, std::numeric_limits<double>::infinity());
  }

  /// Nearest point whose distance is at most `radius`.
  std::optional<Neighbor> nearest_within(const Eigen::Vector3d& query, double radius) const {
    return nearest_within_squared(query, radius * radius);
  }

  std::optional<Neighbor> nearest_within_squared(const Eigen::Vector3d& query,
                                                 double max_squared_distance) const {
    if (nodes_.empty()) return std::nullopt;
    Neighbor best{std::numeric_limits<std::uint32_t>::max(), max_squared_distance};
    search_nearest(0, query, best);
    if (best.index == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
    return best;
  }

  /// The `k` nearest points ordered by (distance, index).
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (k == 0 || nodes_.empty()) return heap;
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end(), less);
    return heap;
  }

  /// All points within `radius` (inclusive), ordered by index.
  std::vector<std::uint32_t> radius_search(const Eigen::Vector3d& query, double radius) const {
    std::vector<std::uint32_t> out;
    if (nodes_.empty()) return out;
    search_radius(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::uint32_t kLeafSize = 12;

  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  static bool less(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[perm_[i]]);
      hi = hi.cwiseMax(points_[perm_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident: keep as leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis] ||
                              (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const double split = points_[perm_[mid]][axis];
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    return id;
  }

  void search_nearest(std::int32_t id, const Eigen::Vector3d& q, Neighbor& best) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = perm_[i];
        const double d2 = (points_[p] - q).squaredNorm();
        if (d2 < best.squared_distance || (d2 == best.squared_distance && p < best.index)) {
          best = {p, d2};
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t first = diff < 0.0 ? node.left : node.right;
    const std::int32_t second = diff < 0.0 ? node.right : node.left;
    search_nearest(first, q, best);
    if (diff * diff <= best.squared_distance) search_nearest(second, q, best);
  }

  void search_knn(std::int32_t id, const Eigen::Vector3d& q, std::size_t k,
                  std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = perm_[i];
        const Neighbor cand{p, (points_[p] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), less);
        } else if (less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), less);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t first = diff < 0.0 ? node.left : node.right;
    const std::int32_t second = diff < 0.0 ? node.right : node.left;
    search_knn(first, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().squared_distance) {
      search_knn(second, q, k, heap);
    }
  }

  void search_radius(std::int32_t id, const Eigen::Vector3d& q, double r2,
                     std::vector<std::uint32_t>& out) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = perm_[i];
        if ((points_[p] - q).squaredNorm() <= r2) out.push_back(p);
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= 0.0 || diff * diff <= r2) search_radius(node.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) search_radius(node.right, q, r2, out);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> perm_;
  std::vector<Node> nodes_;
};

/// Uniform grid answering nearest-within-radius queries for one fixed
/// radius. Each cell (half a radius wide) lists every point within the radius
/// of some location in the cell, so a query scans a single short list.
/// Results and tie handling match SpatialIndex::nearest_within.
class RadiusGrid {
 public:
  /// nullopt when the grid would need more than `max_cells` cells.
  static std::optional<RadiusGrid> try_build(std::span<const Eigen::Vector3d> points, double radius,
                                             std::size_t max_cells = std::size_t{1} << 22) {
    if (points.empty() || !(radius > 0.0) || !std::isfinite(radius)) return std::nullopt;
    RadiusGrid g;
    g.radius2_ = radius * radius;
    const double cell = 0.5 * radius;
    const double reach = radius * (1.0 + 1e-9);
    g.inv_cell_ = 1.0 / cell;
    Eigen::Vector3d lo = points.front(), hi = points.front();
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    g.origin_ = lo - Eigen::Vector3d::Constant(reach + cell);
    std::size_t total = 1;
    for (int k = 0; k < 3; ++k) {
      const double span = std::floor((hi[k] + reach - g.origin_[k]) * g.inv_cell_) + 2.0;
      if (!(span < 1e7)) return std::nullopt;
      g.dims_[k] = static_cast<std::int64_t>(span);
      total *= static_cast<std::size_t>(g.dims_[k]);
      if (total > max_cells) return std::nullopt;
    }
    g.points_.assign(points.begin(), points.end());

    const auto for_cells_in_reach = [&](const Eigen::Vector3d& p, auto&& fn) {
      const auto c0 = g.cell_of(p - Eigen::Vector3d::Constant(reach));
      const auto c1 = g.cell_of(p + Eigen::Vector3d::Constant(reach));
      for (std::int64_t x = c0[0]; x <= c1[0]; ++x) {
        for (std::int64_t y = c0[1]; y <= c1[1]; ++y) {
          for (std::int64_t z = c0[2]; z <= c1[2]; ++z) {
            const auto id = g.flat({x, y, z});
            if (!id) continue;
            const Eigen::Vector3d box_lo = g.origin_ + cell * Eigen::Vector3d(static_cast<double>(x),
                                                                               static_cast<double>(y),
                                                                               static_cast<double>(z));
            const Eigen::Vector3d gap =
                (box_lo - p).cwiseMax(p - box_lo - Eigen::Vector3d::Constant(cell)).cwiseMax(0.0);
            if (gap.squaredNorm() <= reach * reach) fn(*id);
          }
        }
      }
    };
    std::vector<std::uint32_t> count(total + 1, 0);
    for (const auto& p : g.points_) for_cells_in_reach(p, [&](std::size_t id) { ++count[id + 1]; });
    for (std::size_t i = 1; i < count.size(); ++i) count[i] += count[i - 1];
    g.offsets_ = count;
    g.items_.resize(g.offsets_.back());
    for (std::uint32_t i = 0; i < g.points_.size(); ++i) {
      for_cells_in_reach(g.points_[i], [&](std::size_t id) { g.items_[count[id]++] = i; });
    }
    return g;
  }

  double radius_squared() const { return radius2_; }

  std::optional<Neighbor> nearest_within(const Eigen::Vector3d& q) const {
    std::size_t id = 0;
    for (int k = 0; k < 3; ++k) {
      const double v = (q[k] - origin_[k]) * inv_cell_;
      if (!(v >= 0.0 && v < static_cast<double>(dims_[k]))) return std::nullopt;
      id = id * static_cast<std::size_t>(dims_[k]) + static_cast<std::size_t>(v);
    }
    Neighbor best{std::numeric_limits<std::uint32_t>::max(), radius2_};
    for (std::uint32_t k = offsets_[id]; k < offsets_[id + 1]; ++k) {
      const std::uint32_t p = items_[k];
      const double d2 = (points_[p] - q).squaredNorm();
      if (d2 < best.squared_distance || (d2 == best.squared_distance && p < best.index)) best = {p, d2};
    }
    if (best.index == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
    return best;
  }

 private:
  std::array<std::int64_t, 3> cell_of(const Eigen::Vector3d& p) const {
    std::array<std::int64_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
      const double v = std::floor((p[k] - origin_[k]) * inv_cell_);
      c[k] = v < -1.0 ? -1 : v > static_cast<double>(dims_[k]) ? dims_[k] : static_cast<std::int64_t>(v);
    }
    return c;
  }

  std::optional<std::size_t> flat(const std::array<std::int64_t, 3>& c) const {
    for (int k = 0; k < 3; ++k) {
      if (c[k] < 0 || c[k] >= dims_[k]) return std::nullopt;
    }
    return static_cast<std::size_t>((c[0] * dims_[1] + c[1]) * dims_[2] + c[2]);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> items_;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  std::array<std::int64_t, 3> dims_{};
  double inv_cell_ = 1.0;
  double radius2_ = 0.0;
};

}  // namespace stocs
