#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/ppf.hpp"
#include "stocs/random.hpp"

namespace stocs {

/// Directed pair of model point indices.
struct IndexPair {
  std::uint32_t first = 0;
  std::uint32_t second = 0;

  friend bool operator==(IndexPair a, IndexPair b) { return a.first == b.first && a.second == b.second; }
};

struct KeyHash {
  std::size_t operator()(std::uint64_t k) const noexcept { return static_cast<std::size_t>(splitmix64(k)); }
};

/// Indices of voxel-grid representatives for cell edge `edge`: in each
/// occupied cell, the point closest to the cell's centroid (lowest index on
/// ties). Returned in ascending index order.
inline std::vector<std::uint32_t> voxel_downsample(const PointCloud& cloud, double edge) {
  std::vector<std::uint32_t> out;
  if (cloud.empty()) return out;
  Point3 lo = cloud.point(0);
  for (const auto& p : cloud.points()) lo = lo.cwiseMin(p);

  struct Cell {
    Point3 sum = Point3::Zero();
    std::vector<std::uint32_t> members;
  };
  std::map<std::array<std::int64_t, 3>, Cell> cells;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d q = (cloud.point(i) - lo) / edge;
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(q.x())),
                                          static_cast<std::int64_t>(std::floor(q.y())),
                                          static_cast<std::int64_t>(std::floor(q.z()))};
    auto& cell = cells[key];
    cell.sum += cloud.point(i);
    cell.members.push_back(i);
  }
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    const Point3 c = cell.sum / static_cast<double>(cell.members.size());
    std::uint32_t best = cell.members.front();
    double best_d2 = (cloud.point(best) - c).squaredNorm();
    for (const auto m : cell.members) {
      const double d2 = (cloud.point(m) - c).squaredNorm();
      if (d2 < best_d2) {
        best = m;
        best_d2 = d2;
      }
    }
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Voxel-grid subsampling with the edge chosen by bisection so that the kept
/// count lands within +-10% of `target`. Clouds already within that band
/// (or smaller) are returned unchanged.
inline PointCloud subsample_to_target(const PointCloud& cloud, std::size_t target) {
  if (target == 0) throw Error(ErrorCode::InvalidInput, "subsample target must be positive");
  const auto within = [&](std::size_t n) {
    return static_cast<double>(n) <= 1.1 * static_cast<double>(target) &&
           static_cast<double>(n) >= 0.9 * static_cast<double>(target);
  };
  if (static_cast<double>(cloud.size()) <= 1.1 * static_cast<double>(target)) return cloud;

  Point3 lo = cloud.point(0), hi = cloud.point(0);
  for (const auto& p : cloud.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double small = std::max(cloud.resolution() * 0.25, 1e-9);
  double large = std::max((hi - lo).norm(), small * 2.0);
  std::vector<std::uint32_t> best = voxel_downsample(cloud, large);
  auto distance_to_target = [&](std::size_t n) {
    return std::abs(static_cast<double>(n) - static_cast<double>(target));
  };
  for (int iter = 0; iter < 64 && !within(best.size()); ++iter) {
    const double edge = std::sqrt(small * large);
    auto kept = voxel_downsample(cloud, edge);
    if (kept.size() > target) {
      small = edge;
    } else {
      large = edge;
    }
    if (distance_to_target(kept.size()) < distance_to_target(best.size())) best = std::move(kept);
  }
  std::vector<Point3> pts;
  std::vector<UnitVec3> nrm;
  pts.reserve(best.size());
  for (const auto i : best) {
    pts.push_back(cloud.point(i));
    if (cloud.has_normals()) nrm.push_back(cloud.normal(i));
  }
  return PointCloud(std::move(pts), std::move(nrm));
}

/// Global model description: every directed pair of (subsampled) model
/// points filed under the 16 neighbouring feature bins of its point-pair
/// feature, plus a distance-only table for the plain congruent-set baseline.
/// Immutable after construction.
class ModelDescriptor {
 public:
  ModelDescriptor() = default;

  static ModelDescriptor build(const PointCloud& model, const Discretization& disc = {},
                               std::size_t subsample_target = 500) {
    disc.validate();
    if (model.size() < 2) throw Error(ErrorCode::TooFewPoints, "model needs at least 2 points");
    if (!model.has_normals()) throw Error(ErrorCode::MissingNormals, "model cloud has no normals");

    ModelDescriptor out;
    out.model_ = subsample_to_target(model, subsample_target);
    out.disc_ = disc;

    const auto& pts = out.model_.points();
    const auto& nrm = out.model_.normals();
    const auto n = static_cast<std::uint32_t>(pts.size());
    std::unordered_map<std::uint64_t, std::vector<IndexPair>, KeyHash> table;
    std::array<PPFKey, 16> keys{};
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Eigen::Vector3d d = pts[j] - pts[i];
        if (!(d.norm() > kCoincidentDistance)) continue;
        const PPF f = compute_ppf(pts[i], nrm[i], pts[j], nrm[j]);
        const std::size_t nk = voting_keys(f, disc, keys);
        if (nk == 0) throw Error(ErrorCode::BinOverflow, "model pair feature exceeds bin range");
        for (std::size_t k = 0; k < nk; ++k) table[keys[k].value].push_back({i, j});
      }
    }
    std::vector<std::pair<std::uint64_t, std::vector<IndexPair>>> entries(
        std::make_move_iterator(table.begin()), std::make_move_iterator(table.end()));
    out.assign_entries(std::move(entries));
    return out;
  }

  /// Reassembles a descriptor from its serialized parts.
  static ModelDescriptor from_parts(PointCloud model, const Discretization& disc,
                                    std::vector<std::pair<std::uint64_t, std::vector<IndexPair>>> entries) {
    disc.validate();
    if (!model.has_normals()) throw Error(ErrorCode::MissingNormals, "model cloud has no normals");
    ModelDescriptor out;
    out.model_ = std::move(model);
    out.disc_ = disc;
    for (const auto& [key, pairs] : entries) {
      for (const auto& p : pairs) {
        if (p.first >= out.model_.size() || p.second >= out.model_.size() || p.first == p.second) {
          throw Error(ErrorCode::FormatError, "descriptor pair index out of range");
        }
      }
    }
    out.assign_entries(std::move(entries));
    return out;
  }

  const PointCloud& model() const { return model_; }
  const Discretization& discretization() const { return disc_; }
  double dist_step() const { return disc_.dist_step; }
  double angle_step() const { return disc_.angle_step; }
  double model_diameter() const { return diameter_; }

  std::size_t key_count() const { return keys_.size(); }
  std::size_t entry_count() const { return pairs_.size(); }

  /// Keys in ascending order; `pairs_for_slot(i)` gives the pairs of `keys()[i]`.
  const std::vector<std::uint64_t>& keys() const { return keys_; }
  std::span<const IndexPair> pairs_for_slot(std::size_t slot) const {
    return {pairs_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }

  std::span<const IndexPair> lookup(PPFKey key) const {
    const auto it = slot_of_.find(key.value);
    if (it == slot_of_.end()) return {};
    return pairs_for_slot(it->second);
  }

  /// Pairs whose distance votes for `dist_bin` (distance-only baseline).
  std::span<const IndexPair> lookup_distance(std::uint32_t dist_bin) const {
    if (dist_bin >= distance_table_.size()) return {};
    return distance_table_[dist_bin];
  }

  /// True when the discretized feature occurs in the table. Features longer
  /// than the model diameter can never occur and are rejected up front.
  bool has_feature(const PPF& f) const {
    if (f.dist > diameter_ + 2.0 * disc_.dist_step) return false;
    const auto key = try_discretize(f, disc_);
    return key && slot_of_.contains(key->value);
  }

  bool has_distance(double dist) const {
    if (dist > diameter_ + 2.0 * disc_.dist_step) return false;
    const auto b = to_bin(dist, disc_.dist_step).bin;
    return b >= 0 && static_cast<std::size_t>(b) < distance_table_.size() &&
           !distance_table_[static_cast<std::size_t>(b)].empty();
  }

 private:
  void assign_entries(std::vector<std::pair<std::uint64_t, std::vector<IndexPair>>> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    keys_.clear();
    offsets_.assign(1, 0);
    pairs_.clear();
    slot_of_.clear();
    slot_of_.reserve(entries.size());
    std::size_t total = 0;
    for (const auto& e : entries) total += e.second.size();
    pairs_.reserve(total);
    for (auto& [key, pairs] : entries) {
      slot_of_.emplace(key, static_cast<std::uint32_t>(keys_.size()));
      keys_.push_back(key);
      pairs_.insert(pairs_.end(), pairs.begin(), pairs.end());
      offsets_.push_back(pairs_.size());
    }
    diameter_ = diameter(model_.points());
    build_distance_table();
  }

  void build_distance_table() {
    distance_table_.clear();
    const auto& pts = model_.points();
    const auto n = static_cast<std::uint32_t>(pts.size());
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto c = to_bin((pts[j] - pts[i]).norm(), disc_.dist_step);
        const auto other = c.fraction >= 0.5 ? c.bin + 1 : std::max<std::int64_t>(0, c.bin - 1);
        const auto top = static_cast<std::size_t>(std::max(c.bin, other));
        if (top >= distance_table_.size()) distance_table_.resize(top + 1);
        distance_table_[static_cast<std::size_t>(c.bin)].push_back({i, j});
        if (other != c.bin) distance_table_[static_cast<std::size_t>(other)].push_back({i, j});
      }
    }
  }

  PointCloud model_;
  Discretization disc_;
  double diameter_ = 0.0;
  std::vector<std::uint64_t> keys_;
  std::vector<std::size_t> offsets_{0};
  std::vector<IndexPair> pairs_;
  std::unordered_map<std::uint64_t, std::uint32_t, KeyHash> slot_of_;
  std::vector<std::vector<IndexPair>> distance_table_;
};

inline bool has_feature(const ModelDescriptor& desc, const PPF& f) { return desc.has_feature(f); }
inline std::span<const IndexPair> lookup(const ModelDescriptor& desc, PPFKey key) { return desc.lookup(key); }

inline ModelDescriptor build_descriptor(const PointCloud& model, double dist_step, double angle_step,
                                        std::size_t subsample_target) {
  return ModelDescriptor::build(model, Discretization{dist_step, angle_step}, subsample_target);
}

// Binary descriptor file. Little-endian throughout:
//   "SPPF" u32 version=1 f64 dist_step f64 angle_step u32 n_points
//   n_points x (f64 x y z nx ny nz) u64 n_entries
//   n_entries x (u64 key, u32 n_pairs, n_pairs x (u32 i, u32 j))
namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw Error(ErrorCode::FormatError, "descriptor file truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline constexpr std::uint32_t kDescriptorVersion = 1;

inline void write_descriptor(std::ostream& os, const ModelDescriptor& desc) {
  os.write("SPPF", 4);
  detail::write_le<std::uint32_t>(os, kDescriptorVersion);
  detail::write_le<double>(os, desc.dist_step());
  detail::write_le<double>(os, desc.angle_step());
  const auto& model = desc.model();
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (int c = 0; c < 3; ++c) detail::write_le<double>(os, model.point(i)[c]);
    for (int c = 0; c < 3; ++c) detail::write_le<double>(os, model.normal(i)[c]);
  }
  detail::write_le<std::uint64_t>(os, desc.key_count());
  for (std::size_t s = 0; s < desc.key_count(); ++s) {
    const auto pairs = desc.pairs_for_slot(s);
    detail::write_le<std::uint64_t>(os, desc.keys()[s]);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(pairs.size()));
    for (const auto& p : pairs) {
      detail::write_le<std::uint32_t>(os, p.first);
      detail::write_le<std::uint32_t>(os, p.second);
    }
  }
}

inline ModelDescriptor read_descriptor(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "SPPF", 4) != 0) {
    throw Error(ErrorCode::FormatError, "bad descriptor magic");
  }
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kDescriptorVersion) {
    throw Error(ErrorCode::FormatError, "unsupported descriptor version " + std::to_string(version));
  }
  Discretization disc;
  disc.dist_step = detail::read_le<double>(is);
  disc.angle_step = detail::read_le<double>(is);
  const auto n_points = detail::read_le<std::uint32_t>(is);
  std::vector<Point3> pts(n_points);
  std::vector<UnitVec3> nrm(n_points);
  for (std::uint32_t i = 0; i < n_points; ++i) {
    for (int c = 0; c < 3; ++c) pts[i][c] = detail::read_le<double>(is);
    for (int c = 0; c < 3; ++c) nrm[i][c] = detail::read_le<double>(is);
  }
  const auto n_entries = detail::read_le<std::uint64_t>(is);
  std::vector<std::pair<std::uint64_t, std::vector<IndexPair>>> entries;
  entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n_entries, 1u << 24)));
  for (std::uint64_t e = 0; e < n_entries; ++e) {
    const auto key = detail::read_le<std::uint64_t>(is);
    const auto n_pairs = detail::read_le<std::uint32_t>(is);
    std::vector<IndexPair> pairs(n_pairs);
    for (auto& p : pairs) {
      p.first = detail::read_le<std::uint32_t>(is);
      p.second = detail::read_le<std::uint32_t>(is);
    }
    entries.emplace_back(key, std::move(pairs));
  }
  return ModelDescriptor::from_parts(PointCloud(std::move(pts), std::move(nrm)), disc, std::move(entries));
}

inline void save_descriptor(const std::string& path, const ModelDescriptor& desc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_descriptor(os, desc);
  if (!os) throw Error(ErrorCode::IoError, "failed writing " + path);
}

inline ModelDescriptor load_descriptor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_descriptor(is);
}

}  // namespace stocs
