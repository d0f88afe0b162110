#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "stocs/error.hpp"
#include "stocs/geometry.hpp"

namespace stocs {

/// Oriented point-pair feature: (|d|, angle(n1, d), angle(n2, d), angle(n1, n2))
/// with d pointing from the first point to the second.
struct PPF {
  double dist = 0.0;
  double angle_n1_d = 0.0;
  double angle_n2_d = 0.0;
  double angle_n1_n2 = 0.0;

  std::array<double, 4> as_array() const { return {dist, angle_n1_d, angle_n2_d, angle_n1_n2}; }
};

namespace detail {
inline double clamped_angle(double cosine) { return std::acos(std::clamp(cosine, -1.0, 1.0)); }
}  // namespace detail

inline constexpr double kCoincidentDistance = 1e-12;

inline PPF compute_ppf(const Point3& p1, const UnitVec3& n1, const Point3& p2, const UnitVec3& n2) {
  const Eigen::Vector3d d = p2 - p1;
  const double dist = d.norm();
  if (!(dist > kCoincidentDistance)) {
    throw Error(ErrorCode::CoincidentPoints, "point-pair feature of coincident points");
  }
  const Eigen::Vector3d u = d / dist;
  return {dist, detail::clamped_angle(n1.dot(u)), detail::clamped_angle(n2.dot(u)),
          detail::clamped_angle(n1.dot(n2))};
}

/// Four 16-bit bin indices packed into one 64-bit word, distance bin in the
/// low 16 bits.
struct PPFKey {
  std::uint64_t value = 0;

  static constexpr std::uint32_t kMaxBin = 1u << 16;

  static PPFKey pack(const std::array<std::uint32_t, 4>& bins) {
    std::uint64_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 16) | (bins[static_cast<std::size_t>(i)] & 0xFFFFu);
    return {v};
  }

  std::array<std::uint32_t, 4> bins() const {
    return {static_cast<std::uint32_t>(value & 0xFFFF), static_cast<std::uint32_t>((value >> 16) & 0xFFFF),
            static_cast<std::uint32_t>((value >> 32) & 0xFFFF), static_cast<std::uint32_t>((value >> 48) & 0xFFFF)};
  }

  std::uint32_t dist_bin() const { return static_cast<std::uint32_t>(value & 0xFFFF); }

  friend bool operator==(PPFKey a, PPFKey b) { return a.value == b.value; }
  friend bool operator<(PPFKey a, PPFKey b) { return a.value < b.value; }
};

/// Bin width for distance (meters) and for the three angles (radians).
struct Discretization {
  double dist_step = 0.005;
  double angle_step = 10.0 * std::numbers::pi / 180.0;

  void validate() const {
    if (!(dist_step > 0.0) || !(angle_step > 0.0) || !std::isfinite(dist_step) || !std::isfinite(angle_step)) {
      throw Error(ErrorCode::InvalidInput, "discretization steps must be positive and finite");
    }
  }
};

/// A component value expressed in bin units: integer bin and the in-bin
/// fractional position. Values within 1e-9 of the next bin edge snap onto it
/// so that exact multiples of the step land in the expected bin.
struct BinCoordinate {
  std::int64_t bin = 0;
  double fraction = 0.0;
};

inline BinCoordinate to_bin(double value, double step) {
  const double q = value / step;
  double b = std::floor(q);
  if (q - b > 1.0 - 1e-9) b += 1.0;
  return {static_cast<std::int64_t>(b), std::max(0.0, q - b)};
}

inline std::array<BinCoordinate, 4> bin_coordinates(const PPF& f, const Discretization& disc) {
  return {to_bin(f.dist, disc.dist_step), to_bin(f.angle_n1_d, disc.angle_step),
          to_bin(f.angle_n2_d, disc.angle_step), to_bin(f.angle_n1_n2, disc.angle_step)};
}

inline std::optional<PPFKey> try_discretize(const PPF& f, const Discretization& disc) {
  std::array<std::uint32_t, 4> bins{};
  const auto coords = bin_coordinates(f, disc);
  for (std::size_t i = 0; i < 4; ++i) {
    if (coords[i].bin < 0 || coords[i].bin >= static_cast<std::int64_t>(PPFKey::kMaxBin)) return std::nullopt;
    bins[i] = static_cast<std::uint32_t>(coords[i].bin);
  }
  return PPFKey::pack(bins);
}

inline PPFKey discretize(const PPF& f, const Discretization& disc) {
  disc.validate();
  if (auto key = try_discretize(f, disc)) return *key;
  throw Error(ErrorCode::BinOverflow, "feature bin index outside [0, 2^16)");
}

/// Distance-only key used by the plain congruent-set baseline: the distance
/// bin with all angle bins zeroed.
inline PPFKey distance_key(PPFKey key) { return {key.value & 0xFFFF}; }

/// Keys a feature votes for: per dimension {floor bin, nearest other bin}
/// where the other bin is bin+1 when the fractional part is >= 0.5 and bin-1
/// otherwise (clamped at 0). Duplicates are removed; the floor key is first.
/// Returns the number of keys written (1..16), or 0 on bin overflow.
inline std::size_t voting_keys(const PPF& f, const Discretization& disc, std::array<PPFKey, 16>& out) {
  const auto coords = bin_coordinates(f, disc);
  std::array<std::array<std::uint32_t, 2>, 4> choice{};
  for (std::size_t d = 0; d < 4; ++d) {
    const auto b = coords[d].bin;
    const auto other = coords[d].fraction >= 0.5 ? b + 1 : std::max<std::int64_t>(0, b - 1);
    if (b < 0 || other >= static_cast<std::int64_t>(PPFKey::kMaxBin)) return 0;
    choice[d] = {static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(other)};
  }
  std::size_t n = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    const PPFKey key = PPFKey::pack({choice[0][mask & 1u], choice[1][(mask >> 1) & 1u],
                                     choice[2][(mask >> 2) & 1u], choice[3][(mask >> 3) & 1u]});
    if (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), key) ==
        out.begin() + static_cast<std::ptrdiff_t>(n)) {
      out[n++] = key;
    }
  }
  return n;
}

}  // namespace stocs
