#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stocs/base_sampler.hpp"
#include "stocs/congruence.hpp"
#include "stocs/descriptor.hpp"
#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/random.hpp"
#include "stocs/soft_segment.hpp"

namespace stocs {

enum class PriorMode { soft, uniform };

struct RegistrationConfig {
  /// Score distance threshold; unset means 2 x segment resolution.
  std::optional<double> delta_s;
  /// Score normal-agreement threshold, as a cosine.
  double delta_n = std::cos(30.0 * std::numbers::pi / 180.0);
  /// Seconds; infinity means unbounded.
  double max_runtime = std::numeric_limits<double>::infinity();
  /// Iteration budget; SIZE_MAX means unbounded.
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
  /// Unset fields take the segment/model-derived defaults.
  std::optional<double> eps_angle;
  std::optional<double> eps_plane;
  std::optional<double> min_pair_dist;
  int retries = 20;
  /// Congruence tolerance; unset means 2 x descriptor distance step.
  std::optional<double> delta_e;
  std::size_t max_sets = 1000;
  /// Which prior the segment was built with. Registration itself only reads
  /// the segment's prior; this flag is carried for the caller that builds it.
  PriorMode prior = PriorMode::soft;
  PairFilter pair_filter = PairFilter::ppf;
  /// Worker threads; results do not depend on this.
  std::size_t workers = 1;

  static constexpr std::size_t kUnboundedIterations = std::numeric_limits<std::size_t>::max();

  void validate() const {
    if (delta_s && !(*delta_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "delta_s must be positive");
    if (!(delta_n >= -1.0 && delta_n <= 1.0)) throw Error(ErrorCode::InvalidConfig, "delta_n must lie in [-1, 1]");
    if (!(max_runtime > 0.0)) throw Error(ErrorCode::InvalidConfig, "max_runtime must be positive");
    if (std::isinf(max_runtime) && max_iterations == kUnboundedIterations) {
      throw Error(ErrorCode::InvalidConfig, "max_runtime and max_iterations cannot both be unbounded");
    }
    if (delta_e && !(*delta_e >= 0.0)) throw Error(ErrorCode::InvalidConfig, "delta_e must be non-negative");
    if (max_sets == 0) throw Error(ErrorCode::InvalidConfig, "max_sets must be positive");
    if (workers == 0) throw Error(ErrorCode::InvalidConfig, "workers must be positive");
  }
};

/// Thresholds after defaults have been filled in from the inputs.
struct ResolvedParams {
  double delta_s = 0.0;
  double delta_n = 0.0;
  double delta_e = 0.0;
  double prune_rms = 0.0;
  SamplerParams sampler;
};

inline ResolvedParams resolve_params(const RegistrationConfig& cfg, const SoftSegment& seg,
                                     const ModelDescriptor& desc) {
  cfg.validate();
  ResolvedParams r;
  r.delta_s = cfg.delta_s.value_or(2.0 * seg.cloud().resolution());
  if (!(r.delta_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "segment resolution is zero; set delta_s");
  r.delta_n = cfg.delta_n;
  r.delta_e = cfg.delta_e.value_or(2.0 * desc.dist_step());
  r.sampler = SamplerParams::defaults_for(seg, desc);
  if (cfg.eps_angle) r.sampler.eps_angle = *cfg.eps_angle;
  if (cfg.eps_plane) r.sampler.eps_plane = *cfg.eps_plane;
  if (cfg.min_pair_dist) r.sampler.min_pair_dist = *cfg.min_pair_dist;
  r.sampler.retries = cfg.retries;
  r.sampler.validate();
  r.prune_rms = r.delta_e + 2.0 * r.sampler.eps_plane + desc.dist_step();
  return r;
}

/// Probability-weighted alignment score. Each transformed model point is
/// matched to its nearest segment point s*; the match counts when s* is
/// closer than delta_s and the normals agree beyond delta_n. Each segment
/// point contributes its prior at most once, so the score stays in [0, 1].
/// Not thread-safe: keeps per-call scratch.
class Scorer {
 public:
  Scorer(const ModelDescriptor& desc, const SoftSegment& seg, double delta_s, double delta_n)
      : desc_(&desc),
        seg_(&seg),
        grid_(RadiusGrid::try_build(seg.cloud().points(), delta_s)),
        delta_s2_(delta_s * delta_s),
        delta_n_(delta_n),
        stamp_(seg.size(), 0) {
    std::vector<double> sorted(seg.prior().begin(), seg.prior().end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    top_sum_.assign(desc.model().size() + 1, 0.0);
    for (std::size_t k = 1; k < top_sum_.size(); ++k) {
      top_sum_[k] = top_sum_[k - 1] + (k <= sorted.size() ? sorted[k - 1] : 0.0);
    }
  }

  double operator()(const RigidTransform& t) { return score_above(t, -1.0); }

  /// Exact score, or a negative value once the score provably cannot reach
  /// `floor`. The k remaining model points can claim at most k distinct
  /// segment points, so they add at most the k largest priors.
  double score_above(const RigidTransform& t, double floor) {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
    const auto& model = desc_->model();
    const auto& scene = seg_->cloud();
    const std::size_t n = model.size();
    const bool bounded = floor > 0.0;
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (bounded && score + top_sum_[n - i] < floor - 1e-12) return -1.0;
      const Point3 q = t.apply(model.point(i));
      const auto hit = grid_ ? grid_->nearest_within(q) : scene.index().nearest_within_squared(q, delta_s2_);
      if (!hit || !(hit->squared_distance < delta_s2_)) continue;
      if (stamp_[hit->index] == epoch_) continue;
      if (!(t.apply_normal(model.normal(i)).dot(scene.normal(hit->index)) > delta_n_)) continue;
      stamp_[hit->index] = epoch_;
      score += seg_->prior(hit->index);
    }
    return score;
  }

 private:
  const ModelDescriptor* desc_;
  const SoftSegment* seg_;
  std::optional<RadiusGrid> grid_;
  double delta_s2_;
  double delta_n_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  /// top_sum_[k]: sum of the k largest priors.
  std::vector<double> top_sum_;
};

inline double score_transform(const ModelDescriptor& desc, const RigidTransform& t, const SoftSegment& seg,
                              double delta_s, double delta_n) {
  Scorer scorer(desc, seg, delta_s, delta_n);
  return scorer(t);
}

inline double score_transform(const ModelDescriptor& desc, const RigidTransform& t, const SoftSegment& seg,
                              const RegistrationConfig& cfg) {
  const auto p = resolve_params(cfg, seg, desc);
  return score_transform(desc, t, seg, p.delta_s, p.delta_n);
}

struct StageTimings {
  double sampling = 0.0;
  double extraction = 0.0;
  double verification = 0.0;
  /// Wall-clock time of the whole call.
  double total = 0.0;
};

struct PoseEstimate {
  RigidTransform transform;
  double score = 0.0;
  /// Iterations that ran (including those without a valid base).
  std::size_t iterations_used = 0;
  /// Iterations that produced a valid base.
  std::size_t bases_sampled = 0;
  std::size_t no_valid_base = 0;
  std::size_t degenerate_bases = 0;
  std::size_t sets_extracted = 0;
  std::size_t sets_pruned = 0;
  /// Hypotheses that were fully scored.
  std::size_t sets_evaluated = 0;
  /// Iteration that produced the returned transform.
  std::size_t best_iteration = 0;
  /// Best score after each iteration, in iteration order.
  std::vector<double> score_trace;
  /// Wall-clock seconds per stage, summed over workers. Not deterministic.
  StageTimings timings;

  double sets_per_base() const {
    return bases_sampled == 0 ? 0.0 : static_cast<double>(sets_extracted) / static_cast<double>(bases_sampled);
  }
};

namespace detail {

struct IterationResult {
  bool ran = false;
  bool valid_base = false;
  std::size_t degenerate = 0;
  std::size_t extracted = 0;
  std::size_t pruned = 0;
  std::size_t evaluated = 0;
  bool has_hypothesis = false;
  double score = 0.0;
  double fit_rms = 0.0;
  RigidTransform transform;
  StageTimings timings;
};

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Hypothesis order: higher score, then smaller fit residual.
inline bool better(double score, double rms, double best_score, double best_rms) {
  return score > best_score || (score == best_score && rms < best_rms);
}

/// `floor` is the best score of some earlier iteration. Hypotheses that
/// provably fall below it are abandoned early; they could not change the
/// running best, so the result does not depend on which earlier iterations
/// had finished.
inline IterationResult run_iteration(std::size_t iteration, const SoftSegment& seg, const ModelDescriptor& desc,
                                     const RegistrationConfig& cfg, const ResolvedParams& p, Scorer& scorer,
                                     std::vector<double>& scratch, double floor) {
  IterationResult r;
  r.ran = true;
  RngStream rng = make_stream(cfg.seed, iteration);

  auto t0 = Clock::now();
  std::optional<Base> base;
  std::optional<BaseInvariants> inv;
  for (int attempt = 0; attempt < p.sampler.retries && !inv; ++attempt) {
    base = try_select_base(seg, desc, p.sampler, cfg.pair_filter, rng, scratch);
    if (!base) continue;
    try {
      inv = compute_invariants(*base, desc.discretization());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateBase && e.code() != ErrorCode::BinOverflow) throw;
      ++r.degenerate;
    }
  }
  r.timings.sampling = seconds_since(t0);
  if (!inv) return r;
  r.valid_base = true;

  t0 = Clock::now();
  const auto sets = find_congruent_sets(*inv, desc, p.delta_e, cfg.max_sets, cfg.pair_filter);
  r.extracted = sets.size();
  r.timings.extraction = seconds_since(t0);

  t0 = Clock::now();
  const auto& model = desc.model();
  std::array<Point3, 4> src;
  for (const auto& set : sets) {
    for (std::size_t i = 0; i < 4; ++i) src[i] = model.point(set.index[i]);
    RigidTransform t;
    try {
      t = estimate_rigid_transform(src, base->point);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateCorrespondences) throw;
      ++r.pruned;
      continue;
    }
    const double rms = rms_residual(t, src, base->point);
    if (rms > p.prune_rms) {
      ++r.pruned;
      continue;
    }
    ++r.evaluated;
    const double s = scorer.score_above(t, std::max(floor, r.has_hypothesis ? r.score : -1.0));
    if (s < 0.0) continue;
    if (!r.has_hypothesis || better(s, rms, r.score, r.fit_rms)) {
      r.has_hypothesis = true;
      r.score = s;
      r.fit_rms = rms;
      r.transform = t;
    }
  }
  r.timings.verification = seconds_since(t0);
  return r;
}

}  // namespace detail

/// Anytime randomized registration of the model into the segment. Iteration
/// i draws all of its randomness from stream (seed, i), so results do not
/// depend on scheduling; the best hypothesis is the maximum score, ties going
/// to the smaller 4-point fit residual, then the earlier iteration and then
/// the earlier hypothesis.
inline PoseEstimate register_pose(const SoftSegment& seg, const ModelDescriptor& desc,
                                  const RegistrationConfig& cfg = {}) {
  const auto params = resolve_params(cfg, seg, desc);
  if (!seg.cloud().has_normals()) throw Error(ErrorCode::MissingNormals, "segment has no normals");
  if (!desc.model().has_normals()) throw Error(ErrorCode::MissingNormals, "model has no normals");

  const auto start = detail::Clock::now();
  const bool timed = std::isfinite(cfg.max_runtime);
  const bool unbounded = cfg.max_iterations == RegistrationConfig::kUnboundedIterations;
  const auto out_of_time = [&] { return timed && detail::seconds_since(start) >= cfg.max_runtime; };

  std::vector<detail::IterationResult> results;
  if (!unbounded) results.resize(cfg.max_iterations);
  const std::size_t workers = unbounded ? 1 : std::min(cfg.workers, std::max<std::size_t>(cfg.max_iterations, 1));

  if (workers <= 1) {
    Scorer scorer(desc, seg, params.delta_s, params.delta_n);
    std::vector<double> scratch;
    double best = -1.0;
    for (std::size_t it = 0; unbounded || it < cfg.max_iterations; ++it) {
      if (out_of_time()) break;
      auto r = detail::run_iteration(it, seg, desc, cfg, params, scorer, scratch, best);
      if (r.has_hypothesis) best = std::max(best, r.score);
      if (unbounded) {
        results.push_back(std::move(r));
      } else {
        results[it] = std::move(r);
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::vector<std::atomic<double>> finished(cfg.max_iterations);
    for (auto& f : finished) f.store(-1.0);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        Scorer scorer(desc, seg, params.delta_s, params.delta_n);
        std::vector<double> scratch;
        try {
          while (!stop.load()) {
            const std::size_t it = next.fetch_add(1);
            if (it >= cfg.max_iterations) break;
            if (out_of_time()) {
              stop = true;
              break;
            }
            double floor = -1.0;
            for (std::size_t j = 0; j < it; ++j) floor = std::max(floor, finished[j].load());
            results[it] = detail::run_iteration(it, seg, desc, cfg, params, scorer, scratch, floor);
            if (results[it].has_hypothesis) finished[it].store(results[it].score);
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          stop = true;
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  PoseEstimate est;
  bool found = false;
  double best_rms = 0.0;
  for (std::size_t it = 0; it < results.size(); ++it) {
    const auto& r = results[it];
    if (r.ran) {
      ++est.iterations_used;
      if (r.valid_base) {
        ++est.bases_sampled;
      } else {
        ++est.no_valid_base;
      }
      est.degenerate_bases += r.degenerate;
      est.sets_extracted += r.extracted;
      est.sets_pruned += r.pruned;
      est.sets_evaluated += r.evaluated;
      est.timings.sampling += r.timings.sampling;
      est.timings.extraction += r.timings.extraction;
      est.timings.verification += r.timings.verification;
      if (r.has_hypothesis && r.score > 0.0 && (!found || detail::better(r.score, r.fit_rms, est.score, best_rms))) {
        found = true;
        est.score = r.score;
        best_rms = r.fit_rms;
        est.transform = r.transform;
        est.best_iteration = it;
      }
    }
    est.score_trace.push_back(est.score);
  }
  while (!est.score_trace.empty() && !results[est.score_trace.size() - 1].ran) est.score_trace.pop_back();
  est.timings.total = detail::seconds_since(start);
  if (!found) {
    throw Error(ErrorCode::NoHypothesisFound,
                "no hypothesis scored above zero in " + std::to_string(est.iterations_used) + " iterations");
  }
  return est;
}

/// Mean absolute roll, pitch and yaw (degrees) of Ra * Rb^T, using the
/// Z-Y-X (yaw-pitch-roll) decomposition.
inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d r = a.rotation() * b.rotation().transpose();
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return (std::abs(roll) + std::abs(pitch) + std::abs(yaw)) / 3.0 * 180.0 / std::numbers::pi;
}

/// Angle (degrees) of the relative rotation Ra * Rb^T.
inline double geodesic_rotation_error(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d r = a.rotation() * b.rotation().transpose();
  const Eigen::Vector3d axis_sin(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace stocs
