#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "stocs/config.hpp"
#include "stocs/descriptor.hpp"
#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/io.hpp"
#include "stocs/metrics.hpp"
#include "stocs/random.hpp"
#include "stocs/registration.hpp"
#include "stocs/synth.hpp"

namespace stocs {

/// Reads a scene spec. `noise_res` adds noise in units of the model
/// resolution on top of `noise_sigma` (meters).
inline SceneSpec parse_scene_spec(const Settings& settings, double model_resolution) {
  SceneSpec spec;
  double noise_res = 0.0;
  for (const auto& [key, value] : settings) {
    if (key == "noise_sigma") spec.noise_sigma = parse_real(key, value);
    else if (key == "noise_res") noise_res = parse_real(key, value);
    else if (key == "outlier_fraction") spec.outlier_fraction = parse_real(key, value);
    else if (key == "occlusion_fraction") spec.occlusion_fraction = parse_real(key, value);
    else if (key == "prior_inlier_mean") spec.prior_inlier_mean = parse_real(key, value);
    else if (key == "prior_outlier_mean") spec.prior_outlier_mean = parse_real(key, value);
    else if (key == "seed") spec.seed = parse_unsigned(key, value);
    else throw Error(ErrorCode::InvalidSpec, "unknown key '" + key + "'");
  }
  spec.noise_sigma += noise_res * model_resolution;
  spec.validate();
  return spec;
}

/// A compared configuration: prior mode plus pair filter.
struct BenchMode {
  std::string name;
  PriorMode prior = PriorMode::soft;
  PairFilter filter = PairFilter::ppf;
};

/// Soft prior with feature filtering.
inline BenchMode stocs_mode() { return {"stocs", PriorMode::soft, PairFilter::ppf}; }
/// Uniform prior over the hard-thresholded segment with distance-only filtering.
inline BenchMode baseline_mode() { return {"baseline", PriorMode::uniform, PairFilter::distance}; }

inline BenchMode parse_bench_mode(std::string_view name) {
  if (name == "stocs") return stocs_mode();
  if (name == "baseline") return baseline_mode();
  throw Error(ErrorCode::InvalidConfig, "modes: expected stocs or baseline, got '" + std::string(name) + "'");
}

/// Scene parameters of one grid cell. Noise is `noise_sigma` meters plus
/// `noise_res` model resolutions.
struct BenchSpec {
  double noise_sigma = 0.0;
  double noise_res = 0.0;
  double outlier_fraction = 0.0;
  double occlusion_fraction = 0.0;
  double prior_inlier_mean = 0.6;
  double prior_outlier_mean = 0.15;
};

struct BenchGrid {
  std::vector<BenchSpec> specs{BenchSpec{}};
  std::vector<BenchMode> modes{stocs_mode(), baseline_mode()};
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  /// Trials run concurrently on this many threads; rows do not depend on it.
  std::size_t workers = 1;
  /// Registration and descriptor settings shared by every mode; prior and
  /// pair filter are overridden per mode.
  RunConfig run;
};

/// Grid file: the scene keys of a spec take comma-separated lists and the
/// specs are their cartesian product (last key varying fastest, in the order
/// noise_sigma, noise_res, outlier_fraction, occlusion_fraction,
/// prior_inlier_mean, prior_outlier_mean). `modes` lists stocs and/or
/// baseline; `trials`, `seed` and `workers` are scalars; every other key is a
/// run setting.
inline BenchGrid parse_bench_grid(const Settings& settings) {
  BenchGrid grid;
  std::vector<double> noise{0.0}, noise_res{0.0}, outliers{0.0}, occlusion{0.0}, inlier{0.6}, outlier{0.15};
  Settings run;
  for (const auto& [key, value] : settings) {
    if (key == "noise_sigma") noise = parse_real_list(key, value);
    else if (key == "noise_res") noise_res = parse_real_list(key, value);
    else if (key == "outlier_fraction") outliers = parse_real_list(key, value);
    else if (key == "occlusion_fraction") occlusion = parse_real_list(key, value);
    else if (key == "prior_inlier_mean") inlier = parse_real_list(key, value);
    else if (key == "prior_outlier_mean") outlier = parse_real_list(key, value);
    else if (key == "modes") {
      grid.modes.clear();
      for (const auto& m : parse_word_list(value)) grid.modes.push_back(parse_bench_mode(m));
    } else if (key == "trials") grid.trials = parse_unsigned(key, value);
    else if (key == "seed") grid.seed = parse_unsigned(key, value);
    else if (key == "workers") grid.workers = parse_unsigned(key, value);
    else if (key == "prior" || key == "pair_filter") {
      throw Error(ErrorCode::InvalidConfig, key + ": set by modes in a grid");
    } else run.emplace(key, value);
  }
  apply_settings(grid.run, run);
  validate(grid.run);
  if (grid.workers == 0) throw Error(ErrorCode::InvalidConfig, "workers must be positive");
  grid.specs.clear();
  for (const double a : noise)
    for (const double b : noise_res)
      for (const double c : outliers)
        for (const double d : occlusion)
          for (const double e : inlier)
            for (const double f : outlier) grid.specs.push_back({a, b, c, d, e, f});
  return grid;
}

struct BenchRow {
  std::size_t spec = 0;
  std::string mode;
  std::size_t trial = 0;
  std::uint64_t scene_seed = 0;
  std::uint64_t registration_seed = 0;
  BenchSpec params;
  std::size_t segment_points = 0;
  bool found = false;
  bool success = false;
  double rotation_error_deg = std::numeric_limits<double>::quiet_NaN();
  double geodesic_error_deg = std::numeric_limits<double>::quiet_NaN();
  double translation_error = std::numeric_limits<double>::quiet_NaN();
  double add = std::numeric_limits<double>::quiet_NaN();
  double adds = std::numeric_limits<double>::quiet_NaN();
  double score = 0.0;
  std::size_t iterations_used = 0;
  std::size_t bases_sampled = 0;
  double sets_per_base = 0.0;
  std::size_t sets_evaluated = 0;
  StageTimings timings;
};

/// Success: geodesic rotation error below 10 degrees and ADD-S below 2% of
/// the model diameter.
inline bool pose_success(double geodesic_deg, double adds, double model_diameter) {
  return geodesic_deg < 10.0 && adds < 0.02 * model_diameter;
}

/// Scene and registration seeds of a trial; independent of the mode so the
/// modes see identical scenes.
inline std::pair<std::uint64_t, std::uint64_t> trial_seeds(std::uint64_t grid_seed, std::size_t spec,
                                                          std::size_t trial) {
  auto rng = make_stream(grid_seed, (static_cast<std::uint64_t>(spec) << 32) ^ static_cast<std::uint64_t>(trial));
  const std::uint64_t scene = rng();
  const std::uint64_t reg = rng();
  return {scene, reg};
}

/// Runs every (spec, trial) on every mode. Scenes are generated from
/// `model`; the descriptor should be built from the same cloud.
inline std::vector<BenchRow> run_benchmark(const PointCloud& model, const ModelDescriptor& desc,
                                           const BenchGrid& grid) {
  validate(grid.run);
  const double diameter = desc.model_diameter();
  const std::size_t per_spec = grid.trials;
  const std::size_t jobs = grid.specs.size() * per_spec;
  const std::size_t modes = grid.modes.size();
  std::vector<BenchRow> rows(jobs * modes);

  const auto run_job = [&](std::size_t job) {
    const std::size_t s = job / per_spec;
    const std::size_t t = job % per_spec;
    const BenchSpec& p = grid.specs[s];
    const auto [scene_seed, reg_seed] = trial_seeds(grid.seed, s, t);
    SceneSpec spec;
    spec.noise_sigma = p.noise_sigma + p.noise_res * model.resolution();
    spec.outlier_fraction = p.outlier_fraction;
    spec.occlusion_fraction = p.occlusion_fraction;
    spec.prior_inlier_mean = p.prior_inlier_mean;
    spec.prior_outlier_mean = p.prior_outlier_mean;
    spec.seed = scene_seed;
    const SyntheticScene scene = generate_scene(model, spec);
    for (std::size_t m = 0; m < modes; ++m) {
      BenchRow& row = rows[(s * modes + m) * per_spec + t];
      row.spec = s;
      row.mode = grid.modes[m].name;
      row.trial = t;
      row.scene_seed = scene_seed;
      row.registration_seed = reg_seed;
      row.params = p;
      RunConfig run = grid.run;
      run.registration.prior = grid.modes[m].prior;
      run.registration.pair_filter = grid.modes[m].filter;
      run.registration.seed = reg_seed;
      run.registration.workers = 1;
      try {
        const SoftSegment seg = build_run_segment(scene.cloud, scene.weights, run);
        row.segment_points = seg.size();
        const PoseEstimate est = register_pose(seg, desc, run.registration);
        row.found = true;
        row.rotation_error_deg = rotation_error(est.transform, scene.ground_truth);
        row.geodesic_error_deg = geodesic_rotation_error(est.transform, scene.ground_truth);
        row.translation_error = translation_error(est.transform, scene.ground_truth);
        row.add = add_metric(model, est.transform, scene.ground_truth);
        row.adds = adds_metric(model, est.transform, scene.ground_truth);
        row.success = pose_success(row.geodesic_error_deg, row.adds, diameter);
        row.score = est.score;
        row.iterations_used = est.iterations_used;
        row.bases_sampled = est.bases_sampled;
        row.sets_per_base = est.sets_per_base();
        row.sets_evaluated = est.sets_evaluated;
        row.timings = est.timings;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoHypothesisFound && e.code() != ErrorCode::SegmentTooSmall) throw;
      }
    }
  };

  const std::size_t threads = std::min(grid.workers, std::max<std::size_t>(jobs, 1));
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs; ++j) run_job(j);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs) return;
        try {
          run_job(j);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(jobs);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

inline constexpr int kBenchColumnsVersion = 1;

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool timings = false) {
  out << "spec,mode,trial,scene_seed,registration_seed,noise_sigma,noise_res,outlier_fraction,occlusion_fraction,"
         "prior_inlier_mean,prior_outlier_mean,segment_points,found,success,rotation_error_deg,geodesic_error_deg,"
         "translation_error,add,adds,score,iterations_used,bases_sampled,sets_per_base,sets_evaluated";
  if (timings) out << ",time_sampling,time_extraction,time_verification,time_total";
  out << '\n';
  const auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
  for (const auto& r : rows) {
    out << r.spec << ',' << r.mode << ',' << r.trial << ',' << r.scene_seed << ',' << r.registration_seed << ','
        << num(r.params.noise_sigma) << ',' << num(r.params.noise_res) << ',' << num(r.params.outlier_fraction) << ','
        << num(r.params.occlusion_fraction) << ',' << num(r.params.prior_inlier_mean) << ','
        << num(r.params.prior_outlier_mean) << ',' << r.segment_points << ',' << (r.found ? 1 : 0) << ','
        << (r.success ? 1 : 0) << ',' << num(r.rotation_error_deg) << ',' << num(r.geodesic_error_deg) << ','
        << num(r.translation_error) << ',' << num(r.add) << ',' << num(r.adds) << ',' << num(r.score) << ','
        << r.iterations_used << ',' << r.bases_sampled << ',' << num(r.sets_per_base) << ',' << r.sets_evaluated;
    if (timings) {
      out << ',' << num(r.timings.sampling) << ',' << num(r.timings.extraction) << ','
          << num(r.timings.verification) << ',' << num(r.timings.total);
    }
    out << '\n';
  }
}

/// Fraction of successful rows among those matching `mode` and `spec`.
inline double success_rate(const std::vector<BenchRow>& rows, std::string_view mode, std::size_t spec) {
  std::size_t n = 0, ok = 0;
  for (const auto& r : rows) {
    if (r.mode != mode || r.spec != spec) continue;
    ++n;
    ok += r.success ? 1 : 0;
  }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
}

}  // namespace stocs
