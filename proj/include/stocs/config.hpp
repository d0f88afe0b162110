#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stocs/error.hpp"
#include "stocs/io.hpp"
#include "stocs/ppf.hpp"
#include "stocs/registration.hpp"
#include "stocs/soft_segment.hpp"
#include "stocs/synth.hpp"

namespace stocs {

using Settings = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline Error config_error(std::string_view key, const std::string& what) {
  return Error(ErrorCode::InvalidConfig, std::string(key) + ": " + what);
}

}  // namespace detail

/// Reads `key = value` lines. `#` starts a comment; blank lines are skipped;
/// a key may appear once.
inline Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, where + "expected key = value");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, where + "empty key");
    if (!out.emplace(std::string(key), std::string(value)).second) {
      throw Error(ErrorCode::InvalidConfig, where + "duplicate key '" + std::string(key) + "'");
    }
  }
  return out;
}

inline Settings parse_settings(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_settings(in);
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse_settings(in);
}

inline double parse_real(std::string_view key, std::string_view value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  const auto v = parse_double(value);
  if (!v || std::isnan(*v)) throw detail::config_error(key, "not a number: '" + std::string(value) + "'");
  return *v;
}

inline std::uint64_t parse_unsigned(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw detail::config_error(key, "not a non-negative integer: '" + std::string(value) + "'");
  }
  return v;
}

/// Comma-separated list of reals.
inline std::vector<double> parse_real_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  while (true) {
    const auto comma = value.find(',');
    out.push_back(parse_real(key, detail::trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

inline std::vector<std::string> parse_word_list(std::string_view value) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = value.find(',');
    out.emplace_back(detail::trim(value.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

inline PriorMode parse_prior(std::string_view value) {
  if (value == "soft") return PriorMode::soft;
  if (value == "uniform") return PriorMode::uniform;
  throw detail::config_error("prior", "expected soft or uniform, got '" + std::string(value) + "'");
}

inline PairFilter parse_pair_filter(std::string_view value) {
  if (value == "ppf") return PairFilter::ppf;
  if (value == "distance") return PairFilter::distance;
  throw detail::config_error("pair_filter", "expected ppf or distance, got '" + std::string(value) + "'");
}

inline const char* to_string(PriorMode m) { return m == PriorMode::soft ? "soft" : "uniform"; }
inline const char* to_string(PairFilter f) { return f == PairFilter::ppf ? "ppf" : "distance"; }

/// Every tunable of one build-and-estimate run.
struct RunConfig {
  double dist_step = 0.005;
  double angle_step_deg = 10.0;
  std::size_t target_points = 500;
  RegistrationConfig registration;
  /// Soft-segment admission threshold on raw weights; unset means 1e-4 / n.
  std::optional<double> epsilon;
  /// Raw-weight cut for the uniform-prior segment.
  double hard_threshold = 0.4;

  Discretization discretization() const {
    return {dist_step, angle_step_deg * std::numbers::pi / 180.0};
  }
};

struct SettingInfo {
  std::string_view key;
  std::string_view default_text;
  std::string_view help;
  std::function<void(RunConfig&, std::string_view)> apply;
};

namespace detail {

inline std::optional<double> parse_auto(std::string_view key, std::string_view value) {
  if (value == "auto") return std::nullopt;
  return parse_real(key, value);
}

}  // namespace detail

/// The recognized keys, their defaults and how each is applied.
inline const std::vector<SettingInfo>& run_settings() {
  static const std::vector<SettingInfo> table{
      {"dist_step", "0.005", "descriptor distance bin width (m)",
       [](RunConfig& c, std::string_view v) { c.dist_step = parse_real("dist_step", v); }},
      {"angle_step_deg", "10", "descriptor angle bin width (degrees)",
       [](RunConfig& c, std::string_view v) { c.angle_step_deg = parse_real("angle_step_deg", v); }},
      {"target_points", "500", "model subsample size for the descriptor",
       [](RunConfig& c, std::string_view v) { c.target_points = parse_unsigned("target_points", v); }},
      {"iterations", "100", "iteration budget (inf for unbounded)",
       [](RunConfig& c, std::string_view v) {
         c.registration.max_iterations =
             v == "inf" ? RegistrationConfig::kUnboundedIterations : parse_unsigned("iterations", v);
       }},
      {"max_seconds", "inf", "runtime budget (s)",
       [](RunConfig& c, std::string_view v) { c.registration.max_runtime = parse_real("max_seconds", v); }},
      {"seed", "0", "random seed",
       [](RunConfig& c, std::string_view v) { c.registration.seed = parse_unsigned("seed", v); }},
      {"prior", "soft", "segment prior: soft or uniform",
       [](RunConfig& c, std::string_view v) { c.registration.prior = parse_prior(v); }},
      {"pair_filter", "ppf", "pair matching: ppf or distance",
       [](RunConfig& c, std::string_view v) { c.registration.pair_filter = parse_pair_filter(v); }},
      {"delta_s", "auto", "score distance threshold (m); auto = 2 x scene resolution",
       [](RunConfig& c, std::string_view v) { c.registration.delta_s = detail::parse_auto("delta_s", v); }},
      {"delta_n", "0.866025", "score normal threshold (cosine)",
       [](RunConfig& c, std::string_view v) { c.registration.delta_n = parse_real("delta_n", v); }},
      {"delta_e", "auto", "congruence tolerance (m); auto = 2 x dist_step",
       [](RunConfig& c, std::string_view v) { c.registration.delta_e = detail::parse_auto("delta_e", v); }},
      {"max_sets", "1000", "congruent sets kept per base",
       [](RunConfig& c, std::string_view v) { c.registration.max_sets = parse_unsigned("max_sets", v); }},
      {"eps_angle_deg", "15", "minimum base angle at b1 (degrees)",
       [](RunConfig& c, std::string_view v) {
         c.registration.eps_angle = parse_real("eps_angle_deg", v) * std::numbers::pi / 180.0;
       }},
      {"eps_plane", "auto", "maximum b4 distance from plane(b1, b2, b3) (m); auto = max(0.01, 2 x scene resolution)",
       [](RunConfig& c, std::string_view v) { c.registration.eps_plane = detail::parse_auto("eps_plane", v); }},
      {"min_pair_dist", "auto", "minimum base point separation (m); auto = 0.15 x model diameter",
       [](RunConfig& c, std::string_view v) {
         c.registration.min_pair_dist = detail::parse_auto("min_pair_dist", v);
       }},
      {"retries", "20", "base sampling attempts per iteration",
       [](RunConfig& c, std::string_view v) {
         const auto r = parse_unsigned("retries", v);
         if (r > 1000000) throw detail::config_error("retries", "too large");
         c.registration.retries = static_cast<int>(r);
       }},
      {"workers", "1", "worker threads",
       [](RunConfig& c, std::string_view v) { c.registration.workers = parse_unsigned("workers", v); }},
      {"epsilon", "auto", "soft segment admission threshold; auto = 1e-4 / point count",
       [](RunConfig& c, std::string_view v) { c.epsilon = detail::parse_auto("epsilon", v); }},
      {"hard_threshold", "0.4", "raw-weight cut for the uniform prior",
       [](RunConfig& c, std::string_view v) { c.hard_threshold = parse_real("hard_threshold", v); }},
  };
  return table;
}

inline void validate(const RunConfig& c) {
  if (!(c.dist_step > 0.0) || !std::isfinite(c.dist_step)) throw detail::config_error("dist_step", "must be positive");
  if (!(c.angle_step_deg > 0.0) || !std::isfinite(c.angle_step_deg)) {
    throw detail::config_error("angle_step_deg", "must be positive");
  }
  if (c.target_points < 2) throw detail::config_error("target_points", "must be at least 2");
  c.registration.validate();
  if (c.registration.eps_angle) {
    SamplerParams p;
    p.eps_angle = *c.registration.eps_angle;
    p.validate();
  }
  if (c.epsilon && !(*c.epsilon >= 0.0)) throw detail::config_error("epsilon", "must be non-negative");
  if (!(c.hard_threshold >= 0.0)) throw detail::config_error("hard_threshold", "must be non-negative");
}

/// Applies settings in key order; unknown keys are rejected.
inline void apply_settings(RunConfig& cfg, const Settings& settings) {
  const auto& table = run_settings();
  for (const auto& [key, value] : settings) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const SettingInfo& s) { return s.key == key; });
    if (it == table.end()) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    it->apply(cfg, value);
  }
}

/// Defaults, then the config file, then command-line flags.
inline RunConfig resolve_run_config(const Settings& file, const Settings& flags) {
  RunConfig cfg;
  apply_settings(cfg, file);
  apply_settings(cfg, flags);
  validate(cfg);
  return cfg;
}

/// Builds the segment the run's prior mode asks for.
inline SoftSegment build_run_segment(const PointCloud& scene, std::span<const double> weights, const RunConfig& cfg) {
  if (cfg.registration.prior == PriorMode::uniform) return build_uniform_segment(scene, weights, cfg.hard_threshold);
  return build_segment(scene, weights, cfg.epsilon.value_or(default_epsilon(scene.size())));
}

}  // namespace stocs
