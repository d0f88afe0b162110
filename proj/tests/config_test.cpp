#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

namespace stocs {
namespace {

ErrorCode config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::FormatError;
}

TEST(Settings, ParsesCommentsAndWhitespace) {
  const auto s = parse_settings("# header\n  seed = 7  # trailing\n\nprior=uniform\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.at("seed"), "7");
  EXPECT_EQ(s.at("prior"), "uniform");
}

TEST(Settings, MalformedLines) {
  EXPECT_EQ(config_error([] { parse_settings("seed 7\n"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(config_error([] { parse_settings(" = 7\n"); }), ErrorCode::InvalidConfig);
  try {
    parse_settings("seed = 1\n\nseed = 2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(RunSettings, DefaultsMatchTheTable) {
  const RunConfig defaults;
  RunConfig from_table;
  Settings all;
  for (const auto& s : run_settings()) all.emplace(std::string(s.key), std::string(s.default_text));
  apply_settings(from_table, all);
  EXPECT_EQ(from_table.dist_step, defaults.dist_step);
  EXPECT_EQ(from_table.angle_step_deg, defaults.angle_step_deg);
  EXPECT_EQ(from_table.target_points, defaults.target_points);
  const auto& a = from_table.registration;
  const auto& b = defaults.registration;
  EXPECT_EQ(a.max_iterations, b.max_iterations);
  EXPECT_EQ(a.max_runtime, b.max_runtime);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.prior, b.prior);
  EXPECT_EQ(a.pair_filter, b.pair_filter);
  EXPECT_EQ(a.delta_s, b.delta_s);
  EXPECT_NEAR(a.delta_n, b.delta_n, 1e-6);
  EXPECT_EQ(a.delta_e, b.delta_e);
  EXPECT_EQ(a.max_sets, b.max_sets);
  EXPECT_NEAR(*a.eps_angle, SamplerParams{}.eps_angle, 1e-15);
  EXPECT_EQ(a.eps_plane, b.eps_plane);
  EXPECT_EQ(a.min_pair_dist, b.min_pair_dist);
  EXPECT_EQ(a.retries, b.retries);
  EXPECT_EQ(a.workers, b.workers);
  EXPECT_EQ(from_table.epsilon, defaults.epsilon);
  EXPECT_EQ(from_table.hard_threshold, defaults.hard_threshold);
  EXPECT_EQ(defaults.hard_threshold, kDefaultHardThreshold);
}

/// Command-line flags beat the file, which beats the defaults, key by key.
TEST(RunSettings, PrecedenceMatrix) {
  for (int mask = 0; mask < 16; ++mask) {
    Settings file, flags;
    const bool file_seed = mask & 1, flag_seed = mask & 2, file_prior = mask & 4, flag_prior = mask & 8;
    if (file_seed) file["seed"] = "11";
    if (flag_seed) flags["seed"] = "22";
    if (file_prior) file["prior"] = "uniform";
    if (flag_prior) flags["prior"] = "soft";
    const auto cfg = resolve_run_config(file, flags);
    const std::uint64_t seed = flag_seed ? 22 : file_seed ? 11 : 0;
    const PriorMode prior = flag_prior ? PriorMode::soft : file_prior ? PriorMode::uniform : PriorMode::soft;
    EXPECT_EQ(cfg.registration.seed, seed) << mask;
    EXPECT_EQ(cfg.registration.prior, prior) << mask;
  }
}

TEST(RunSettings, ValuesAreApplied) {
  const auto cfg = resolve_run_config(parse_settings("iterations = inf\nmax_seconds = 2.5\ndelta_s = 0.004\n"
                                                     "pair_filter = distance\neps_angle_deg = 20\nepsilon = 0.001\n"),
                                      {});
  EXPECT_EQ(cfg.registration.max_iterations, RegistrationConfig::kUnboundedIterations);
  EXPECT_EQ(cfg.registration.max_runtime, 2.5);
  EXPECT_EQ(*cfg.registration.delta_s, 0.004);
  EXPECT_EQ(cfg.registration.pair_filter, PairFilter::distance);
  EXPECT_NEAR(*cfg.registration.eps_angle, testing::rad(20), 1e-15);
  EXPECT_EQ(*cfg.epsilon, 0.001);
  EXPECT_NEAR(cfg.discretization().angle_step, testing::rad(10), 1e-15);
}

TEST(RunSettings, Rejections) {
  const auto bad = [](const char* text) {
    return config_error([&] { resolve_run_config(parse_settings(text), {}); });
  };
  EXPECT_EQ(bad("colour = red\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("seed = -1\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("seed = 1.5\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("prior = hard\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("pair_filter = ransac\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("dist_step = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("delta_s = -1\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("delta_n = 2\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("eps_angle_deg = 95\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("iterations = inf\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("max_sets = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("workers = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad("max_seconds = abc\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(config_error([] { resolve_run_config({}, {{"bogus", "1"}}); }), ErrorCode::InvalidConfig);
}

TEST(RunSettings, SegmentFollowsPriorMode) {
  const PointCloud cloud({Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(0, 0, 1), Point3(1, 1, 1)});
  const std::vector<double> w{0.9, 0.5, 0.45, 0.41, 0.1};
  RunConfig cfg;
  const auto soft = build_run_segment(cloud, w, cfg);
  EXPECT_EQ(soft.size(), 5u);
  EXPECT_NEAR(soft.prior(0), 0.9 / 2.36, 1e-12);
  cfg.registration.prior = PriorMode::uniform;
  const auto hard = build_run_segment(cloud, w, cfg);
  EXPECT_EQ(hard.size(), 4u);
  EXPECT_EQ(hard.prior(3), 0.25);
}

TEST(RunSettings, FileOnDisk) {
  const std::string path = ::testing::TempDir() + "stocs_config_test.cfg";
  {
    std::ofstream out(path);
    out << "seed = 5\nworkers = 2\n";
  }
  const auto cfg = resolve_run_config(load_settings(path), {});
  EXPECT_EQ(cfg.registration.seed, 5u);
  EXPECT_EQ(cfg.registration.workers, 2u);
  EXPECT_EQ(config_error([&] { load_settings(path + ".missing"); }), ErrorCode::IoError);
}

}  // namespace
}  // namespace stocs
