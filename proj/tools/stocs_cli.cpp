#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stocs/stocs.hpp"

namespace {

using namespace stocs;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoHypothesis = 3;

/// Command-line overrides for run settings; only flags the user actually
/// passed take part in the merge.
struct FlagSet {
  struct Entry {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::vector<Entry> entries;
  std::vector<std::string> sets;

  void bind(CLI::App& app, const std::vector<std::pair<std::string, std::string>>& flags) {
    entries.reserve(flags.size());
    for (const auto& [flag, key] : flags) entries.push_back({key, {}, nullptr});
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const auto& info = *std::find_if(run_settings().begin(), run_settings().end(),
                                       [&](const SettingInfo& s) { return s.key == flags[i].second; });
      entries[i].option = app.add_option(flags[i].first, entries[i].value, std::string(info.help))
                              ->default_str(std::string(info.default_text));
    }
    app.add_option("--set", sets, "extra run setting as key=value (repeatable)");
  }

  Settings collect() const {
    Settings out;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + s + "'");
      out[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& e : entries) {
      if (e.option->count() > 0) out[e.key] = e.value;
    }
    return out;
  }
};

std::string settings_help() {
  std::string out = "Run settings (config file keys, defaults):\n";
  for (const auto& s : run_settings()) {
    out += "  " + std::string(s.key) + " = " + std::string(s.default_text) + "  " + std::string(s.help) + "\n";
  }
  return out;
}

RunConfig load_run_config(const std::string& config_path, const FlagSet& flags) {
  const Settings file = config_path.empty() ? Settings{} : load_settings(config_path);
  return resolve_run_config(file, flags.collect());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic congruent sets: model building, pose estimation, synthetic scenes and benchmarks"};
  app.require_subcommand(1);
  app.footer(settings_help());

  auto* build = app.add_subcommand("build-model", "build a model descriptor from an oriented cloud");
  std::string build_cloud, build_out, build_config;
  build->add_option("--cloud", build_cloud, "model cloud with normals")->required();
  build->add_option("--out", build_out, "descriptor output file")->required();
  build->add_option("--config", build_config, "run settings file");
  FlagSet build_flags;
  build_flags.bind(*build, {{"--dist-step", "dist_step"},
                            {"--angle-step-deg", "angle_step_deg"},
                            {"--target-points", "target_points"}});

  auto* estimate = app.add_subcommand("estimate", "estimate the model pose in a scene");
  std::string est_model, est_scene, est_out, est_config;
  estimate->add_option("--model", est_model, "model descriptor")->required();
  estimate->add_option("--scene", est_scene, "scene cloud with normals and optional prob")->required();
  estimate->add_option("--out", est_out, "pose output file")->required();
  estimate->add_option("--config", est_config, "run settings file");
  FlagSet est_flags;
  est_flags.bind(*estimate, {{"--iterations", "iterations"},
                             {"--max-seconds", "max_seconds"},
                             {"--seed", "seed"},
                             {"--prior", "prior"},
                             {"--pair-filter", "pair_filter"},
                             {"--workers", "workers"}});

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
  std::string syn_model, syn_spec, syn_scene, syn_gt;
  std::uint64_t syn_seed = 0;
  synth->add_option("--model", syn_model, "model cloud with normals")->required();
  synth->add_option("--spec", syn_spec, "scene spec file")->required();
  synth->add_option("--out-scene", syn_scene, "scene cloud output")->required();
  synth->add_option("--out-gt", syn_gt, "ground-truth pose output")->required();
  auto* syn_seed_opt = synth->add_option("--seed", syn_seed, "scene seed (overrides the spec)")->default_str("spec");

  auto* make = app.add_subcommand("make-model", "write one of the built-in synthetic test models");
  std::string make_shape = "blob", make_out;
  make->add_option("--shape", make_shape, "box, revolve or blob")
      ->check(CLI::IsMember({"box", "revolve", "blob"}))
      ->default_str("blob");
  make->add_option("--out", make_out, "model cloud output")->required();
  std::size_t make_target = 0;
  auto* make_target_opt =
      make->add_option("--target-points", make_target, "subsample as the descriptor would")->default_str("none");

  auto* bench = app.add_subcommand("bench", "run the benchmark grid and write CSV rows");
  std::string bench_model, bench_grid, bench_out;
  std::size_t bench_trials = 10;
  std::uint64_t bench_seed = 0;
  std::size_t bench_workers = 1;
  bool bench_timings = false;
  bench->add_option("--model", bench_model, "model cloud with normals")->required();
  bench->add_option("--grid", bench_grid, "grid file")->required();
  auto* trials_opt = bench->add_option("--trials", bench_trials, "trials per grid cell")->default_str("10");
  bench->add_option("--out", bench_out, "CSV output")->required();
  auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "grid seed (overrides the grid file)")->default_str("0");
  auto* workers_opt = bench->add_option("--workers", bench_workers, "concurrent trials")->default_str("1");
  bench->add_flag("--timings", bench_timings, "append wall-clock timing columns (not reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (build->parsed()) {
      const RunConfig cfg = load_run_config(build_config, build_flags);
      const CloudData cloud = load_cloud(build_cloud);
      const auto desc = ModelDescriptor::build(cloud.cloud, cfg.discretization(), cfg.target_points);
      save_descriptor(build_out, desc);
    } else if (estimate->parsed()) {
      const RunConfig cfg = load_run_config(est_config, est_flags);
      const auto desc = load_descriptor(est_model);
      const CloudData scene = load_cloud(est_scene);
      const std::vector<double> weights = scene.weights.value_or(std::vector<double>(scene.cloud.size(), 1.0));
      const SoftSegment seg = build_run_segment(scene.cloud, weights, cfg);
      const PoseEstimate est = register_pose(seg, desc, cfg.registration);
      save_pose(est_out, est.transform, est.score);
    } else if (synth->parsed()) {
      const CloudData model = load_cloud(syn_model);
      SceneSpec spec = parse_scene_spec(load_settings(syn_spec), model.cloud.resolution());
      if (syn_seed_opt->count() > 0) spec.seed = syn_seed;
      const SyntheticScene scene = generate_scene(model.cloud, spec);
      save_cloud(syn_scene, scene.cloud, &scene.weights);
      save_pose(syn_gt, scene.ground_truth);
    } else if (make->parsed()) {
      PointCloud model = make_shape == "box"       ? make_box_model()
                         : make_shape == "revolve" ? make_revolve_model()
                                                   : make_blob_model();
      if (make_target_opt->count() > 0) model = subsample_to_target(model, make_target);
      save_cloud(make_out, model);
    } else if (bench->parsed()) {
      const CloudData model = load_cloud(bench_model);
      BenchGrid grid = parse_bench_grid(load_settings(bench_grid));
      if (trials_opt->count() > 0) grid.trials = bench_trials;
      if (bench_seed_opt->count() > 0) grid.seed = bench_seed;
      if (workers_opt->count() > 0) {
        if (bench_workers == 0) throw Error(ErrorCode::InvalidConfig, "workers must be positive");
        grid.workers = bench_workers;
      }
      const auto desc = ModelDescriptor::build(model.cloud, grid.run.discretization(), grid.run.target_points);
      const auto rows = run_benchmark(desc.model(), desc, grid);
      std::ofstream out(bench_out);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + bench_out);
      write_bench_csv(out, rows, bench_timings);
      if (!out) throw Error(ErrorCode::IoError, "write failed: " + bench_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NoHypothesisFound ? kExitNoHypothesis : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
