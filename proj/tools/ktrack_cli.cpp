// ktrack command-line harness: simulate, track, eval, experiment, speed.

#include <ktrack/dataset.hpp>
#include <ktrack/experiment.hpp>
#include <ktrack/metrics.hpp>
#include <ktrack/sim.hpp>
#include <ktrack/tracker.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SimulateArgs {
  std::string config;
  fs::path out_dir = "data";
  int count = 1;
  std::uint64_t seed = 0;
  int frames = 100;
  double fps = 30.0;
  double position_sigma = 0.0;
  double velocity_sigma = 0.0;
  double rotation_sigma_deg = 0.0;
  double translation_sigma = 0.0;
  double outlier_probability = 0.0;
  std::string object_id = "synthetic";
};

int run_simulate(const SimulateArgs& a) {
  ktrack::exp::GenerateSpec g{a.count, a.seed, a.frames, a.fps};
  ktrack::sim::ContactNoiseSpec cn{a.position_sigma, a.velocity_sigma, a.seed};
  ktrack::sim::HypothesisNoiseSpec hn;
  hn.rotation_sigma = ktrack::deg2rad(a.rotation_sigma_deg);
  hn.translation_sigma = a.translation_sigma;
  hn.outlier_probability = a.outlier_probability;
  hn.seed = a.seed;
  fs::path out_dir = a.out_dir;
  std::string object_id = a.object_id;
  if (!a.config.empty()) {
    // Same schema as an experiment config; only the generation part is used.
    const auto c = ktrack::exp::read_experiment_config(a.config);
    if (!c.generate) throw ktrack::ConfigError("/trajectories/generate", "missing");
    g = *c.generate;
    cn = c.contact_noise;
    hn = c.hypothesis_noise.value_or(ktrack::sim::HypothesisNoiseSpec{});
    out_dir = c.output_dir;
    object_id = c.object_id;
  }
  for (int i = 0; i < g.count; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    const auto spec = ktrack::sim::default_trajectory_spec(g.seed + k, g.frame_count, g.fps);
    auto c = cn;
    c.seed += k;
    auto h = hn;
    h.seed += k;
    const auto seq = ktrack::sim::simulate_sequence(spec, ktrack::Pose{}, ktrack::sim::default_contact_patch(), c, h);
    const fs::path path = out_dir / ("traj_" + std::to_string(g.seed + k) + ".json");
    ktrack::io::write_trajectory(path, ktrack::io::to_trajectory_file(seq, object_id, g.fps));
    std::cout << path.string() << "\n";
  }
  return 0;
}

struct TrackArgs {
  fs::path input;
  fs::path out;
  std::string mode = "fused";
  int window_n = 5;
  double lambda_t = 0.01;
  double lambda_r = 0.1;
};

int run_track(const TrackArgs& a) {
  const auto file = ktrack::io::read_trajectory(a.input);
  ktrack::TrackerConfig config;
  config.mode = ktrack::parse_mode(a.mode);
  config.window_n = a.window_n;
  config.lambda_t = a.lambda_t;
  config.lambda_r = a.lambda_r;
  const auto frames = ktrack::io::contact_frames(file);
  const auto truth = ktrack::io::ground_truth(file);
  ktrack::io::PoseSequence out;
  out.poses = ktrack::track_fused(frames, ktrack::io::as_hypothesis_source(file),
                                  truth.empty() ? ktrack::Pose{} : truth.front(), config);
  for (const auto& f : frames) out.timestamps.push_back(f.timestamp);
  ktrack::io::write_text(a.out, ktrack::io::dump_poses(out));
  return 0;
}

int run_eval(const fs::path& estimate, const fs::path& truth, const fs::path& out) {
  const auto est = ktrack::io::read_poses(estimate);
  const auto gt = ktrack::io::read_poses(truth);
  const auto report = ktrack::compute_metrics(est.poses, gt.poses);
  json frames = json::array();
  for (const auto& e : report.frames) {
    frames.push_back({{"rotation_error", e.rotation_deg}, {"translation_error", e.translation_mm}});
  }
  const auto& ag = report.aggregates;
  const json doc{{"aggregates",
                  {{"pct_5deg5cm", ag.pct_5deg5cm},
                   {"pct_5deg5mm", ag.pct_5deg5mm},
                   {"mean_rot_deg", ag.mean_rot_deg},
                   {"mean_trans_mm", ag.mean_trans_mm}}},
                 {"frames", frames}};
  if (out.empty()) {
    std::cout << doc.dump(1) << "\n";
  } else {
    ktrack::io::write_text(out, doc.dump(1) + "\n");
  }
  return 0;
}

int run_experiment(const fs::path& config_path) {
  const auto config = ktrack::exp::read_experiment_config(config_path);
  const auto reports = ktrack::exp::run_experiment(config);
  std::size_t failed = 0;
  for (const auto& r : reports) failed += r.ok ? 0 : 1;
  std::cout << reports.size() << " cells, " << failed << " failed; aggregate table at "
            << (config.output_dir / "aggregate.csv").string() << "\n";
  return 0;
}

int run_speed(const fs::path& input, int window_n, std::uint64_t seed) {
  std::vector<ktrack::ContactFrame> frames;
  ktrack::VectorHypothesisSource hyps;
  ktrack::Pose initial;
  if (!input.empty()) {
    const auto file = ktrack::io::read_trajectory(input);
    frames = ktrack::io::contact_frames(file);
    hyps = ktrack::io::as_hypothesis_source(file);
    initial = ktrack::io::ground_truth(file).front();
  } else {
    const auto seq = ktrack::sim::simulate_sequence(
        ktrack::sim::default_trajectory_spec(seed), ktrack::Pose{}, ktrack::sim::default_contact_patch(),
        ktrack::exp::suite_contact_noise(seed), ktrack::exp::suite_hypothesis_noise(seed));
    frames = seq.frames;
    hyps = seq.hypotheses;
  }
  if (frames.size() < 100) std::cerr << "warning: fewer than 100 frames; medians are noisy\n";
  ktrack::TrackerConfig config;
  config.window_n = window_n;
  const auto r = ktrack::exp::measure_speed(frames, hyps, initial, config);
  const json doc{{"frames", r.frames},
                 {"window_n", window_n},
                 {"kinematics", {{"median_seconds", r.kinematics_median_seconds}, {"fps", r.kinematics_fps}}},
                 {"window_optimization", {{"median_seconds", r.window_median_seconds}, {"fps", r.window_fps}}}};
  std::cout << doc.dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid-body pose tracking from contact kinematics and pose hypotheses"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate synthetic trajectory files");
  s->add_option("--config", sim.config, "Experiment-style config; uses its trajectories.generate and noise blocks");
  s->add_option("--out-dir", sim.out_dir, "Output directory");
  s->add_option("--count", sim.count, "Number of trajectories")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "Base seed; trajectory i uses seed + i");
  s->add_option("--frames", sim.frames, "Frames per trajectory")->check(CLI::Range(2, 1000000));
  s->add_option("--fps", sim.fps, "Frame rate")->check(CLI::PositiveNumber);
  s->add_option("--position-sigma", sim.position_sigma, "Contact position noise (m)")->check(CLI::NonNegativeNumber);
  s->add_option("--velocity-sigma", sim.velocity_sigma, "Contact velocity noise (m/s)")->check(CLI::NonNegativeNumber);
  s->add_option("--rotation-sigma-deg", sim.rotation_sigma_deg, "Hypothesis rotation noise (deg)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--translation-sigma", sim.translation_sigma, "Hypothesis translation noise (m)")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--outlier-probability", sim.outlier_probability, "Hypothesis outlier rate")->check(CLI::Range(0.0, 1.0));
  s->add_option("--object-id", sim.object_id, "Object id written to the header");

  TrackArgs tr;
  auto* t = app.add_subcommand("track", "Track one trajectory file");
  t->add_option("--input", tr.input, "Trajectory file")->required();
  t->add_option("--out", tr.out, "Output pose file")->required();
  t->add_option("--mode", tr.mode, "Tracker mode")
      ->check(CLI::IsMember({"fused", "kinematics_only", "visual_only"}));
  t->add_option("--window-n", tr.window_n, "Window length")->check(CLI::PositiveNumber);
  t->add_option("--lambda-t", tr.lambda_t, "Translation scale (m)")->check(CLI::PositiveNumber);
  t->add_option("--lambda-r", tr.lambda_r, "Chordal rotation scale")->check(CLI::PositiveNumber);

  fs::path est_path, gt_path, eval_out;
  auto* e = app.add_subcommand("eval", "Score a pose file against ground truth");
  e->add_option("estimate", est_path, "Estimated pose file")->required();
  e->add_option("truth", gt_path, "Ground-truth pose file or trajectory file")->required();
  e->add_option("--out", eval_out, "Write the metrics JSON here instead of stdout");

  fs::path exp_config;
  auto* x = app.add_subcommand("experiment", "Run a config-driven batch");
  x->add_option("--config", exp_config, "Experiment config (JSON)")->required();

  fs::path speed_input;
  int speed_window = 5;
  std::uint64_t speed_seed = 0;
  auto* sp = app.add_subcommand("speed", "Measure per-stage tracking speed");
  sp->add_option("--input", speed_input, "Trajectory file; a synthetic one is generated if omitted");
  sp->add_option("--window-n", speed_window, "Window length")->check(CLI::PositiveNumber);
  sp->add_option("--seed", speed_seed, "Seed for the generated trajectory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return run_simulate(sim);
    if (*t) return run_track(tr);
    if (*e) return run_eval(est_path, gt_path, eval_out);
    if (*x) return run_experiment(exp_config);
    if (*sp) return run_speed(speed_input, speed_window, speed_seed);
  } catch (const ktrack::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
