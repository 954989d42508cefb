#ifndef KTRACK_EXPERIMENT_HPP
#define KTRACK_EXPERIMENT_HPP

#include <ktrack/dataset.hpp>
#include <ktrack/errors.hpp>
#include <ktrack/metrics.hpp>
#include <ktrack/sim.hpp>
#include <ktrack/tracker.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ktrack::exp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic suite presets

/// Hypothesis noise matching the mean per-frame error of a good RGB-D visual
/// tracker on the synthetic benchmark (about 4.9 deg and 4.5 mm): half-normal
/// angle mean sigma*sqrt(2/pi), 3-D Gaussian offset mean sigma*sqrt(8/pi).
inline sim::HypothesisNoiseSpec suite_hypothesis_noise(std::uint64_t seed) {
  sim::HypothesisNoiseSpec h;
  h.rotation_sigma = deg2rad(4.9) / std::sqrt(2.0 / kPi);
  h.translation_sigma = 4.5e-3 / std::sqrt(8.0 / kPi);
  h.seed = seed;
  return h;
}

/// Contact velocity noise giving kinematics-only rotation drift of roughly
/// 5-6 deg mean over 100-frame trajectories with the default patch.
inline sim::ContactNoiseSpec suite_contact_noise(std::uint64_t seed, double position_sigma = 0.0) {
  return {position_sigma, 8e-3, seed};
}

inline const std::vector<int>& window_sweep_grid() {
  static const std::vector<int> g{3, 5, 7, 10, 15, 20};
  return g;
}

inline const std::vector<double>& position_noise_grid() {
  static const std::vector<double> g{0.0, 1e-3, 2e-3, 5e-3, 10e-3};
  return g;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct GenerateSpec {
  int count = 1;
  std::uint64_t seed = 0;
  int frame_count = 100;
  double fps = 30.0;
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "experiment_out";
  int threads = 1;
  std::optional<GenerateSpec> generate;
  std::vector<std::filesystem::path> files;
  sim::ContactNoiseSpec contact_noise;
  std::optional<sim::HypothesisNoiseSpec> hypothesis_noise;
  std::vector<TrackerMode> modes{TrackerMode::fused};
  TrackerConfig tracker;
  std::vector<int> window_sweep;          ///< empty: use tracker.window_n
  std::vector<double> position_sweep;     ///< empty: use contact_noise.position_sigma
  std::string object_id = "synthetic";
};

namespace detail {

template <typename T>
T get_or(const json& obj, const char* key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "/" + key, "has the wrong type");
  }
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
}

inline sim::ContactNoiseSpec parse_contact_noise(const json& j, const std::string& path) {
  require_object(j, path);
  sim::ContactNoiseSpec c;
  c.position_sigma = get_or(j, "position_sigma", path, 0.0);
  c.velocity_sigma = get_or(j, "velocity_sigma", path, 0.0);
  c.seed = get_or<std::uint64_t>(j, "seed", path, 0);
  if (c.position_sigma < 0.0) throw ConfigError(path + "/position_sigma", "must be >= 0");
  if (c.velocity_sigma < 0.0) throw ConfigError(path + "/velocity_sigma", "must be >= 0");
  return c;
}

inline sim::HypothesisNoiseSpec parse_hypothesis_noise(const json& j, const std::string& path) {
  require_object(j, path);
  sim::HypothesisNoiseSpec h;
  h.rotation_sigma = get_or(j, "rotation_sigma", path, 0.0);
  h.translation_sigma = get_or(j, "translation_sigma", path, 0.0);
  h.outlier_probability = get_or(j, "outlier_probability", path, 0.0);
  h.outlier_scale = get_or(j, "outlier_scale", path, 10.0);
  h.seed = get_or<std::uint64_t>(j, "seed", path, 0);
  if (h.rotation_sigma < 0.0) throw ConfigError(path + "/rotation_sigma", "must be >= 0");
  if (h.translation_sigma < 0.0) throw ConfigError(path + "/translation_sigma", "must be >= 0");
  if (h.outlier_probability < 0.0 || h.outlier_probability > 1.0) {
    throw ConfigError(path + "/outlier_probability", "must be in [0, 1]");
  }
  return h;
}

inline TrackerConfig parse_tracker(const json& j, const std::string& path) {
  require_object(j, path);
  TrackerConfig t;
  t.window_n = get_or(j, "window_n", path, t.window_n);
  t.lambda_t = get_or(j, "lambda_t", path, t.lambda_t);
  t.lambda_r = get_or(j, "lambda_r", path, t.lambda_r);
  t.refresh_hypotheses = get_or(j, "refresh_hypotheses", path, t.refresh_hypotheses);
  t.optimizer.learning_rate = get_or(j, "learning_rate", path, t.optimizer.learning_rate);
  t.optimizer.max_iterations = get_or(j, "max_iterations", path, t.optimizer.max_iterations);
  if (t.window_n < 1) throw ConfigError(path + "/window_n", "must be >= 1");
  if (!(t.lambda_t > 0.0)) throw ConfigError(path + "/lambda_t", "must be positive");
  if (!(t.lambda_r > 0.0)) throw ConfigError(path + "/lambda_r", "must be positive");
  if (!(t.optimizer.learning_rate > 0.0)) throw ConfigError(path + "/learning_rate", "must be positive");
  if (t.optimizer.max_iterations < 1) throw ConfigError(path + "/max_iterations", "must be >= 1");
  return t;
}

}  // namespace detail

/// Parses an experiment config document. Relative dataset paths are resolved
/// against `base_dir`.
inline ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir = {}) {
  detail::require_object(j, "");
  ExperimentConfig c;
  c.output_dir = detail::get_or<std::string>(j, "output_dir", "", c.output_dir.string());
  c.threads = detail::get_or(j, "threads", "", c.threads);
  if (c.threads < 1) throw ConfigError("/threads", "must be >= 1");
  c.object_id = detail::get_or<std::string>(j, "object_id", "", c.object_id);

  auto traj = j.find("trajectories");
  if (traj == j.end()) throw ConfigError("/trajectories", "missing");
  detail::require_object(*traj, "/trajectories");
  if (auto g = traj->find("generate"); g != traj->end()) {
    detail::require_object(*g, "/trajectories/generate");
    GenerateSpec gs;
    gs.count = detail::get_or(*g, "count", "/trajectories/generate", gs.count);
    gs.seed = detail::get_or<std::uint64_t>(*g, "seed", "/trajectories/generate", gs.seed);
    gs.frame_count = detail::get_or(*g, "frame_count", "/trajectories/generate", gs.frame_count);
    gs.fps = detail::get_or(*g, "fps", "/trajectories/generate", gs.fps);
    if (gs.count < 1) throw ConfigError("/trajectories/generate/count", "must be >= 1");
    if (gs.frame_count < 2) throw ConfigError("/trajectories/generate/frame_count", "must be >= 2");
    if (!(gs.fps > 0.0)) throw ConfigError("/trajectories/generate/fps", "must be positive");
    c.generate = gs;
  }
  if (auto f = traj->find("files"); f != traj->end()) {
    if (!f->is_array()) throw ConfigError("/trajectories/files", "expected an array of paths");
    for (std::size_t i = 0; i < f->size(); ++i) {
      if (!(*f)[i].is_string()) throw ConfigError("/trajectories/files/" + std::to_string(i), "expected a string");
      std::filesystem::path p = (*f)[i].get<std::string>();
      c.files.push_back(p.is_relative() && !base_dir.empty() ? base_dir / p : p);
    }
  }
  if (!c.generate && c.files.empty()) throw ConfigError("/trajectories", "needs \"generate\" or \"files\"");

  if (auto n = j.find("contact_noise"); n != j.end()) c.contact_noise = detail::parse_contact_noise(*n, "/contact_noise");
  if (auto n = j.find("hypothesis_noise"); n != j.end()) {
    c.hypothesis_noise = detail::parse_hypothesis_noise(*n, "/hypothesis_noise");
  }
  if (auto t = j.find("tracker"); t != j.end()) c.tracker = detail::parse_tracker(*t, "/tracker");

  if (auto m = j.find("modes"); m != j.end()) {
    if (!m->is_array() || m->empty()) throw ConfigError("/modes", "expected a non-empty array");
    c.modes.clear();
    for (std::size_t i = 0; i < m->size(); ++i) {
      const std::string path = "/modes/" + std::to_string(i);
      if (!(*m)[i].is_string()) throw ConfigError(path, "expected a string");
      try {
        c.modes.push_back(parse_mode((*m)[i].get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
      }
    }
  }
  if (auto s = j.find("sweep"); s != j.end()) {
    detail::require_object(*s, "/sweep");
    if (auto w = s->find("window_n"); w != s->end()) {
      if (!w->is_array()) throw ConfigError("/sweep/window_n", "expected an array");
      for (std::size_t i = 0; i < w->size(); ++i) {
        if (!(*w)[i].is_number_integer() || (*w)[i].get<int>() < 1) {
          throw ConfigError("/sweep/window_n/" + std::to_string(i), "expected an integer >= 1");
        }
        c.window_sweep.push_back((*w)[i].get<int>());
      }
    }
    if (auto p = s->find("position_sigma"); p != s->end()) {
      if (!p->is_array()) throw ConfigError("/sweep/position_sigma", "expected an array");
      for (std::size_t i = 0; i < p->size(); ++i) {
        if (!(*p)[i].is_number() || (*p)[i].get<double>() < 0.0) {
          throw ConfigError("/sweep/position_sigma/" + std::to_string(i), "expected a number >= 0");
        }
        c.position_sweep.push_back((*p)[i].get<double>());
      }
    }
  }
  return c;
}

inline ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  const json j = io::parse_json_text(io::read_text(path));
  return parse_experiment_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Running cells

struct TrackReport {
  std::string cell_id;
  std::string trajectory;
  TrackerMode mode = TrackerMode::fused;
  int window_n = 0;
  double lambda_t = 0.0;
  double lambda_r = 0.0;
  double position_sigma = 0.0;
  double velocity_sigma = 0.0;
  double rotation_sigma = 0.0;
  double translation_sigma = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  MetricReport metrics;
  std::vector<Pose> estimates;
  StageTimings timings;
  double wall_seconds = 0.0;
};

/// One trajectory ready to track.
struct PreparedTrajectory {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<ContactFrame> frames;
  std::vector<Pose> truth;
  VectorHypothesisSource hypotheses;
};

/// Builds a synthetic trajectory with the generator seeds derived from `index`.
inline PreparedTrajectory prepare_generated(const GenerateSpec& g, int index, const sim::ContactNoiseSpec& contact,
                                            const std::optional<sim::HypothesisNoiseSpec>& hyp) {
  const auto i = static_cast<std::uint64_t>(index);
  const sim::TrajectorySpec spec = sim::default_trajectory_spec(g.seed + i, g.frame_count, g.fps);
  sim::ContactNoiseSpec cn = contact;
  cn.seed = contact.seed + i;
  sim::HypothesisNoiseSpec hn = hyp.value_or(sim::HypothesisNoiseSpec{});
  hn.seed += i;
  sim::SimulatedSequence seq = sim::simulate_sequence(spec, Pose{}, sim::default_contact_patch(), cn, hn);
  PreparedTrajectory t;
  t.name = "gen_" + std::to_string(g.seed + i);
  t.seed = g.seed + i;
  t.truth = seq.truth_poses();
  t.frames = std::move(seq.frames);
  t.hypotheses = std::move(seq.hypotheses);
  return t;
}

inline PreparedTrajectory prepare_file(const std::filesystem::path& path, int index,
                                       const std::optional<sim::HypothesisNoiseSpec>& hyp) {
  const io::TrajectoryFile f = io::read_trajectory(path);
  PreparedTrajectory t;
  t.name = path.stem().string();
  t.frames = io::contact_frames(f);
  t.truth = io::ground_truth(f);
  const bool has_any = std::any_of(f.frames.begin(), f.frames.end(), [](const auto& fr) { return fr.hypothesis.has_value(); });
  if (!has_any && hyp) {
    sim::HypothesisNoiseSpec hn = *hyp;
    hn.seed += static_cast<std::uint64_t>(index);
    t.hypotheses = sim::noisy_hypotheses(t.truth, hn);
  } else {
    t.hypotheses = io::as_hypothesis_source(f);
  }
  return t;
}

/// Tracks one prepared trajectory and scores it against ground truth.
inline TrackReport run_cell(const PreparedTrajectory& traj, const TrackerConfig& config) {
  TrackReport r;
  r.trajectory = traj.name;
  r.seed = traj.seed;
  r.mode = config.mode;
  r.window_n = config.window_n;
  r.lambda_t = config.lambda_t;
  r.lambda_r = config.lambda_r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Pose initial = traj.truth.empty() ? Pose{} : traj.truth.front();
    r.estimates = track_fused(traj.frames, traj.hypotheses, initial, config, &r.timings);
    r.metrics = compute_metrics(r.estimates, traj.truth);
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace detail

/// Runs every (trajectory x position sigma x window size x mode) cell.
/// Cells that throw are reported as failed; the run continues.
inline std::vector<TrackReport> run_cells(const ExperimentConfig& c) {
  const std::vector<double> positions =
      c.position_sweep.empty() ? std::vector<double>{c.contact_noise.position_sigma} : c.position_sweep;
  const std::vector<int> windows = c.window_sweep.empty() ? std::vector<int>{c.tracker.window_n} : c.window_sweep;

  struct Source {
    int index;
    bool generated;
  };
  std::vector<Source> sources;
  if (c.generate) {
    for (int i = 0; i < c.generate->count; ++i) sources.push_back({i, true});
  }
  for (std::size_t i = 0; i < c.files.size(); ++i) sources.push_back({static_cast<int>(i), false});

  struct Cell {
    std::size_t source;
    double position_sigma;
    int window_n;
    TrackerMode mode;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (double ps : positions) {
      for (int n : windows) {
        for (TrackerMode m : c.modes) cells.push_back({s, ps, n, m});
      }
    }
  }

  std::vector<TrackReport> out(cells.size());
  detail::parallel_for(cells.size(), c.threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const Source& src = sources[cell.source];
    TrackerConfig tc = c.tracker;
    tc.window_n = cell.window_n;
    tc.mode = cell.mode;
    TrackReport r;
    try {
      sim::ContactNoiseSpec cn = c.contact_noise;
      cn.position_sigma = cell.position_sigma;
      const PreparedTrajectory traj = src.generated ? prepare_generated(*c.generate, src.index, cn, c.hypothesis_noise)
                                                    : prepare_file(c.files[static_cast<std::size_t>(src.index)],
                                                                   src.index, c.hypothesis_noise);
      r = run_cell(traj, tc);
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
      r.mode = tc.mode;
      r.window_n = tc.window_n;
      r.lambda_t = tc.lambda_t;
      r.lambda_r = tc.lambda_r;
      r.trajectory = src.generated ? "gen_" + std::to_string(c.generate->seed + static_cast<std::uint64_t>(src.index))
                                   : c.files[static_cast<std::size_t>(src.index)].stem().string();
    }
    r.position_sigma = src.generated ? cell.position_sigma : 0.0;
    r.velocity_sigma = src.generated ? c.contact_noise.velocity_sigma : 0.0;
    if (c.hypothesis_noise) {
      r.rotation_sigma = c.hypothesis_noise->rotation_sigma;
      r.translation_sigma = c.hypothesis_noise->translation_sigma;
    }
    r.cell_id = std::to_string(i);
    while (r.cell_id.size() < 4) r.cell_id.insert(0, "0");
    out[i] = std::move(r);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Fixed column order of the aggregate CSV.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "cell",           "trajectory",     "mode",           "window_n",      "lambda_t",
      "lambda_r",       "position_sigma", "velocity_sigma", "rotation_sigma", "translation_sigma",
      "frames",         "status",         "pct_5deg5cm",    "pct_5deg5mm",   "mean_rot_deg",
      "mean_trans_mm"};
  return cols;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// Deterministic table (no timings), one row per cell.
inline std::string aggregate_csv(const std::vector<TrackReport>& reports) {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : reports) {
    const auto& a = r.metrics.aggregates;
    std::vector<std::string> row{r.cell_id,
                                 csv_escape(r.trajectory),
                                 std::string(to_string(r.mode)),
                                 std::to_string(r.window_n),
                                 format_number(r.lambda_t),
                                 format_number(r.lambda_r),
                                 format_number(r.position_sigma),
                                 format_number(r.velocity_sigma),
                                 format_number(r.rotation_sigma),
                                 format_number(r.translation_sigma),
                                 std::to_string(r.metrics.frames.size()),
                                 r.ok ? "ok" : csv_escape("failed: " + r.error),
                                 r.ok ? format_number(a.pct_5deg5cm) : "",
                                 r.ok ? format_number(a.pct_5deg5mm) : "",
                                 r.ok ? format_number(a.mean_rot_deg) : "",
                                 r.ok ? format_number(a.mean_trans_mm) : ""};
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

inline json report_json(const TrackReport& r) {
  json frames = json::array();
  for (const auto& e : r.metrics.frames) {
    frames.push_back({{"rotation_error", e.rotation_deg}, {"translation_error", e.translation_mm}});
  }
  const auto& a = r.metrics.aggregates;
  auto stage = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return json{{"total_seconds", sum}, {"frames", v.size()}};
  };
  return {{"cell", r.cell_id},
          {"trajectory", r.trajectory},
          {"seed", r.seed},
          {"status", r.ok ? "ok" : "failed"},
          {"error", r.error},
          {"config",
           {{"mode", std::string(to_string(r.mode))},
            {"window_n", r.window_n},
            {"lambda_t", r.lambda_t},
            {"lambda_r", r.lambda_r},
            {"position_sigma", r.position_sigma},
            {"velocity_sigma", r.velocity_sigma},
            {"rotation_sigma", r.rotation_sigma},
            {"translation_sigma", r.translation_sigma}}},
          {"aggregates",
           {{"pct_5deg5cm", a.pct_5deg5cm},
            {"pct_5deg5mm", a.pct_5deg5mm},
            {"mean_rot_deg", a.mean_rot_deg},
            {"mean_trans_mm", a.mean_trans_mm}}},
          {"frames", frames},
          {"timings",
           {{"wall_seconds", r.wall_seconds},
            {"kinematics", stage(r.timings.kinematics_seconds)},
            {"window_optimization", stage(r.timings.window_seconds)}}}};
}

/// Writes reports/<cell>.json per cell and aggregate.csv under output_dir.
inline std::vector<TrackReport> run_experiment(const ExperimentConfig& c) {
  std::vector<TrackReport> reports = run_cells(c);
  for (const auto& r : reports) {
    io::write_text(c.output_dir / "reports" / (r.cell_id + ".json"), report_json(r).dump(1) + "\n");
  }
  io::write_text(c.output_dir / "aggregate.csv", aggregate_csv(reports));
  return reports;
}

// ---------------------------------------------------------------------------
// Speed

struct SpeedReport {
  double kinematics_median_seconds = 0.0;
  double window_median_seconds = 0.0;
  double kinematics_fps = 0.0;
  double window_fps = 0.0;
  std::size_t frames = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

/// Median per-frame wall time of twist estimation and of window optimization
/// over a fused tracking run, single-threaded.
inline SpeedReport measure_speed(const std::vector<ContactFrame>& frames, const HypothesisSource& hypotheses,
                                 const Pose& initial_pose, TrackerConfig config) {
  config.mode = TrackerMode::fused;
  StageTimings t;
  track_fused(frames, hypotheses, initial_pose, config, &t);
  SpeedReport r;
  r.frames = frames.size();
  // Frame 0 has no twist to estimate.
  std::vector<double> kin(t.kinematics_seconds.begin() + (t.kinematics_seconds.empty() ? 0 : 1),
                          t.kinematics_seconds.end());
  r.kinematics_median_seconds = median(kin);
  r.window_median_seconds = median(t.window_seconds);
  r.kinematics_fps = r.kinematics_median_seconds > 0.0 ? 1.0 / r.kinematics_median_seconds : 0.0;
  r.window_fps = r.window_median_seconds > 0.0 ? 1.0 / r.window_median_seconds : 0.0;
  return r;
}

}  // namespace ktrack::exp

#endif  // KTRACK_EXPERIMENT_HPP
