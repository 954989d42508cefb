#ifndef KTRACK_TRACKER_HPP
#define KTRACK_TRACKER_HPP

#include <ktrack/errors.hpp>
#include <ktrack/geometry.hpp>
#include <ktrack/kinematics.hpp>
#include <ktrack/optimizer.hpp>

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ktrack {

/// A per-frame pose measurement from an external (visual) tracker.
struct Hypothesis {
  Pose pose;
  double confidence = 1.0;
};

/// Provides an optional pose hypothesis for each frame index.
class HypothesisSource {
 public:
  virtual ~HypothesisSource() = default;
  virtual std::optional<Hypothesis> at(std::size_t frame) const = 0;
};

/// Hypotheses held in memory; indices past the end are absent.
class VectorHypothesisSource final : public HypothesisSource {
 public:
  VectorHypothesisSource() = default;
  explicit VectorHypothesisSource(std::vector<std::optional<Hypothesis>> h) : hyps_(std::move(h)) {}

  std::optional<Hypothesis> at(std::size_t frame) const override {
    return frame < hyps_.size() ? hyps_[frame] : std::nullopt;
  }
  std::size_t size() const { return hyps_.size(); }
  const std::vector<std::optional<Hypothesis>>& hypotheses() const { return hyps_; }

 private:
  std::vector<std::optional<Hypothesis>> hyps_;
};

/// Source that never yields a hypothesis.
class EmptyHypothesisSource final : public HypothesisSource {
 public:
  std::optional<Hypothesis> at(std::size_t) const override { return std::nullopt; }
};

enum class TrackerMode { kinematics_only, visual_only, fused };

inline std::string_view to_string(TrackerMode m) {
  switch (m) {
    case TrackerMode::kinematics_only: return "kinematics_only";
    case TrackerMode::visual_only: return "visual_only";
    case TrackerMode::fused: return "fused";
  }
  return "unknown";
}

inline TrackerMode parse_mode(std::string_view s) {
  if (s == "kinematics_only") return TrackerMode::kinematics_only;
  if (s == "visual_only") return TrackerMode::visual_only;
  if (s == "fused") return TrackerMode::fused;
  throw std::invalid_argument("unknown tracker mode: " + std::string(s));
}

/// Default optimizer settings for the 6-DoF window problem.
inline OptimizerConfig default_window_optimizer() {
  OptimizerConfig c;
  c.learning_rate = 1e-3;
  c.max_iterations = 1000;
  return c;
}

struct TrackerConfig {
  int window_n = 5;
  double lambda_t = 0.01;  ///< meters
  double lambda_r = 0.1;   ///< chordal units
  OptimizerConfig optimizer = default_window_optimizer();
  TrackerMode mode = TrackerMode::fused;
  KinematicsOptions kinematics;
  /// Replace hypotheses in the window by the optimized poses, so later
  /// windows are anchored to the refined estimates.
  bool refresh_hypotheses = true;
  bool analytic_gradient = true;

  void validate() const {
    if (window_n < 1) throw std::invalid_argument("window_n must be >= 1");
    if (!(lambda_t > 0.0)) throw std::invalid_argument("lambda_t must be positive");
    if (!(lambda_r > 0.0)) throw std::invalid_argument("lambda_r must be positive");
    optimizer.validate();
  }
};

/// Advance a pose by a world-frame twist held constant for dt seconds:
/// t' = t + v dt, R' = exp(w dt) R.
inline Pose integrate_pose(const Pose& prev, const Twist& twist, double dt) {
  return Pose{rotation_exp(twist.angular * dt) * prev.rotation, prev.translation + twist.linear * dt};
}

/// One timestamped contact observation. The twist it yields is applied over
/// the interval ending at this frame.
struct ContactFrame {
  double timestamp = 0.0;
  ContactObservation contacts;
};

// ---------------------------------------------------------------------------
// Sliding window

struct WindowFrame {
  double timestamp = 0.0;
  double dt = 0.0;  ///< time since the previous frame; unused for the oldest
  Twist twist;      ///< applied over (previous frame, this frame]
  std::optional<Hypothesis> hypothesis;
  Pose fused;
};

/// Ring buffer of the most recent frames, oldest first.
class WindowState {
 public:
  explicit WindowState(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("window capacity must be >= 1");
  }

  void push(WindowFrame f) {
    if (!frames_.empty() && !(f.timestamp > frames_.back().timestamp)) {
      throw std::invalid_argument("window timestamps must be strictly increasing");
    }
    frames_.push_back(std::move(f));
    while (frames_.size() > capacity_) frames_.pop_front();
  }

  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const WindowFrame& operator[](std::size_t i) const { return frames_[i]; }
  WindowFrame& operator[](std::size_t i) { return frames_[i]; }
  const WindowFrame& front() const { return frames_.front(); }
  const WindowFrame& back() const { return frames_.back(); }
  WindowFrame& back() { return frames_.back(); }

  bool has_hypothesis() const {
    for (const auto& f : frames_) {
      if (f.hypothesis) return true;
    }
    return false;
  }

 private:
  std::size_t capacity_;
  std::deque<WindowFrame> frames_;
};

/// Poses of every window frame obtained by integrating the stored twists
/// forward from the oldest frame's pose.
inline std::vector<Pose> chain_window(const WindowState& state, const Pose& first_pose) {
  std::vector<Pose> poses;
  poses.reserve(state.size());
  poses.push_back(first_pose);
  for (std::size_t i = 1; i < state.size(); ++i) {
    poses.push_back(integrate_pose(poses.back(), state[i].twist, state[i].dt));
  }
  return poses;
}

/// Weighted squared translation distance plus squared chordal distance.
inline double geometric_energy(const Pose& p, const Hypothesis& h, const TrackerConfig& config) {
  const double et = (p.translation - h.pose.translation).squaredNorm() / (config.lambda_t * config.lambda_t);
  const double er = chordal_sq(p.rotation, h.pose.rotation) / (config.lambda_r * config.lambda_r);
  return h.confidence * (et + er);
}

inline double window_energy(const WindowState& state, const Pose& first_pose, const TrackerConfig& config) {
  if (state.empty()) throw std::invalid_argument("window is empty");
  const std::vector<Pose> poses = chain_window(state, first_pose);
  double e = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (state[i].hypothesis) e += geometric_energy(poses[i], *state[i].hypothesis, config);
  }
  return e;
}

/// The 6-DoF problem behind window_optimize: x = (translation offset,
/// left axis-angle perturbation) applied to a base first-frame pose.
class WindowProblem {
 public:
  WindowProblem(const WindowState& state, const Pose& base, const TrackerConfig& config)
      : state_(state), base_(base), config_(config) {}

  Pose first_pose(const Eigen::VectorXd& x) const {
    return Pose{rotation_exp(x.segment<3>(3)) * base_.rotation, base_.translation + x.head<3>()};
  }

  double energy(const Eigen::VectorXd& x) const { return window_energy(state_, first_pose(x), config_); }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    const Vec3 delta = x.segment<3>(3);
    const Mat3 perturb = rotation_exp(delta).matrix();
    const Mat3 jac = rotation_exp_left_jacobian(delta);
    const std::vector<Pose> poses = chain_window(state_, first_pose(x));
    const double wt = 1.0 / (config_.lambda_t * config_.lambda_t);
    const double wr = 1.0 / (config_.lambda_r * config_.lambda_r);
    Vec3 gt = Vec3::Zero();
    Vec3 gr = Vec3::Zero();
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const auto& h = state_[i].hypothesis;
      if (!h) continue;
      gt += h->confidence * wt * 2.0 * (poses[i].translation - h->pose.translation);
      // d|R - H|^2 / d(delta) = -4 J^T X vee(R^T H), X = exp(delta) R0.
      const Mat3 rth = poses[i].rotation.matrix().transpose() * h->pose.rotation.matrix();
      gr += h->confidence * wr * (-4.0) * (perturb * base_.rotation.matrix() * vee(rth));
    }
    Eigen::VectorXd g(6);
    g.head<3>() = gt;
    g.tail<3>() = jac.transpose() * gr;
    return g;
  }

 private:
  const WindowState& state_;
  Pose base_;
  const TrackerConfig& config_;
};

struct WindowOptimizeResult {
  std::vector<Pose> poses;
  double energy_before = 0.0;
  double energy_after = 0.0;
  int iterations = 0;
};

/// Optimizes the oldest frame's pose so the chained window best matches the
/// hypotheses, then stores the re-chained poses in the window.
inline WindowOptimizeResult window_optimize(WindowState& state, const TrackerConfig& config) {
  if (state.empty()) throw std::invalid_argument("window is empty");
  const WindowProblem problem(state, state.front().fused, config);
  Objective f = [&](const Eigen::VectorXd& x) { return problem.energy(x); };
  Gradient g;
  if (config.analytic_gradient) g = [&](const Eigen::VectorXd& x) { return problem.gradient(x); };

  WindowOptimizeResult out;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  MinimizeResult r{x0, problem.energy(x0), 0};
  out.energy_before = r.value;
  if (state.has_hypothesis()) r = minimize(f, g, x0, config.optimizer);
  out.energy_after = r.value;
  out.iterations = r.iterations;
  out.poses = chain_window(state, problem.first_pose(r.x));
  for (std::size_t i = 0; i < state.size(); ++i) state[i].fused = out.poses[i];
  return out;
}

// ---------------------------------------------------------------------------
// Tracking pipelines

/// Twist whose linear part is the velocity of `pose.translation`.
inline Twist estimate_twist_at(const ContactObservation& obs, const Vec3& origin, const KinematicsOptions& opt) {
  const KinematicEstimate est = estimate_kinematics(obs, origin, opt);
  return Twist{transport_velocity(est.twist, est.center, origin), est.twist.angular};
}

/// Integrates per-frame twists from the initial pose with no correction.
/// Frame 0 reports the initial pose; frame k integrates over (k-1, k].
inline std::vector<Pose> track_kinematics_only(const std::vector<ContactFrame>& frames, const Pose& initial_pose,
                                               const KinematicsOptions& opt = {}) {
  std::vector<Pose> out;
  out.reserve(frames.size());
  Pose pose = initial_pose;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (k > 0) {
      const double dt = frames[k].timestamp - frames[k - 1].timestamp;
      if (!(dt > 0.0)) throw std::invalid_argument("timestamps must be strictly increasing");
      pose = integrate_pose(pose, estimate_twist_at(frames[k].contacts, pose.translation, opt), dt);
    } else if (frames[k].contacts.size() == 0) {
      throw EmptyObservation();
    }
    out.push_back(pose);
  }
  return out;
}

struct StageTimings {
  std::vector<double> kinematics_seconds;
  std::vector<double> window_seconds;
};

/// Online fused tracker; feed frames in order with step().
class FusedTracker {
 public:
  FusedTracker(const Pose& initial_pose, TrackerConfig config)
      : config_(std::move(config)), window_(static_cast<std::size_t>(std::max(config_.window_n, 1))),
        last_(initial_pose) {
    config_.validate();
  }

  /// Processes one frame and returns the fused pose of that frame.
  Pose step(const ContactFrame& frame, const std::optional<Hypothesis>& hypothesis) {
    using clock = std::chrono::steady_clock;
    WindowFrame wf;
    wf.timestamp = frame.timestamp;
    wf.hypothesis = hypothesis;
    if (frames_seen_ == 0) {
      if (frame.contacts.size() == 0) throw EmptyObservation();
      wf.fused = last_;
      timings_.kinematics_seconds.push_back(0.0);
    } else {
      wf.dt = frame.timestamp - last_timestamp_;
      if (!(wf.dt > 0.0)) throw std::invalid_argument("timestamps must be strictly increasing");
      const auto t0 = clock::now();
      wf.twist = estimate_twist_at(frame.contacts, last_.translation, config_.kinematics);
      timings_.kinematics_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      wf.fused = integrate_pose(last_, wf.twist, wf.dt);
    }
    window_.push(std::move(wf));

    const auto t1 = clock::now();
    window_optimize(window_, config_);
    if (config_.refresh_hypotheses) {
      for (std::size_t i = 0; i < window_.size(); ++i) {
        if (window_[i].hypothesis) window_[i].hypothesis->pose = window_[i].fused;
      }
    }
    timings_.window_seconds.push_back(std::chrono::duration<double>(clock::now() - t1).count());

    last_ = window_.back().fused;
    last_timestamp_ = frame.timestamp;
    ++frames_seen_;
    return last_;
  }

  const WindowState& window() const { return window_; }
  const StageTimings& timings() const { return timings_; }
  const TrackerConfig& config() const { return config_; }

 private:
  TrackerConfig config_;
  WindowState window_;
  Pose last_;
  double last_timestamp_ = 0.0;
  std::size_t frames_seen_ = 0;
  StageTimings timings_;
};

/// Runs the tracker in the configured mode over a whole sequence.
inline std::vector<Pose> track_fused(const std::vector<ContactFrame>& frames, const HypothesisSource& hypotheses,
                                     const Pose& initial_pose, const TrackerConfig& config,
                                     StageTimings* timings = nullptr) {
  config.validate();
  switch (config.mode) {
    case TrackerMode::kinematics_only:
      return track_kinematics_only(frames, initial_pose, config.kinematics);
    case TrackerMode::visual_only: {
      std::vector<Pose> out;
      out.reserve(frames.size());
      Pose last = initial_pose;
      for (std::size_t k = 0; k < frames.size(); ++k) {
        if (auto h = hypotheses.at(k)) last = h->pose;
        out.push_back(last);
      }
      return out;
    }
    case TrackerMode::fused:
      break;
  }

  const std::size_t head = std::min<std::size_t>(frames.size(), static_cast<std::size_t>(config.window_n));
  bool any = head == 0;
  for (std::size_t k = 0; k < head && !any; ++k) any = hypotheses.at(k).has_value();
  if (!any) throw MissingInitialHypothesisWindow(static_cast<std::size_t>(config.window_n));

  FusedTracker tracker(initial_pose, config);
  std::vector<Pose> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) out.push_back(tracker.step(frames[k], hypotheses.at(k)));
  if (timings) *timings = tracker.timings();
  return out;
}

}  // namespace ktrack

#endif  // KTRACK_TRACKER_HPP
