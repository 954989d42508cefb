#ifndef KTRACK_SIM_HPP
#define KTRACK_SIM_HPP

#include <ktrack/geometry.hpp>
#include <ktrack/kinematics.hpp>
#include <ktrack/tracker.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace ktrack::sim {

using Rng = std::mt19937_64;

/// a * sin(2 pi f t + phase) on one axis.
struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;  ///< Hz
  double phase = 0.0;      ///< rad

  double operator()(double t) const { return amplitude * std::sin(2.0 * kPi * frequency * t + phase); }
};

/// Smooth twist profile: one sinusoid per axis of v (m/s) and w (rad/s).
struct TrajectorySpec {
  int frame_count = 100;
  double fps = 30.0;
  std::array<Sinusoid, 3> linear{};
  std::array<Sinusoid, 3> angular{};
  std::uint64_t seed = 0;

  void validate() const {
    if (frame_count < 2) throw std::invalid_argument("frame_count must be >= 2");
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
    for (const auto* axes : {&linear, &angular}) {
      for (const auto& s : *axes) {
        if (!(s.amplitude >= 0.0)) throw std::invalid_argument("amplitudes must be non-negative");
      }
    }
  }

  Twist twist_at(double t) const {
    Twist tw;
    for (int i = 0; i < 3; ++i) {
      tw.linear[i] = linear[i](t);
      tw.angular[i] = angular[i](t);
    }
    return tw;
  }
};

/// Per-axis amplitudes giving roughly 0.45 deg and 0.65 mm of motion per
/// frame at 30 FPS, the average in-hand motion of the real recordings.
inline constexpr double kDefaultLinearAmplitude = 0.0172;   // m/s
inline constexpr double kDefaultAngularAmplitude = 0.2075;  // rad/s

/// Calibrated profile with frequencies in [0.2, 0.8] Hz and random phases drawn from `seed`.
inline TrajectorySpec default_trajectory_spec(std::uint64_t seed, int frame_count = 100, double fps = 30.0) {
  TrajectorySpec spec;
  spec.frame_count = frame_count;
  spec.fps = fps;
  spec.seed = seed;
  Rng rng(seed);
  std::uniform_real_distribution<double> freq(0.2, 0.8);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  for (auto& s : spec.linear) s = {kDefaultLinearAmplitude, freq(rng), phase(rng)};
  for (auto& s : spec.angular) s = {kDefaultAngularAmplitude, freq(rng), phase(rng)};
  return spec;
}

struct TrajectorySample {
  double timestamp = 0.0;
  Pose pose;
  Twist twist;  ///< twist over (previous frame, this frame]
};

/// Frame 0 holds the initial pose; frame k integrates the twist evaluated at
/// the midpoint of (k-1, k]. Frame 0 stores the twist at the start time.
inline std::vector<TrajectorySample> generate_trajectory(const TrajectorySpec& spec, const Pose& initial_pose) {
  spec.validate();
  const double dt = 1.0 / spec.fps;
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(spec.frame_count));
  out.push_back({0.0, initial_pose, spec.twist_at(0.0)});
  for (int k = 1; k < spec.frame_count; ++k) {
    const double t = k * dt;
    const Twist tw = spec.twist_at(t - 0.5 * dt);
    out.push_back({t, integrate_pose(out.back().pose, tw, dt), tw});
  }
  return out;
}

struct ContactNoiseSpec {
  double position_sigma = 0.0;  ///< m
  double velocity_sigma = 0.0;  ///< m/s
  std::uint64_t seed = 0;

  void validate() const {
    if (!(position_sigma >= 0.0) || !(velocity_sigma >= 0.0)) throw std::invalid_argument("sigmas must be >= 0");
  }
};

/// Two 4x2 marker grids (4 mm pitch) on opposing finger pads 2 cm apart,
/// expressed in the object frame. `grasp_center` is the midpoint between the
/// pads.
inline std::vector<Vec3> default_contact_patch(const Vec3& grasp_center = Vec3(0.0, 0.0, 0.03)) {
  std::vector<Vec3> pts;
  pts.reserve(16);
  for (double side : {-0.01, 0.01}) {
    for (double y : {-0.006, -0.002, 0.002, 0.006}) {
      for (double z : {-0.002, 0.002}) pts.push_back(grasp_center + Vec3(side, y, z));
    }
  }
  return pts;
}

/// Rigidly attached contact points: p = R p_body + t, v_p = v + w x (p - t),
/// plus i.i.d. Gaussian noise drawn from `rng`.
inline ContactObservation simulate_contacts(const Pose& pose, const Twist& twist, const std::vector<Vec3>& body_points,
                                            const ContactNoiseSpec& noise, Rng& rng) {
  noise.validate();
  if (body_points.empty()) throw std::invalid_argument("at least one body point is required");
  std::normal_distribution<double> n01(0.0, 1.0);
  ContactObservation obs;
  obs.points.reserve(body_points.size());
  obs.velocities.reserve(body_points.size());
  for (const Vec3& b : body_points) {
    const Vec3 p = pose.rotation * b + pose.translation;
    const Vec3 v = twist.linear + twist.angular.cross(p - pose.translation);
    Vec3 dp(n01(rng), n01(rng), n01(rng));
    Vec3 dv(n01(rng), n01(rng), n01(rng));
    obs.points.push_back(p + noise.position_sigma * dp);
    obs.velocities.push_back(v + noise.velocity_sigma * dv);
  }
  return obs;
}

/// Same, with a generator seeded from noise.seed.
inline ContactObservation simulate_contacts(const Pose& pose, const Twist& twist, const std::vector<Vec3>& body_points,
                                            const ContactNoiseSpec& noise) {
  Rng rng(noise.seed);
  return simulate_contacts(pose, twist, body_points, noise, rng);
}

struct HypothesisNoiseSpec {
  double rotation_sigma = 0.0;     ///< rad; angle is |N(0, sigma)| about a uniform axis
  double translation_sigma = 0.0;  ///< m, per axis
  double outlier_probability = 0.0;
  double outlier_scale = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(rotation_sigma >= 0.0) || !(translation_sigma >= 0.0)) throw std::invalid_argument("sigmas must be >= 0");
    if (!(outlier_probability >= 0.0 && outlier_probability <= 1.0)) {
      throw std::invalid_argument("outlier_probability must be in [0, 1]");
    }
    if (!(outlier_scale >= 0.0)) throw std::invalid_argument("outlier_scale must be >= 0");
  }
};

inline Vec3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 a;
  do {
    a = Vec3(n01(rng), n01(rng), n01(rng));
  } while (a.norm() < 1e-12);
  return a.normalized();
}

/// Left-perturbed ground truth standing in for a visual tracker.
inline VectorHypothesisSource noisy_hypotheses(const std::vector<Pose>& gt, const HypothesisNoiseSpec& noise) {
  noise.validate();
  Rng rng(noise.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::bernoulli_distribution outlier(noise.outlier_probability);
  std::vector<std::optional<Hypothesis>> out;
  out.reserve(gt.size());
  for (const Pose& p : gt) {
    const double scale = outlier(rng) ? noise.outlier_scale : 1.0;
    const Vec3 axis = random_unit_vector(rng);
    const double angle = std::abs(n01(rng)) * noise.rotation_sigma * scale;
    const Vec3 dt(n01(rng), n01(rng), n01(rng));
    Hypothesis h;
    h.pose.rotation = rotation_exp(axis * angle) * p.rotation;
    h.pose.translation = p.translation + noise.translation_sigma * scale * dt;
    out.emplace_back(h);
  }
  return VectorHypothesisSource(std::move(out));
}

/// One generated trajectory: ground truth, contact observations, hypotheses.
struct SimulatedSequence {
  std::vector<TrajectorySample> truth;
  std::vector<ContactFrame> frames;
  VectorHypothesisSource hypotheses;

  std::vector<Pose> truth_poses() const {
    std::vector<Pose> p;
    p.reserve(truth.size());
    for (const auto& s : truth) p.push_back(s.pose);
    return p;
  }
};

/// Contacts for frame k are sampled at the pose of frame k-1 with the twist of
/// (k-1, k], i.e. at the start of the interval the twist is integrated over.
inline SimulatedSequence simulate_sequence(const TrajectorySpec& spec, const Pose& initial_pose,
                                           const std::vector<Vec3>& body_points, const ContactNoiseSpec& contact_noise,
                                           const HypothesisNoiseSpec& hypothesis_noise) {
  SimulatedSequence seq;
  seq.truth = generate_trajectory(spec, initial_pose);
  Rng rng(contact_noise.seed);
  seq.frames.reserve(seq.truth.size());
  for (std::size_t k = 0; k < seq.truth.size(); ++k) {
    const Pose& at = seq.truth[k == 0 ? 0 : k - 1].pose;
    seq.frames.push_back({seq.truth[k].timestamp, simulate_contacts(at, seq.truth[k].twist, body_points,
                                                                    contact_noise, rng)});
  }
  seq.hypotheses = noisy_hypotheses(seq.truth_poses(), hypothesis_noise);
  return seq;
}

}  // namespace ktrack::sim

#endif  // KTRACK_SIM_HPP
