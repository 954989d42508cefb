#include <ktrack/sim.hpp>
#include <ktrack/tracker.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace ktrack;

namespace {

WindowState single_frame_window(const Pose& hypothesis) {
  WindowState w(1);
  WindowFrame f;
  f.hypothesis = Hypothesis{hypothesis, 1.0};
  w.push(f);
  return w;
}

/// Window of `n` frames built from a constant twist, hypotheses on the exact chain.
WindowState exact_window(std::size_t n, const Pose& start, const Twist& twist, double dt) {
  WindowState w(n);
  Pose p = start;
  for (std::size_t i = 0; i < n; ++i) {
    WindowFrame f;
    f.timestamp = static_cast<double>(i) * dt;
    if (i > 0) {
      f.dt = dt;
      f.twist = twist;
      p = integrate_pose(p, twist, dt);
    }
    f.hypothesis = Hypothesis{p, 1.0};
    f.fused = p;
    w.push(f);
  }
  return w;
}

double angle_deg(const Rotation& a, const Rotation& b) { return rad2deg(geodesic_angle(a, b)); }

}  // namespace

TEST(IntegratePose, Examples) {
  const Pose p{rotation_exp(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3)};
  const Pose same = integrate_pose(p, Twist{}, 0.5);
  EXPECT_EQ(same.translation, p.translation);
  EXPECT_LT((same.rotation.matrix() - p.rotation.matrix()).cwiseAbs().maxCoeff(), 1e-15);

  const Pose moved = integrate_pose(Pose{}, Twist{Vec3(1, 0, 0), Vec3::Zero()}, 0.1);
  EXPECT_NEAR(moved.translation.x(), 0.1, 1e-15);
  EXPECT_EQ(moved.rotation.matrix(), Mat3::Identity());

  const Pose turned = integrate_pose(Pose{}, Twist{Vec3::Zero(), Vec3(0, 0, kPi / 2)}, 1.0);
  EXPECT_LT((turned.rotation * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(WindowState, DropsOldestAndRejectsNonIncreasingTime) {
  WindowState w(2);
  for (int i = 0; i < 3; ++i) {
    WindowFrame f;
    f.timestamp = i;
    w.push(f);
  }
  EXPECT_EQ(w.size(), 2u);
  EXPECT_EQ(w.front().timestamp, 1.0);
  WindowFrame stale;
  stale.timestamp = 2.0;
  EXPECT_THROW(w.push(stale), std::invalid_argument);
}

TEST(WindowEnergy, Examples) {
  TrackerConfig c;
  const WindowState exact = exact_window(5, Pose{}, Twist{Vec3(0.01, 0, 0), Vec3(0, 0.2, 0)}, 1.0 / 30);
  EXPECT_NEAR(window_energy(exact, Pose{}, c), 0.0, 1e-20);

  const WindowState t = single_frame_window(Pose{Rotation(), Vec3(0.01, 0, 0)});
  EXPECT_NEAR(window_energy(t, Pose{}, c), 1.0, 1e-12);

  const WindowState r = single_frame_window(Pose{rotation_exp(Vec3(0, 0, kPi / 2)), Vec3::Zero()});
  EXPECT_NEAR(window_energy(r, Pose{}, c), 400.0, 1e-9);
}

TEST(WindowEnergy, MissingHypothesesContributeNothing) {
  WindowState w(3);
  for (int i = 0; i < 3; ++i) {
    WindowFrame f;
    f.timestamp = i;
    f.dt = i ? 1.0 : 0.0;
    w.push(f);
  }
  EXPECT_EQ(window_energy(w, Pose{rotation_exp(Vec3(1, 0, 0)), Vec3(5, 5, 5)}, TrackerConfig{}), 0.0);
}

TEST(WindowEnergy, ConfidenceScalesTerm) {
  WindowState w(1);
  WindowFrame f;
  f.hypothesis = Hypothesis{Pose{Rotation(), Vec3(0.02, 0, 0)}, 0.25};
  w.push(f);
  EXPECT_NEAR(window_energy(w, Pose{}, TrackerConfig{}), 1.0, 1e-12);
}

TEST(WindowGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  TrackerConfig c;
  for (int trial = 0; trial < 100; ++trial) {
    WindowState w(5);
    Pose p{rotation_exp(Vec3(n(rng), n(rng), n(rng))), 0.05 * Vec3(n(rng), n(rng), n(rng))};
    for (int i = 0; i < 5; ++i) {
      WindowFrame f;
      f.timestamp = i / 30.0;
      if (i) {
        f.dt = 1.0 / 30;
        f.twist = Twist{0.02 * Vec3(n(rng), n(rng), n(rng)), 0.3 * Vec3(n(rng), n(rng), n(rng))};
        p = integrate_pose(p, f.twist, f.dt);
      }
      if (i != 2) {
        f.hypothesis = Hypothesis{Pose{rotation_exp(0.1 * Vec3(n(rng), n(rng), n(rng))) * p.rotation,
                                       p.translation + 0.005 * Vec3(n(rng), n(rng), n(rng))},
                                  0.5 + 0.5 * std::abs(n(rng))};
      }
      f.fused = p;
      w.push(f);
    }
    const WindowProblem problem(w, w.front().fused, c);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 3; ++i) x(i) = 0.005 * n(rng);
    for (int i = 3; i < 6; ++i) x(i) = 0.05 * n(rng);
    const Objective f = [&](const Eigen::VectorXd& v) { return problem.energy(v); };
    const Gradient g = [&](const Eigen::VectorXd& v) { return problem.gradient(v); };
    EXPECT_LT(gradient_check(f, g, x), 1e-4);
  }
}

TEST(WindowOptimize, RecoversPerturbedFirstPose) {
  std::mt19937_64 rng(99);
  const Pose truth{rotation_exp(Vec3(0.3, -0.2, 0.1)), Vec3(0.1, 0.0, 0.2)};
  WindowState w = exact_window(5, truth, Twist{Vec3(0.02, -0.01, 0.005), Vec3(0.1, 0.3, -0.2)}, 1.0 / 30);
  const Vec3 dt = sim::random_unit_vector(rng) * 0.005;
  const Vec3 axis = sim::random_unit_vector(rng);
  Pose start{rotation_exp(axis * deg2rad(2.0)) * truth.rotation, truth.translation + dt};
  const std::vector<Pose> chained = chain_window(w, start);
  for (std::size_t i = 0; i < w.size(); ++i) w[i].fused = chained[i];

  TrackerConfig c;
  const auto r = window_optimize(w, c);
  EXPECT_LT((r.poses.front().translation - truth.translation).norm(), 0.2e-3);
  EXPECT_LT(angle_deg(r.poses.front().rotation, truth.rotation), 0.1);
  EXPECT_LE(r.energy_after, r.energy_before);

  // Stored poses are re-chained exactly with the stored twists.
  for (std::size_t i = 1; i < w.size(); ++i) {
    const Pose next = integrate_pose(w[i - 1].fused, w[i].twist, w[i].dt);
    EXPECT_LT((next.translation - w[i].fused.translation).norm(), 1e-12);
    EXPECT_LT((next.rotation.matrix() - w[i].fused.rotation.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(WindowOptimize, NoHypothesesLeavesPosesUnchanged) {
  WindowState w = exact_window(4, Pose{}, Twist{Vec3(0.01, 0, 0), Vec3(0, 0, 0.1)}, 0.1);
  for (std::size_t i = 0; i < w.size(); ++i) w[i].hypothesis.reset();
  const auto before = chain_window(w, w.front().fused);
  const auto r = window_optimize(w, TrackerConfig{});
  EXPECT_EQ(r.iterations, 0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(r.poses[i].translation, before[i].translation);
    EXPECT_EQ(r.poses[i].rotation.matrix(), before[i].rotation.matrix());
  }
}

TEST(WindowOptimize, BiasedTwistsDoNotRaiseEnergy) {
  const Twist truth{Vec3(0.01, 0.0, -0.01), Vec3(0.2, -0.1, 0.1)};
  WindowState w = exact_window(5, Pose{}, truth, 1.0 / 30);
  for (std::size_t i = 1; i < w.size(); ++i) w[i].twist.angular += Vec3(0.05, 0.0, 0.0);
  TrackerConfig c;
  const double chain_energy = window_energy(w, w.front().fused, c);
  const auto r = window_optimize(w, c);
  EXPECT_LE(r.energy_after, chain_energy);
  EXPECT_NEAR(window_energy(w, w.front().fused, c), r.energy_after, 1e-12);
}

TEST(WindowOptimize, IdempotentAtAgreement) {
  WindowState w = exact_window(5, Pose{}, Twist{Vec3(0.01, 0, 0), Vec3(0, 0.2, 0)}, 1.0 / 30);
  const auto a = window_optimize(w, TrackerConfig{});
  const auto b = window_optimize(w, TrackerConfig{});
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_LT((a.poses[i].translation - b.poses[i].translation).norm(), 1e-12);
    EXPECT_LT(geodesic_angle(a.poses[i].rotation, b.poses[i].rotation), 1e-7);
  }
}

TEST(KinematicsOnly, ZeroMotionStaysPut) {
  const Pose start{rotation_exp(Vec3(0.1, 0, 0)), Vec3(0, 0, 0.1)};
  std::vector<ContactFrame> frames;
  for (int k = 0; k < 10; ++k) {
    ContactFrame f;
    f.timestamp = k / 30.0;
    f.contacts.points = sim::default_contact_patch();
    f.contacts.velocities.assign(f.contacts.points.size(), Vec3::Zero());
    frames.push_back(f);
  }
  for (const Pose& p : track_kinematics_only(frames, start)) {
    EXPECT_LT((p.translation - start.translation).norm(), 1e-15);
    EXPECT_LT(geodesic_angle(p.rotation, start.rotation), 1e-7);
  }
}

TEST(KinematicsOnly, ConstantTwistMatchesFineStepOracle) {
  sim::TrajectorySpec spec;
  spec.frame_count = 100;
  const Twist tw{Vec3(0.01, -0.02, 0.005), Vec3(0.2, 0.1, -0.3)};
  // A zero-frequency sinusoid with phase +-pi/2 is a constant.
  auto constant = [](double c) { return sim::Sinusoid{std::abs(c), 0.0, c < 0.0 ? -kPi / 2 : kPi / 2}; };
  for (int i = 0; i < 3; ++i) {
    spec.linear[i] = constant(tw.linear[i]);
    spec.angular[i] = constant(tw.angular[i]);
  }
  const auto seq = sim::simulate_sequence(spec, Pose{}, sim::default_contact_patch(), {}, {});
  const auto est = track_kinematics_only(seq.frames, Pose{});

  // Fine-step oracle: 100 substeps per frame of the same world-frame screw motion.
  Pose fine;
  const double h = (1.0 / 30) / 100.0;
  for (int k = 0; k < 99 * 100; ++k) {
    const Vec3 vel_at_origin = tw.linear;  // velocity field v + w x (x - t) evaluated at the body origin t
    fine = Pose{rotation_exp(tw.angular * h) * fine.rotation, fine.translation + vel_at_origin * h};
  }
  EXPECT_LT(geodesic_angle(est.back().rotation, fine.rotation), 1e-4);
  EXPECT_LT((est.back().translation - fine.translation).norm(), 1e-5);
}

TEST(KinematicsOnly, DriftGrowsWithFrameIndex) {
  std::vector<double> corr;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(seed), Pose{}, sim::default_contact_patch(),
                                            {0.0, 1e-3, seed}, {});
    const auto est = track_kinematics_only(seq.frames, Pose{});
    std::vector<double> idx, err;
    for (std::size_t k = 0; k < est.size(); ++k) {
      idx.push_back(static_cast<double>(k));
      err.push_back(geodesic_angle(est[k].rotation, seq.truth[k].pose.rotation));
    }
    corr.push_back(oracle::spearman(idx, err));
  }
  double mean = 0.0;
  for (double c : corr) mean += c / static_cast<double>(corr.size());
  EXPECT_GT(mean, 0.0);
}

TEST(TrackFused, NoiselessInputsReproduceHypotheses) {
  const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(4), Pose{}, sim::default_contact_patch(), {}, {});
  const auto out = track_fused(seq.frames, seq.hypotheses, Pose{}, TrackerConfig{});
  for (std::size_t k = 0; k < out.size(); ++k) {
    EXPECT_LT((out[k].translation - seq.truth[k].pose.translation).norm(), 1e-6);
    EXPECT_LT(geodesic_angle(out[k].rotation, seq.truth[k].pose.rotation), 1e-6);
  }
}

TEST(TrackFused, FusedBeatsVisualOnlyWithExactTwists) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    sim::HypothesisNoiseSpec hn;
    hn.rotation_sigma = deg2rad(5.0);
    hn.translation_sigma = 5e-3;
    hn.seed = 1000 + seed;
    const auto seq =
        sim::simulate_sequence(sim::default_trajectory_spec(seed), Pose{}, sim::default_contact_patch(), {}, hn);
    const auto truth = seq.truth_poses();
    TrackerConfig c;
    const auto fused = track_fused(seq.frames, seq.hypotheses, Pose{}, c);
    c.mode = TrackerMode::visual_only;
    const auto visual = track_fused(seq.frames, seq.hypotheses, Pose{}, c);
    double fr = 0, ft = 0, vr = 0, vt = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      fr += geodesic_angle(fused[k].rotation, truth[k].rotation);
      ft += (fused[k].translation - truth[k].translation).norm();
      vr += geodesic_angle(visual[k].rotation, truth[k].rotation);
      vt += (visual[k].translation - truth[k].translation).norm();
    }
    wins += (fr < vr && ft < vt) ? 1 : 0;
  }
  EXPECT_GE(wins, 45);
}

TEST(TrackFused, NoisyTwistsNoVisualNoiseNotWorseThanKinematics) {
  const std::size_t frames = 100;
  std::vector<double> fused_err(frames, 0.0), kin_err(frames, 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(seed), Pose{}, sim::default_contact_patch(),
                                            {0.0, 5e-3, seed}, {});
    const auto truth = seq.truth_poses();
    TrackerConfig c;
    const auto fused = track_fused(seq.frames, seq.hypotheses, Pose{}, c);
    c.mode = TrackerMode::kinematics_only;
    const auto kin = track_fused(seq.frames, seq.hypotheses, Pose{}, c);
    for (std::size_t k = 0; k < frames; ++k) {
      fused_err[k] += geodesic_angle(fused[k].rotation, truth[k].rotation);
      kin_err[k] += geodesic_angle(kin[k].rotation, truth[k].rotation);
    }
  }
  for (std::size_t k = 11; k < frames; ++k) EXPECT_LE(fused_err[k], kin_err[k]) << "frame " << k;
}

TEST(TrackFused, MissingInitialHypothesesThrow) {
  const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(1, 10), Pose{}, sim::default_contact_patch(), {}, {});
  EXPECT_THROW(track_fused(seq.frames, EmptyHypothesisSource{}, Pose{}, TrackerConfig{}), MissingInitialHypothesisWindow);
  TrackerConfig c;
  c.mode = TrackerMode::kinematics_only;
  EXPECT_NO_THROW(track_fused(seq.frames, EmptyHypothesisSource{}, Pose{}, c));
}

TEST(TrackFused, CoastsThroughDropouts) {
  const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(2, 30), Pose{}, sim::default_contact_patch(), {}, {});
  std::vector<std::optional<Hypothesis>> sparse;
  for (std::size_t k = 0; k < 30; ++k) {
    if (k < 3) {
      sparse.push_back(seq.hypotheses.at(k));
    } else {
      sparse.push_back(std::nullopt);
    }
  }
  const auto out = track_fused(seq.frames, VectorHypothesisSource(sparse), Pose{}, TrackerConfig{});
  EXPECT_LT((out.back().translation - seq.truth.back().pose.translation).norm(), 1e-6);
}

TEST(TrackFused, WindowOfOneEqualsVisualOnlyUnderRefresh) {
  sim::HypothesisNoiseSpec hn;
  hn.rotation_sigma = 0.05;
  hn.translation_sigma = 2e-3;
  const auto seq = sim::simulate_sequence(sim::default_trajectory_spec(6, 20), Pose{}, sim::default_contact_patch(),
                                          {0.0, 1e-3, 6}, hn);
  TrackerConfig c;
  c.window_n = 1;
  const auto fused = track_fused(seq.frames, seq.hypotheses, Pose{}, c);
  for (std::size_t k = 0; k < fused.size(); ++k) {
    EXPECT_LT((fused[k].translation - seq.hypotheses.at(k)->pose.translation).norm(), 1e-5);
  }
}
