#ifndef KTRACK_KINEMATICS_HPP
#define KTRACK_KINEMATICS_HPP

#include <ktrack/errors.hpp>
#include <ktrack/geometry.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace ktrack {

/// Contact-point positions and velocities for one frame, world frame.
struct ContactObservation {
  std::vector<Vec3> points;
  std::vector<Vec3> velocities;

  std::size_t size() const { return points.size(); }

  bool is_valid() const {
    if (points.empty() || points.size() != velocities.size()) return false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite() || !velocities[i].allFinite()) return false;
    }
    return true;
  }
};

struct KinematicEstimate {
  Twist twist;
  Vec3 center = Vec3::Zero();  ///< point whose velocity twist.linear is
  double residual_rms = 0.0;   ///< sqrt(energy / N_c), m/s
  int rank = 0;
  int iterations_used = 0;
  std::vector<double> energy_per_round;
};

struct KinematicsOptions {
  int max_rounds = 10;
  double twist_change_tol = 1e-9;
  double min_angular_speed = 1e-6;  ///< below this the center is unidentifiable
  double rank_tol = 1e-10;          ///< relative to the largest singular value
};

/// Sum over contacts of |v_c - v - w x (p_c - center)|^2.
inline double kinematic_energy(const ContactObservation& obs, const Twist& twist, const Vec3& center) {
  double e = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Vec3 r = obs.velocities[i] - twist.linear - twist.angular.cross(obs.points[i] - center);
    e += r.squaredNorm();
  }
  return e;
}

namespace detail {

/// Minimum-norm least-squares solution of A x = b by SVD. Reports the
/// numerical rank with singular values above rel_tol * sigma_max.
template <typename MatA, typename VecB>
Eigen::VectorXd min_norm_solve(const MatA& a, const VecB& b, double rel_tol, int* rank) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
  int r = 0;
  Eigen::VectorXd ub = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      ub(i) /= s(i);
      ++r;
    } else {
      ub(i) = 0.0;
    }
  }
  if (rank) *rank = r;
  return svd.matrixV() * ub;
}

}  // namespace detail

struct TwistSolution {
  Twist twist;
  int rank = 0;
};

/// Least-squares twist about a fixed center. Stacks rows [I | -skew(p_i - c)]
/// and returns the minimum-norm solution, so rank-deficient contact layouts
/// still yield a twist that reproduces the observed velocities.
inline TwistSolution solve_twist_fixed_center(const ContactObservation& obs, const Vec3& center,
                                              double rank_tol = 1e-10) {
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd a(3 * n, 6);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.block<3, 3>(3 * i, 0).setIdentity();
    a.block<3, 3>(3 * i, 3) = -skew(obs.points[i] - center);
    b.segment<3>(3 * i) = obs.velocities[i];
  }
  TwistSolution out;
  const Eigen::VectorXd x = detail::min_norm_solve(a, b, rank_tol, &out.rank);
  out.twist = Twist{x.head<3>(), x.tail<3>()};
  return out;
}

/// Least-squares center for a fixed twist. The update is minimum-norm, so the
/// component of the center along the rotation axis keeps its input value.
inline Vec3 solve_center_fixed_twist(const ContactObservation& obs, const Twist& twist, const Vec3& center,
                                     double min_angular_speed = 1e-6, double rank_tol = 1e-10) {
  if (twist.angular.norm() < min_angular_speed || obs.size() == 0) return center;
  const auto n = static_cast<Eigen::Index>(obs.size());
  const Mat3 w = skew(twist.angular);
  Eigen::MatrixXd a(3 * n, 3);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // residual_i(c + d) = v_c - v - w x (p - c) - w x d
    const Vec3 r = obs.velocities[i] - twist.linear - twist.angular.cross(obs.points[i] - center);
    a.block<3, 3>(3 * i, 0) = w;
    b.segment<3>(3 * i) = -r;
  }
  const Eigen::VectorXd delta = detail::min_norm_solve(a, b, rank_tol, nullptr);
  return center + delta.head<3>();
}

/// Alternating minimization of the contact energy over (twist, center):
/// solve the twist with the center fixed, then the center with the twist
/// fixed, until the twist stops changing or max_rounds is reached.
inline KinematicEstimate estimate_kinematics(const ContactObservation& obs, const Vec3& initial_center,
                                             const KinematicsOptions& opt = {}) {
  if (obs.size() == 0) throw EmptyObservation();
  KinematicEstimate est;
  est.center = initial_center;
  Vec3 center = initial_center;
  Eigen::Matrix<double, 6, 1> prev = Eigen::Matrix<double, 6, 1>::Zero();
  for (int round = 1; round <= opt.max_rounds; ++round) {
    const TwistSolution sol = solve_twist_fixed_center(obs, center, opt.rank_tol);
    est.twist = sol.twist;
    est.rank = sol.rank;
    est.center = center;
    est.iterations_used = round;
    est.energy_per_round.push_back(kinematic_energy(obs, sol.twist, center));
    const Eigen::Matrix<double, 6, 1> cur = sol.twist.vector();
    if (round > 1 && (cur - prev).norm() < opt.twist_change_tol) break;
    prev = cur;
    if (round == opt.max_rounds) break;
    const Vec3 next = solve_center_fixed_twist(obs, sol.twist, center, opt.min_angular_speed, opt.rank_tol);
    // Never accept a center that raises the energy (guards round-off in the solve).
    if (kinematic_energy(obs, sol.twist, next) <= est.energy_per_round.back()) center = next;
  }
  est.residual_rms = std::sqrt(est.energy_per_round.back() / static_cast<double>(obs.size()));
  return est;
}

/// Velocity of `point` under a rigid twist whose linear part is the velocity
/// of `center`.
inline Vec3 transport_velocity(const Twist& twist, const Vec3& center, const Vec3& point) {
  return twist.linear + twist.angular.cross(point - center);
}

}  // namespace ktrack

#endif  // KTRACK_KINEMATICS_HPP
