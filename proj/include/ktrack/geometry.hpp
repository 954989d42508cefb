#ifndef KTRACK_GEOMETRY_HPP
#define KTRACK_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ktrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Cross-product matrix: skew(w) * x == w.cross(x).
inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

/// Inverse of skew() applied to the skew-symmetric part of m.
inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) * 0.5;
}

/// Element of SO(3) held as an orthonormal 3x3 matrix.
///
/// Products are re-orthonormalized with one Newton step of the polar
/// iteration, which keeps long chains of compositions on the manifold.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  /// Wraps a matrix that is already orthonormal; no projection is applied.
  static Rotation from_matrix_unchecked(const Mat3& m) { return Rotation(m); }

  /// Nearest rotation (polar factor) to an arbitrary non-singular matrix.
  static Rotation project(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return Rotation(u * v.transpose());
  }

  static Rotation from_quaternion(const Eigen::Quaterniond& q) {
    return Rotation(q.normalized().toRotationMatrix());
  }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation inverse() const { return Rotation(m_.transpose()); }

  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(m_);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
  }

  Vec3 operator*(const Vec3& x) const { return m_ * x; }

  Rotation operator*(const Rotation& other) const {
    Mat3 p = m_ * other.m_;
    // One Newton polar step: R <- R (3I - R^T R) / 2.
    p = 0.5 * p * (3.0 * Mat3::Identity() - p.transpose() * p);
    return Rotation(p);
  }

  /// Max elementwise deviation of R^T R from I.
  double orthonormality_error() const {
    return (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  bool is_valid(double tol = 1e-9) const {
    return m_.allFinite() && orthonormality_error() <= tol && std::abs(m_.determinant() - 1.0) <= tol;
  }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  bool is_valid() const { return rotation.is_valid() && translation.allFinite(); }
};

/// Linear velocity of the object center and angular velocity, both world frame.
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  bool is_finite() const { return linear.allFinite() && angular.allFinite(); }

  /// Stacked (linear, angular).
  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> x;
    x << linear, angular;
    return x;
  }
  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& x) {
    return Twist{x.head<3>(), x.tail<3>()};
  }
};

inline constexpr double kSmallAngle = 1e-8;

/// Rodrigues exponential of an axis-angle vector.
inline Rotation rotation_exp(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  const Mat3 w = skew(axis_angle);
  if (theta < kSmallAngle) {
    return Rotation::from_matrix_unchecked(Mat3::Identity() + w + 0.5 * w * w);
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Rotation::from_matrix_unchecked(Mat3::Identity() + a * w + b * w * w);
}

/// Left Jacobian of the exponential map: d/dt exp(w + t e) = skew(J e) exp(w).
inline Mat3 rotation_exp_left_jacobian(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  const Mat3 w = skew(axis_angle);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
         ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
}

/// Angle of the relative rotation a^T b, in [0, pi].
inline double geodesic_angle(const Rotation& a, const Rotation& b) {
  const double c = ((a.matrix().transpose() * b.matrix()).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Squared Frobenius distance; equals 8 sin^2(theta / 2).
inline double chordal_sq(const Rotation& a, const Rotation& b) {
  return (a.matrix() - b.matrix()).squaredNorm();
}

/// Rigid transform a * b (apply b first).
inline Pose compose(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace ktrack

#endif  // KTRACK_GEOMETRY_HPP
