#include <ktrack/geometry.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace ktrack;

namespace {

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return scale * Vec3(u(rng), u(rng), u(rng));
}

}  // namespace

TEST(Skew, ZeroVectorGivesZeroMatrix) { EXPECT_TRUE(skew(Vec3::Zero()).isZero(0.0)); }

TEST(Skew, KnownEntries) {
  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  EXPECT_EQ(skew(Vec3(1, 2, 3)), expected);
}

TEST(Skew, ZCrossX) { EXPECT_EQ(skew(Vec3(0, 0, 1)) * Vec3(1, 0, 0), Vec3(0, 1, 0)); }

TEST(Skew, MatchesCrossProductAndIsAntisymmetric) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = random_vec(rng, 3.0);
    const Vec3 x = random_vec(rng, 3.0);
    EXPECT_LT((skew(w) * x - w.cross(x)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE((skew(w).transpose() + skew(w)).isZero(0.0));
  }
}

TEST(RotationExp, ZeroIsIdentity) { EXPECT_EQ(rotation_exp(Vec3::Zero()).matrix(), Mat3::Identity()); }

TEST(RotationExp, QuarterTurnAboutZ) {
  const Vec3 y = rotation_exp(Vec3(0, 0, kPi / 2)) * Vec3(1, 0, 0);
  EXPECT_NEAR(y.x(), 0.0, 1e-15);
  EXPECT_NEAR(y.y(), 1.0, 1e-15);
  EXPECT_NEAR(y.z(), 0.0, 1e-15);
}

TEST(RotationExp, MatchesSeriesOracle) {
  const Vec3 w(0.1, 0.2, 0.3);
  EXPECT_LT(oracle::max_abs_diff(rotation_exp(w).matrix(), oracle::series_exp(oracle::cross_matrix(w))), 1e-12);
}

TEST(RotationExp, InverseCancels) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    Vec3 w = random_vec(rng, 1.0);
    w = w.normalized() * std::uniform_real_distribution<double>(0.0, kPi)(rng);
    const Mat3 p = rotation_exp(w).matrix() * rotation_exp(-w).matrix();
    EXPECT_LT((p - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RotationExp, ContinuousAcrossSmallAngleBranch) {
  const Vec3 axis = Vec3(1, -2, 0.5).normalized();
  const Vec3 a = axis * (1e-8 - 1e-12);
  const Vec3 b = axis * (1e-8 + 1e-12);
  // The map itself moves by skew(b - a) (about 2e-12) over this step; any jump beyond that is the branch.
  const Mat3 jump = rotation_exp(b).matrix() - rotation_exp(a).matrix() - skew(b - a);
  EXPECT_LT(jump.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RotationExp, OutputIsOrthonormal) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(rotation_exp(random_vec(rng, 3.0)).is_valid());
}

TEST(Geodesic, Examples) {
  EXPECT_EQ(geodesic_angle(Rotation(), Rotation()), 0.0);
  EXPECT_NEAR(geodesic_angle(Rotation(), rotation_exp(Vec3(0, 0, kPi / 2))), kPi / 2, 1e-12);
  const Rotation r = rotation_exp(Vec3(0.3, 0, 0));
  EXPECT_NEAR(geodesic_angle(r, r), 0.0, 1e-7);
}

TEST(Geodesic, SymmetricAndTriangle) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    const Rotation a = rotation_exp(random_vec(rng, 2.0));
    const Rotation b = rotation_exp(random_vec(rng, 2.0));
    const Rotation c = rotation_exp(random_vec(rng, 2.0));
    EXPECT_NEAR(geodesic_angle(a, b), geodesic_angle(b, a), 1e-12);
    EXPECT_LE(geodesic_angle(a, c), geodesic_angle(a, b) + geodesic_angle(b, c) + 1e-9);
    const double ab = geodesic_angle(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, kPi);
  }
}

TEST(Chordal, Examples) {
  const Rotation r = rotation_exp(Vec3(0.2, -0.1, 0.4));
  EXPECT_EQ(chordal_sq(r, r), 0.0);
  EXPECT_NEAR(chordal_sq(Rotation(), rotation_exp(Vec3(0, 0, kPi / 2))), 4.0, 1e-12);
}

TEST(Chordal, MatchesHalfAngleIdentity) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const Rotation a = rotation_exp(random_vec(rng, 2.0));
    const Rotation b = rotation_exp(random_vec(rng, 2.0));
    const double s = std::sin(geodesic_angle(a, b) / 2.0);
    EXPECT_NEAR(chordal_sq(a, b), 8.0 * s * s, 1e-10);
  }
}

TEST(Compose, DriftStaysSmallOverManyCompositions) {
  Rotation r;
  const Rotation step = rotation_exp(Vec3(0.0123, -0.0456, 0.0789));
  for (int i = 0; i < 10000; ++i) r = step * r;
  EXPECT_LT(r.orthonormality_error(), 1e-9);
  EXPECT_NEAR(r.matrix().determinant(), 1.0, 1e-9);
}

TEST(Compose, PoseComposition) {
  const Pose a{rotation_exp(Vec3(0, 0, kPi / 2)), Vec3(1, 0, 0)};
  const Pose b{Rotation(), Vec3(1, 0, 0)};
  const Pose c = compose(a, b);
  EXPECT_LT((c.translation - Vec3(1, 1, 0)).norm(), 1e-15);
}

TEST(Rotation, QuaternionRoundTrip) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = rotation_exp(random_vec(rng, 3.0));
    const auto q = r.quaternion();
    EXPECT_GE(q.w(), 0.0);
    EXPECT_LT((Rotation::from_quaternion(q).matrix() - r.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Rotation, ProjectRecoversNearbyRotation) {
  const Rotation r = rotation_exp(Vec3(0.5, 0.1, -0.2));
  Mat3 noisy = r.matrix();
  noisy(0, 1) += 1e-6;
  EXPECT_TRUE(Rotation::project(noisy).is_valid());
  EXPECT_LT(geodesic_angle(Rotation::project(noisy), r), 1e-6);
}
