#include <ktrack/optimizer.hpp>

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace ktrack;

TEST(Minimize, SquaredNormFromOnes) {
  // About 300 Adam steps at learning rate 0.01 are needed to get within 1e-4.
  const Objective f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  OptimizerConfig c;
  c.max_iterations = 1000;
  const auto r = minimize(f, Eigen::VectorXd::Ones(2), c);
  EXPECT_LT(r.x.norm(), 1e-4);
}

TEST(Minimize, ShiftedParabolaNeedsMoreIterations) {
  // Adam moves roughly learning_rate per step, so 3 units at 0.01 takes more than the default 200.
  const Objective f = [](const Eigen::VectorXd& x) { return (x(0) - 3.0) * (x(0) - 3.0); };
  OptimizerConfig c;
  c.max_iterations = 2000;
  const auto r = minimize(f, Eigen::VectorXd::Zero(1), c);
  EXPECT_NEAR(r.x(0), 3.0, 1e-4);
}

TEST(Minimize, SpdQuadraticMatchesClosedForm) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(6, 6);
  for (int i = 0; i < 36; ++i) m(i / 6, i % 6) = n(rng);
  const Eigen::MatrixXd a = m * m.transpose() + 6.0 * Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd b(6);
  for (int i = 0; i < 6; ++i) b(i) = n(rng);
  const Objective f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x) - b.dot(x); };
  const Gradient g = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x - b; };
  const Eigen::VectorXd xstar = a.ldlt().solve(b);
  const auto r = minimize(f, g, Eigen::VectorXd::Zero(6), OptimizerConfig{});
  EXPECT_LE(r.iterations, 200);
  EXPECT_LT((r.x - xstar).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Minimize, BestSeenNeverWorseThanStart) {
  const Objective f = [](const Eigen::VectorXd& x) { return std::sin(5.0 * x(0)) + 0.1 * x(0) * x(0); };
  for (double x0 : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
    OptimizerConfig c;
    c.learning_rate = 0.5;
    const auto r = minimize(f, Eigen::VectorXd::Constant(1, x0), c);
    EXPECT_LE(r.value, f(Eigen::VectorXd::Constant(1, x0)));
    EXPECT_EQ(r.value, f(r.x));
  }
}

TEST(Minimize, Deterministic) {
  const Objective f = [](const Eigen::VectorXd& x) { return std::pow(x(0) - 1.0, 4) + x(1) * x(1) * 3.0; };
  const auto a = minimize(f, Eigen::Vector2d(0.3, -0.7), OptimizerConfig{});
  const auto b = minimize(f, Eigen::Vector2d(0.3, -0.7), OptimizerConfig{});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Minimize, NonFiniteObjectiveThrows) {
  const Objective nan_at_start = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(minimize(nan_at_start, Eigen::VectorXd::Zero(2), OptimizerConfig{}), NonFiniteObjective);
  const Objective blows_up = [](const Eigen::VectorXd& x) { return x(0) > 0.05 ? INFINITY : -x(0); };
  EXPECT_THROW(minimize(blows_up, Eigen::VectorXd::Zero(1), OptimizerConfig{}), NonFiniteObjective);
}

TEST(Minimize, InvalidConfigRejected) {
  OptimizerConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptimizerConfig{};
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GradientCheck, CorrectAndWrongGradients) {
  const Objective f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  const Gradient good = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * x; };
  const Gradient bad = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 3.0 * x; };
  const Eigen::Vector3d x(1, 2, 3);
  EXPECT_LT(gradient_check(f, good, x), 1e-7);
  // |2x - 3x| / max(1, |2x|) = x / 2x = 0.5 on every coordinate here.
  EXPECT_NEAR(gradient_check(f, bad, x), 0.5, 1e-6);
}

TEST(NumericalGradient, MatchesAnalyticOnCubic) {
  const Objective f = [](const Eigen::VectorXd& x) { return x(0) * x(0) * x(0) + x(0) * x(1); };
  const auto g = numerical_gradient(f, Eigen::Vector2d(2.0, -1.0));
  EXPECT_NEAR(g(0), 12.0 - 1.0, 1e-6);
  EXPECT_NEAR(g(1), 2.0, 1e-6);
}
