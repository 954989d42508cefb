#ifndef KTRACK_OPTIMIZER_HPP
#define KTRACK_OPTIMIZER_HPP

#include <ktrack/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ktrack {

struct OptimizerConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
  int tolerance_window = 50;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must be in [0, 1)");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (tolerance_window < 1) throw std::invalid_argument("tolerance_window must be >= 1");
  }
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

inline constexpr double kFiniteDifferenceStep = 1e-6;

/// Central-difference gradient.
inline Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x,
                                          double step = kFiniteDifferenceStep) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double fp = f(probe);
    probe(i) = x(i) - step;
    const double fm = f(probe);
    probe(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// Adam descent returning the best iterate seen. Stops at max_iterations or
/// when the best value improved by less than relative_tolerance (relative)
/// over the last tolerance_window iterations. Without an analytic gradient,
/// central differences are used.
inline MinimizeResult minimize(const Objective& objective, const Gradient& gradient, const Eigen::VectorXd& x0,
                               const OptimizerConfig& config = {}) {
  config.validate();
  std::size_t evaluations = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = objective(x);
    if (!std::isfinite(v)) throw NonFiniteObjective(evaluations);
    ++evaluations;
    return v;
  };
  auto grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (gradient) return gradient(x);
    return numerical_gradient(eval, x);
  };

  MinimizeResult best{x0, eval(x0), 0};
  std::vector<double> best_history{best.value};

  Eigen::VectorXd x = x0;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x0.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x0.size());
  double b1t = 1.0;
  double b2t = 1.0;
  int it = 0;
  for (it = 1; it <= config.max_iterations; ++it) {
    const Eigen::VectorXd g = grad(x);
    if (!g.allFinite()) throw NonFiniteObjective(evaluations);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    b1t *= config.beta1;
    b2t *= config.beta2;
    const Eigen::VectorXd m_hat = m / (1.0 - b1t);
    const Eigen::VectorXd v_hat = v / (1.0 - b2t);
    x -= config.learning_rate * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + config.epsilon).matrix());

    const double fx = eval(x);
    if (fx < best.value) {
      best.x = x;
      best.value = fx;
    }
    best_history.push_back(best.value);

    const auto w = static_cast<std::size_t>(config.tolerance_window);
    if (best_history.size() > w) {
      const double old = best_history[best_history.size() - 1 - w];
      const double gain = old - best.value;
      if (gain <= config.relative_tolerance * std::max(std::abs(old), 1e-300)) break;
    }
  }
  best.iterations = std::min(it, config.max_iterations);
  return best;
}

inline MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& x0,
                               const OptimizerConfig& config = {}) {
  return minimize(objective, Gradient{}, x0, config);
}

/// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
inline double gradient_check(const Objective& objective, const Gradient& gradient, const Eigen::VectorXd& x,
                             double step = kFiniteDifferenceStep) {
  const Eigen::VectorXd numeric = numerical_gradient(objective, x, step);
  const Eigen::VectorXd analytic = gradient(x);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = std::abs(analytic(i) - numeric(i)) / std::max(1.0, std::abs(numeric(i)));
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace ktrack

#endif  // KTRACK_OPTIMIZER_HPP
