#pragma once

// Quasi-Newton (BFGS) minimization with central-difference gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace compreg {

struct BfgsOptions {
  int max_iterations = 0;           // 0 -> 500 * number of parameters
  double relative_tolerance = 1e-12;  // stop when an iteration improves f by less than this, relatively
  double gradient_tolerance = 1e-9;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <class F>
Eigen::VectorXd numeric_gradient(F& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 6e-6 * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

/// Minimizes f starting at x0. Never returns a point worse than x0.
template <class F>
MinimizeResult bfgs_minimize(F&& f, Eigen::VectorXd x0, const BfgsOptions& options = {}) {
  using Eigen::VectorXd;
  const Eigen::Index m = x0.size();
  const int max_it = options.max_iterations > 0 ? options.max_iterations : static_cast<int>(500 * std::max<Eigen::Index>(m, 1));

  MinimizeResult r;
  r.x = std::move(x0);
  r.value = f(r.x);
  if (m == 0 || r.value == -std::numeric_limits<double>::infinity()) {
    r.converged = true;
    return r;
  }

  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(m, m);
  VectorXd g = detail::numeric_gradient(f, r.x);
  bool scaled = false;

  for (int it = 1; it <= max_it; ++it) {
    r.iterations = it;
    if (!g.allFinite()) break;
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance * (1.0 + std::abs(r.value))) {
      r.converged = true;
      break;
    }
    VectorXd dir = -Hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      Hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }

    double t = 1.0;
    double f_new = std::numeric_limits<double>::quiet_NaN();
    VectorXd x_new;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = r.x + t * dir;
      f_new = f(x_new);
      if (f_new <= r.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // no descent along the search direction: treat as stationary if the gradient is small
      r.converged = g.lpNorm<Eigen::Infinity>() <= 1e-4 * (1.0 + std::abs(r.value));
      break;
    }

    const double improvement = r.value - f_new;
    const double f_old = r.value;
    const VectorXd s = x_new - r.x;
    r.x = std::move(x_new);
    r.value = f_new;
    if (f_new == -std::numeric_limits<double>::infinity()) {
      r.converged = true;
      break;
    }
    if (improvement <= options.relative_tolerance * std::max(1.0, std::abs(f_old))) {
      r.converged = true;
      break;
    }

    const VectorXd g_new = detail::numeric_gradient(f, r.x);
    const VectorXd y = g_new - g;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        Hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
  }
  return r;
}

}  // namespace compreg
