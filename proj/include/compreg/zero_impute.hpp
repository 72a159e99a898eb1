#pragma once

// Replacement of zero parts so that log-ratio methods can run: a
// multiplicative replacement at a fraction of a per-component detection
// limit, refined by an EM loop on a Gaussian fitted in log-ratio space.
//
// The E-step is computed in the alr chart whose divisor is a zero-free
// component. alr and ilr coordinates are linearly isomorphic, so the fitted
// Gaussian is the same model; the alr chart places every zero part in a
// single coordinate, which makes the conditional expectation per cell direct.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "compreg/error.hpp"
#include "compreg/linear_model.hpp"
#include "compreg/simplex.hpp"

namespace compreg {

struct ImputeConfig {
  double threshold_fraction = 0.65;
  std::optional<Vector> detection_limits;  // per component; detected from data when empty
  double em_tolerance = 0.01;              // on the relative change of imputed parts
  int max_iterations = 100;

  void validate() const {
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
      throw Error(Errc::InvalidArgument, "threshold_fraction must lie in (0, 1)");
    if (!(em_tolerance > 0.0)) throw Error(Errc::InvalidArgument, "em_tolerance must be positive");
    if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be >= 1");
    if (detection_limits && (detection_limits->array() <= 0.0).any())
      throw Error(Errc::InvalidArgument, "detection limits must be positive");
  }
};

struct ChangedCell {
  Eigen::Index row;
  Eigen::Index component;
  double old_value;
  double new_value;
};

struct ImputeResult {
  CompositionBatch batch;
  int iterations = 0;
  std::vector<ChangedCell> changed_cells;
  bool converged = true;
  bool ridge_applied = false;
  Eigen::Index divisor = -1;  // alr chart used by the E-step, -1 when nothing was imputed
};

/// Smallest strictly positive value of every component.
inline Vector detect_limits(const CompositionBatch& batch) {
  const Matrix& x = batch.matrix();
  Vector lim(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (x(i, j) > 0.0) m = std::min(m, x(i, j));
    if (!std::isfinite(m))
      throw Error(Errc::AllZeroComponent, "component '" + batch.labels()[static_cast<std::size_t>(j)] + "' is zero in every row");
    lim[j] = m;
  }
  return lim;
}

namespace detail {

inline Vector resolve_limits(const CompositionBatch& batch, const ImputeConfig& config) {
  if (!config.detection_limits) return detect_limits(batch);
  if (config.detection_limits->size() != batch.D())
    throw Error(Errc::DimensionMismatch, "detection limit count does not match D");
  return *config.detection_limits;
}

inline Matrix multiplicative_replace_rows(const Matrix& x, const Vector& limits, double fraction) {
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double added = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (x(i, j) == 0.0) added += fraction * limits[j];
    if (added == 0.0) continue;
    if (added >= 1.0)
      throw Error(Errc::ReplacementExceedsUnity, "replacements in row " + std::to_string(i) + " sum to >= 1");
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out(i, j) = (x(i, j) == 0.0) ? fraction * limits[j] : x(i, j) * (1.0 - added);
  }
  return out;
}

/// phi(b) / Phi(b) for the standard normal.
inline double inverse_mills_lower(double b) {
  if (b > -30.0) {
    const double phi = std::exp(-0.5 * b * b) / std::sqrt(2.0 * std::numbers::pi);
    const double Phi = 0.5 * std::erfc(-b / std::numbers::sqrt2);
    return phi / Phi;
  }
  const double b2 = b * b;
  return -b / (1.0 - 1.0 / b2 + 3.0 / (b2 * b2));
}

/// E[Z | Z < upper] for Z ~ N(mean, sd^2), kept strictly below `upper`.
inline double truncated_mean_below(double mean, double sd, double upper) {
  double v;
  if (sd > 1e-300) {
    v = mean - sd * inverse_mills_lower((upper - mean) / sd);
  } else {
    v = std::min(mean, upper);
  }
  if (!(v < upper)) v = upper - 1e-10 * std::max(1.0, std::abs(upper));
  return v;
}

}  // namespace detail

/// Zeros become fraction * limit; the other parts of the row shrink so it re-closes.
inline CompositionBatch multiplicative_replace(const CompositionBatch& batch, const ImputeConfig& config) {
  config.validate();
  const Vector limits = detail::resolve_limits(batch, config);
  return CompositionBatch(detail::multiplicative_replace_rows(batch.matrix(), limits, config.threshold_fraction),
                          batch.labels());
}

inline ImputeResult em_impute(const CompositionBatch& batch, const ImputeConfig& config) {
  config.validate();
  const Matrix& x = batch.matrix();
  const Eigen::Index n = x.rows();
  const Eigen::Index D = x.cols();
  const Eigen::Index d = D - 1;
  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> zero = (x.array() == 0.0);

  ImputeResult result;
  if (!zero.any()) {
    result.batch = batch;
    return result;
  }

  const Vector limits = detail::resolve_limits(batch, config);
  const double fraction = config.threshold_fraction;
  const Matrix start = detail::multiplicative_replace_rows(x, limits, fraction);

  Eigen::Index divisor = -1;
  for (Eigen::Index j = 0; j < D; ++j) {
    if (zero.col(j).any()) continue;
    if (divisor < 0 || x.col(j).mean() > x.col(divisor).mean()) divisor = j;
  }
  if (divisor < 0) throw Error(Errc::NoCompleteComponent, "every component has at least one zero");
  if (n <= d) throw Error(Errc::SingularCovariance, "need more rows than log-ratio coordinates to fit a covariance");
  result.divisor = divisor;

  // component index for each alr coordinate
  std::vector<Eigen::Index> comp_of;
  for (Eigen::Index j = 0; j < D; ++j)
    if (j != divisor) comp_of.push_back(j);

  Matrix coords = alr_rows(start, divisor);
  Matrix upper(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < d; ++c)
      upper(i, c) = std::log(fraction * limits[comp_of[static_cast<std::size_t>(c)]] / x(i, divisor));

  std::vector<Eigen::Index> rows_with_zero;
  for (Eigen::Index i = 0; i < n; ++i)
    if (zero.row(i).any()) rows_with_zero.push_back(i);

  auto assemble = [&](const Matrix& a) {
    Matrix out = x;
    for (Eigen::Index i : rows_with_zero) {
      for (Eigen::Index c = 0; c < d; ++c) {
        const Eigen::Index j = comp_of[static_cast<std::size_t>(c)];
        if (zero(i, j)) out(i, j) = x(i, divisor) * std::exp(a(i, c));
      }
      out.row(i) /= out.row(i).sum();
    }
    return out;
  };

  Matrix previous = start;
  Matrix current = start;
  result.converged = false;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const Vector mu = coords.colwise().mean().transpose();
    Matrix S = sample_covariance(coords);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
      S += 1e-8 * Matrix::Identity(d, d);
      result.ridge_applied = true;
    }

    Matrix next = coords;
    for (Eigen::Index i : rows_with_zero) {
      std::vector<Eigen::Index> miss, obs;
      for (Eigen::Index c = 0; c < d; ++c) (zero(i, comp_of[static_cast<std::size_t>(c)]) ? miss : obs).push_back(c);
      const auto nm = static_cast<Eigen::Index>(miss.size());
      const auto no = static_cast<Eigen::Index>(obs.size());
      Vector cond_mean(nm);
      Matrix cond_cov(nm, nm);
      for (Eigen::Index a = 0; a < nm; ++a) {
        cond_mean[a] = mu[miss[a]];
        for (Eigen::Index b = 0; b < nm; ++b) cond_cov(a, b) = S(miss[a], miss[b]);
      }
      if (no > 0) {
        Matrix Soo(no, no), Smo(nm, no);
        Vector dev(no);
        for (Eigen::Index a = 0; a < no; ++a) {
          dev[a] = coords(i, obs[a]) - mu[obs[a]];
          for (Eigen::Index b = 0; b < no; ++b) Soo(a, b) = S(obs[a], obs[b]);
        }
        for (Eigen::Index a = 0; a < nm; ++a)
          for (Eigen::Index b = 0; b < no; ++b) Smo(a, b) = S(miss[a], obs[b]);
        Eigen::LDLT<Matrix> ldlt(Soo);
        cond_mean += Smo * ldlt.solve(dev);
        cond_cov -= Smo * ldlt.solve(Smo.transpose());
      }
      for (Eigen::Index a = 0; a < nm; ++a) {
        const double sd = std::sqrt(std::max(0.0, cond_cov(a, a)));
        next(i, miss[a]) = detail::truncated_mean_below(cond_mean[a], sd, upper(i, miss[a]));
      }
    }
    coords = std::move(next);
    current = assemble(coords);
    result.iterations = it;

    double change = 0.0;
    for (Eigen::Index i : rows_with_zero)
      for (Eigen::Index j = 0; j < D; ++j)
        if (zero(i, j)) change = std::max(change, std::abs(current(i, j) - previous(i, j)) / previous(i, j));
    previous = current;
    if (change < config.em_tolerance) {
      result.converged = true;
      break;
    }
  }

  result.batch = CompositionBatch(std::move(current), batch.labels());
  const Matrix& imputed = result.batch.matrix();
  for (Eigen::Index i : rows_with_zero)
    for (Eigen::Index j = 0; j < D; ++j)
      if (zero(i, j)) result.changed_cells.push_back({i, j, 0.0, imputed(i, j)});
  return result;
}

}  // namespace compreg
