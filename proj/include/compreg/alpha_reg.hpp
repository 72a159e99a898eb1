#pragma once

// Regression with compositional responses.
//
// Fitted means use the multivariate logit link with the first component as
// reference: mu_1 = 1 / (1 + sum_j exp(x'b_j)), mu_i = exp(x'b_i) / (...).
// Coefficients are stored as a d x (p+1) matrix, row i-1 holding b_i.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "compreg/error.hpp"
#include "compreg/grid.hpp"
#include "compreg/linear_model.hpp"
#include "compreg/optimize.hpp"
#include "compreg/simplex.hpp"
#include "compreg/zero_impute.hpp"

namespace compreg {

struct AlphaRegModel {
  AlphaParam alpha;
  bool log_ratio = false;     // fitted by closed-form alr regression
  Eigen::Index divisor = -1;  // alr divisor used when log_ratio
  Matrix coefficients;        // d x (p+1)
  Matrix sigma_hat;           // d x d, unbiased (divisor n - p - 1)
  double objective_value = 0.0;
  double log_jacobian = std::numeric_limits<double>::quiet_NaN();  // NaN when the data have zeros
  bool converged = true;
  int iterations = 0;
  Labels component_labels;
  std::vector<std::string> covariate_names;

  Eigen::Index d() const noexcept { return coefficients.rows(); }
  Eigen::Index n_design_columns() const noexcept { return coefficients.cols(); }
};

struct AlphaSelection {
  enum class Criterion { twice_kl, profile_objective };

  std::vector<double> grid;
  std::vector<double> criterion_values;  // NaN where the fit failed
  std::vector<std::string> failures;     // empty string where the fit succeeded
  AlphaParam chosen_alpha;
  double chosen_value = 0.0;
  Criterion criterion_kind = Criterion::twice_kl;
};

/// Multiplicative logit link, first part as reference: n x D fitted compositions for coefficients B (d x (p+1)).
inline Matrix link_fitted(const Matrix& coefficients, const Matrix& design) {
  const Matrix eta = design * coefficients.transpose();
  Matrix out(eta.rows(), eta.cols() + 1);
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double shift = std::max(0.0, eta.row(i).maxCoeff());
    out(i, 0) = std::exp(-shift);
    for (Eigen::Index j = 0; j < eta.cols(); ++j) out(i, j + 1) = std::exp(eta(i, j) - shift);
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline CompositionBatch predict(const AlphaRegModel& model, const DesignMatrix& x_new) {
  if (x_new.values().cols() != model.n_design_columns())
    throw Error(Errc::DimensionMismatch, "design has " + std::to_string(x_new.values().cols()) + " columns, model expects " +
                                             std::to_string(model.n_design_columns()));
  return CompositionBatch(link_fitted(model.coefficients, x_new.values()), model.component_labels);
}

namespace detail {

inline void check_regression_shape(const CompositionBatch& Y, const DesignMatrix& X) {
  if (Y.n() != X.n()) throw Error(Errc::DimensionMismatch, "response and design row counts differ");
  if (Y.n() <= X.p() + 1)
    throw Error(Errc::TooFewRows, "need n > p + 1 rows (n = " + std::to_string(Y.n()) + ", p = " + std::to_string(X.p()) + ")");
}

/// log det of the ML residual covariance R'R / n; -inf when singular.
inline double log_det_ml_covariance(const Matrix& residuals) {
  const Matrix S = residuals.transpose() * residuals / static_cast<double>(residuals.rows());
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vector diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return 2.0 * diag.array().log().sum();
}

/// -(n/2) log|Sigma_ML| - n d / 2, i.e. the Gaussian objective with Sigma profiled out.
inline double profiled_objective(const Matrix& residuals) {
  const auto n = static_cast<double>(residuals.rows());
  const auto d = static_cast<double>(residuals.cols());
  return -0.5 * n * log_det_ml_covariance(residuals) - 0.5 * n * d;
}

/// log |d z / d x| summed over rows, for the alpha-transformation (ilr at alpha = 0).
inline double log_jacobian(const Matrix& y, AlphaParam alpha) {
  if ((y.array() <= 0.0).any()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::Index D = y.cols();
  const double logD = std::log(static_cast<double>(D));
  const Matrix u = power_transform_rows(y, alpha);
  const double per_row = static_cast<double>(D - 1) * logD + 0.5 * logD;
  return per_row * static_cast<double>(y.rows()) + u.array().log().sum() - y.array().log().sum();
}

/// Converts alr coefficients (one column per non-divisor component) to the
/// reference-first parameterization of the link.
inline Matrix alr_to_reference_first(const Matrix& alr_coef, Eigen::Index divisor, Eigen::Index D) {
  const Eigen::Index q = alr_coef.rows();
  Matrix full = Matrix::Zero(D, q);
  for (Eigen::Index j = 0, c = 0; j < D; ++j) {
    if (j == divisor) continue;
    full.row(j) = alr_coef.col(c++).transpose();
  }
  Matrix out(D - 1, q);
  for (Eigen::Index j = 1; j < D; ++j) out.row(j - 1) = full.row(j) - full.row(0);
  return out;
}

}  // namespace detail

/// Closed-form alr regression: OLS of alr(Y) on X, one response coordinate at a time.
inline AlphaRegModel fit_alr_regression(const CompositionBatch& Y, const DesignMatrix& X, Eigen::Index divisor) {
  detail::check_regression_shape(Y, X);
  if (divisor < 0 || divisor >= Y.D()) throw Error(Errc::InvalidArgument, "alr divisor index out of range");
  if (Y.has_zero()) throw Error(Errc::ZeroPart, "alr regression needs strictly positive responses; run zero imputation first");

  const Matrix z = alr_rows(Y.matrix(), divisor);
  const LeastSquares ls = least_squares(X.values(), z);
  const auto n = static_cast<double>(Y.n());
  const auto p = static_cast<double>(X.p());

  AlphaRegModel m;
  m.alpha = AlphaParam(0.0);
  m.log_ratio = true;
  m.divisor = divisor;
  m.coefficients = detail::alr_to_reference_first(ls.coefficients, divisor, Y.D());
  m.sigma_hat = ls.residuals.transpose() * ls.residuals / (n - p - 1.0);
  const Matrix fitted = link_fitted(m.coefficients, X.values());
  m.objective_value = detail::profiled_objective(ilr_rows(Y.matrix()) - ilr_rows(fitted));
  m.log_jacobian = detail::log_jacobian(Y.matrix(), m.alpha);
  m.component_labels = Y.labels();
  m.covariate_names = X.covariate_names();
  return m;
}

struct AlphaRegOptions {
  BfgsOptions optimizer;
};

/// Maximizes the profiled Gaussian objective of the alpha-transformed
/// responses over the link coefficients, starting from the alr solution.
inline AlphaRegModel fit_alpha_regression(const CompositionBatch& Y, const DesignMatrix& X, AlphaParam alpha,
                                          const AlphaRegOptions& options = {}) {
  detail::check_regression_shape(Y, X);
  if (alpha.value() <= 0.0 && Y.has_zero())
    throw Error(Errc::ZeroWithNonpositiveAlpha, "responses contain zeros; alpha must be > 0");
  if (alpha.is_zero()) return fit_alr_regression(Y, X, 0);

  const CompositionBatch start_data = Y.has_zero() ? multiplicative_replace(Y, ImputeConfig{}) : Y;
  const AlphaRegModel start = fit_alr_regression(start_data, X, 0);

  const Matrix y_alpha = alpha_transform_rows(Y.matrix(), alpha);
  const Matrix& design = X.values();
  const Eigen::Index d = Y.D() - 1;
  const Eigen::Index q = design.cols();

  auto to_coef = [&](const Vector& theta) { return Eigen::Map<const Matrix>(theta.data(), d, q); };
  auto negative_objective = [&](const Vector& theta) {
    const Matrix fitted = link_fitted(to_coef(theta), design);
    const Matrix resid = y_alpha - alpha_transform_rows(fitted, alpha);
    return 0.5 * static_cast<double>(design.rows()) * detail::log_det_ml_covariance(resid);
  };

  Vector theta0 = Eigen::Map<const Vector>(start.coefficients.data(), d * q);
  const MinimizeResult opt = bfgs_minimize(negative_objective, std::move(theta0), options.optimizer);

  AlphaRegModel m;
  m.alpha = alpha;
  m.coefficients = to_coef(opt.x);
  const Matrix resid = y_alpha - alpha_transform_rows(link_fitted(m.coefficients, design), alpha);
  const auto n = static_cast<double>(Y.n());
  m.sigma_hat = resid.transpose() * resid / (n - static_cast<double>(X.p()) - 1.0);
  m.objective_value = detail::profiled_objective(resid);
  m.log_jacobian = detail::log_jacobian(Y.matrix(), alpha);
  m.converged = opt.converged;
  m.iterations = opt.iterations;
  m.component_labels = Y.labels();
  m.covariate_names = X.covariate_names();
  return m;
}

/// Profile log-likelihood of alpha: the fitted objective plus the log-Jacobian
/// of the transformation, which makes values comparable across alpha.
inline double profile_objective(const CompositionBatch& Y, const DesignMatrix& X, AlphaParam alpha,
                                const AlphaRegOptions& options = {}) {
  if (alpha.value() <= 0.0 && Y.has_zero())
    throw Error(Errc::ZeroWithNonpositiveAlpha, "responses contain zeros; alpha must be > 0");
  if (Y.has_zero()) throw Error(Errc::ZeroPart, "the profile likelihood is undefined for data with zeros; use select_alpha_by_kl");
  const AlphaRegModel m = fit_alpha_regression(Y, X, alpha, options);
  return m.objective_value + m.log_jacobian;
}

namespace detail {

/// Better = strictly better value, or equal value with smaller |alpha| (then smaller alpha).
inline bool improves(double value, double alpha, double best_value, double best_alpha, bool minimize) {
  if (std::isnan(best_value)) return true;
  if (minimize ? value < best_value : value > best_value) return true;
  if (value != best_value) return false;
  if (std::abs(alpha) != std::abs(best_alpha)) return std::abs(alpha) < std::abs(best_alpha);
  return alpha < best_alpha;
}

template <class Eval>
AlphaSelection run_selection(const std::vector<double>& grid, bool minimize, AlphaSelection::Criterion kind, Eval&& eval) {
  if (grid.empty()) throw Error(Errc::InvalidArgument, "alpha grid is empty");
  AlphaSelection sel;
  sel.grid = grid;
  sel.criterion_kind = kind;
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_alpha = 0.0;
  std::string last_error;
  for (double a : grid) {
    double v = std::numeric_limits<double>::quiet_NaN();
    std::string failure;
    try {
      v = eval(AlphaParam(a));
      if (std::isnan(v)) failure = "criterion is NaN";
    } catch (const Error& e) {
      failure = e.what();
    }
    sel.criterion_values.push_back(v);
    sel.failures.push_back(failure);
    if (!failure.empty()) {
      last_error = failure;
      continue;
    }
    if (improves(v, a, best, best_alpha, minimize)) {
      best = v;
      best_alpha = a;
    }
  }
  if (std::isnan(best)) throw Error(Errc::OptimizerFailure, "every grid point failed; last error: " + last_error);
  sel.chosen_alpha = AlphaParam(best_alpha);
  sel.chosen_value = best;
  return sel;
}

}  // namespace detail

/// Chooses alpha minimizing twice-KL of the in-sample fits. Fits use
/// `Y_fit` (e.g. zero-imputed data); the divergence is measured against
/// `observed` (the original data), which defaults to `Y_fit`.
inline AlphaSelection select_alpha_by_kl(const CompositionBatch& Y_fit, const DesignMatrix& X, const std::vector<double>& grid,
                                         const CompositionBatch* observed = nullptr, const AlphaRegOptions& options = {}) {
  const CompositionBatch& obs = observed ? *observed : Y_fit;
  if (obs.n() != Y_fit.n() || obs.D() != Y_fit.D()) throw Error(Errc::DimensionMismatch, "observed and fitting batches differ");
  return detail::run_selection(grid, true, AlphaSelection::Criterion::twice_kl, [&](AlphaParam a) {
    const AlphaRegModel m = fit_alpha_regression(Y_fit, X, a, options);
    return kl_fit_divergence(obs.matrix(), link_fitted(m.coefficients, X.values()));
  });
}

/// Chooses alpha maximizing the profile log-likelihood (zero-free data only).
inline AlphaSelection select_alpha_by_profile(const CompositionBatch& Y, const DesignMatrix& X, const std::vector<double>& grid,
                                              const AlphaRegOptions& options = {}) {
  return detail::run_selection(grid, false, AlphaSelection::Criterion::profile_objective,
                               [&](AlphaParam a) { return profile_objective(Y, X, a, options); });
}

}  // namespace compreg
