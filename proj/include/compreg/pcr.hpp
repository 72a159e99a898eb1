#pragma once

// Principal component regression with a scalar response and compositional
// predictors: alpha-transform (ilr at alpha = 0), standardize, eigen-analyse
// the cross-product of the standardized block, regress the response on the
// leading k scores plus optional reference-coded factor dummies.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "compreg/error.hpp"
#include "compreg/linear_model.hpp"
#include "compreg/simplex.hpp"

namespace compreg {

using FactorLabels = std::vector<std::string>;

struct Standardizer {
  Vector means;
  Vector sds;

  static Standardizer fit(const Matrix& x) {
    if (x.rows() < 2) throw Error(Errc::TooFewRows, "standardizing needs at least 2 rows");
    Standardizer s;
    s.means = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - s.means.transpose();
    s.sds = (centered.colwise().squaredNorm() / static_cast<double>(x.rows() - 1)).cwiseSqrt().transpose();
    if ((s.sds.array() <= 0.0).any()) throw Error(Errc::SingularScores, "a transformed predictor is constant");
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != means.size()) throw Error(Errc::DimensionMismatch, "standardizer width mismatch");
    return ((x.rowwise() - means.transpose()).array().rowwise() / sds.transpose().array()).matrix();
  }
};

/// Reference-cell coding. Levels are kept sorted; dummy columns follow that
/// order with the reference level skipped.
struct FactorEncoding {
  std::vector<std::string> levels;
  std::string reference;

  /// Reference defaults to the last level alphabetically.
  static FactorEncoding from_labels(const FactorLabels& labels, const std::optional<std::string>& reference = {}) {
    const std::set<std::string> uniq(labels.begin(), labels.end());
    if (uniq.empty()) throw Error(Errc::EmptyData, "factor has no levels");
    FactorEncoding f;
    f.levels.assign(uniq.begin(), uniq.end());
    f.reference = reference.value_or(f.levels.back());
    if (!uniq.contains(f.reference)) throw Error(Errc::UnknownFactorLevel, "reference level '" + f.reference + "' not present");
    return f;
  }

  std::vector<std::string> dummy_levels() const {
    std::vector<std::string> out;
    for (const auto& l : levels)
      if (l != reference) out.push_back(l);
    return out;
  }

  Matrix dummies(const FactorLabels& labels) const {
    const auto cols = dummy_levels();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (std::find(levels.begin(), levels.end(), labels[i]) == levels.end())
        throw Error(Errc::UnknownFactorLevel, "level '" + labels[i] + "' was not seen in training");
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (labels[i] == cols[c]) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return out;
  }
};

/// Standardizer plus eigenvectors of the standardized cross-product, columns
/// in descending eigenvalue order, each signed so its largest-magnitude entry is positive.
struct PcrBasis {
  Standardizer standardizer;
  Matrix eigenvectors;
  Vector eigenvalues;

  static PcrBasis fit(const Matrix& transformed) {
    PcrBasis b;
    b.standardizer = Standardizer::fit(transformed);
    const Matrix xs = b.standardizer.apply(transformed);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xs.transpose() * xs);
    if (eig.info() != Eigen::Success) throw Error(Errc::SingularScores, "eigen-decomposition failed");
    const Eigen::Index p = xs.cols();
    b.eigenvalues = eig.eigenvalues().reverse();
    b.eigenvectors = eig.eigenvectors().rowwise().reverse();
    for (Eigen::Index c = 0; c < p; ++c) {
      Eigen::Index arg = 0;
      b.eigenvectors.col(c).cwiseAbs().maxCoeff(&arg);
      if (b.eigenvectors(arg, c) < 0.0) b.eigenvectors.col(c) *= -1.0;
    }
    return b;
  }

  Matrix scores(const Matrix& transformed, Eigen::Index k) const {
    return standardizer.apply(transformed) * eigenvectors.leftCols(k);
  }
};

struct PcrModel {
  AlphaParam alpha;  // zero means ilr
  PcrBasis basis;
  Eigen::Index k = 0;
  Vector coefficients;  // intercept, k score slopes, then one per dummy level
  std::optional<FactorEncoding> factor;
  double sigma2 = 0.0;
  Matrix coefficient_covariance;  // sigma2 V_k (Z'Z)^-1 V_k' on the standardized predictors
  Labels component_labels;

  const Matrix& eigenvectors() const noexcept { return basis.eigenvectors; }
  Eigen::Index n_predictors() const noexcept { return coefficients.size() - 1; }
};

namespace detail {

inline Matrix pcr_design(const Matrix& scores, const Matrix* dummies) {
  const Eigen::Index extra = dummies ? dummies->cols() : 0;
  Matrix A(scores.rows(), 1 + scores.cols() + extra);
  A.col(0).setOnes();
  A.middleCols(1, scores.cols()) = scores;
  if (dummies) A.rightCols(extra) = *dummies;
  return A;
}

inline void check_pcr_inputs(const Vector& y, const CompositionBatch& x, Eigen::Index k, const FactorLabels* factor) {
  if (y.size() != x.n()) throw Error(Errc::DimensionMismatch, "response and predictor row counts differ");
  if (factor && static_cast<Eigen::Index>(factor->size()) != x.n())
    throw Error(Errc::DimensionMismatch, "factor and predictor row counts differ");
  if (k < 1 || k > x.D() - 1)
    throw Error(Errc::InvalidArgument, "k must lie in [1, " + std::to_string(x.D() - 1) + "], got " + std::to_string(k));
}

inline PcrModel fit_on_basis(const Vector& y, const Matrix& transformed, const PcrBasis& basis, Eigen::Index k,
                             const FactorLabels* factor, const std::optional<FactorEncoding>& encoding) {
  const Matrix scores = basis.scores(transformed, k);
  std::optional<Matrix> dummies;
  if (factor) dummies = encoding->dummies(*factor);
  const Matrix A = pcr_design(scores, dummies ? &*dummies : nullptr);
  if (A.rows() <= A.cols())
    throw Error(Errc::TooFewRows, "need n > " + std::to_string(A.cols()) + " rows for this model");

  PcrModel m;
  m.basis = basis;
  m.k = k;
  m.factor = encoding;
  LeastSquares ls;
  try {
    ls = least_squares(A, y);
  } catch (const Error& e) {
    if (e.code() != Errc::RankDeficientDesign) throw;
    throw Error(Errc::SingularScores, "scores and factor dummies are collinear");
  }
  m.coefficients = ls.coefficients.col(0);
  m.sigma2 = ls.residuals.squaredNorm() / static_cast<double>(A.rows() - A.cols());
  const Matrix Vk = basis.eigenvectors.leftCols(k);
  m.coefficient_covariance = m.sigma2 * Vk * (scores.transpose() * scores).inverse() * Vk.transpose();
  return m;
}

}  // namespace detail

struct PcrOptions {
  std::optional<std::string> reference;  // factor reference level
};

/// `factor` may be null for a model without the categorical covariate.
inline PcrModel pcr_fit(const Vector& y, const CompositionBatch& x, AlphaParam alpha, Eigen::Index k,
                        const FactorLabels* factor = nullptr, const PcrOptions& options = {}) {
  detail::check_pcr_inputs(y, x, k, factor);
  const Matrix transformed = alpha_or_ilr_transform(x, alpha).coords;
  std::optional<FactorEncoding> encoding;
  if (factor) encoding = FactorEncoding::from_labels(*factor, options.reference);
  PcrModel m = detail::fit_on_basis(y, transformed, PcrBasis::fit(transformed), k, factor, encoding);
  m.alpha = alpha;
  m.component_labels = x.labels();
  return m;
}

/// Regression design (intercept, scores, dummies) the model applies to `x`.
inline Matrix pcr_design_for(const PcrModel& model, const CompositionBatch& x, const FactorLabels* factor) {
  if (x.labels() != model.component_labels) throw Error(Errc::LabelMismatch, "component labels differ from the training data");
  if (model.factor.has_value() != (factor != nullptr))
    throw Error(Errc::InvalidArgument, model.factor ? "model needs factor labels" : "model was fitted without a factor");
  if (factor && static_cast<Eigen::Index>(factor->size()) != x.n())
    throw Error(Errc::DimensionMismatch, "factor and predictor row counts differ");
  const Matrix scores = model.basis.scores(alpha_or_ilr_transform(x, model.alpha).coords, model.k);
  if (!factor) return detail::pcr_design(scores, nullptr);
  const Matrix dummies = model.factor->dummies(*factor);
  return detail::pcr_design(scores, &dummies);
}

inline Vector pcr_predict(const PcrModel& model, const CompositionBatch& x, const FactorLabels* factor = nullptr) {
  return pcr_design_for(model, x, factor) * model.coefficients;
}

/// Coefficients on the standardized predictors by the eigenvector route,
/// B = V_k (Z'Z)^-1 Z' (y - mean y), with intercept mean(y). No-factor models only.
struct CoefficientRoute {
  double intercept = 0.0;
  Vector coefficients;
};

inline CoefficientRoute pcr_coefficient_route(const PcrModel& model, const Vector& y, const CompositionBatch& x) {
  if (model.factor) throw Error(Errc::InvalidArgument, "coefficient route is defined for models without a factor");
  const Matrix transformed = alpha_or_ilr_transform(x, model.alpha).coords;
  const Matrix Z = model.basis.scores(transformed, model.k);
  CoefficientRoute r;
  r.intercept = y.mean();
  const Vector yc = y.array() - r.intercept;
  r.coefficients = model.basis.eigenvectors.leftCols(model.k) * (Z.transpose() * Z).ldlt().solve(Z.transpose() * yc);
  return r;
}

inline double adjusted_r2(const Vector& y, const Vector& fitted, Eigen::Index n_predictors) {
  const Eigen::Index n = y.size();
  if (fitted.size() != n) throw Error(Errc::DimensionMismatch, "fitted and observed lengths differ");
  if (n <= n_predictors + 1) throw Error(Errc::TooFewRows, "need n > n_predictors + 1");
  const double tss = (y.array() - y.mean()).square().sum();
  if (!(tss > 0.0)) throw Error(Errc::DegenerateVariance, "response is constant");
  const double r2 = 1.0 - (y - fitted).squaredNorm() / tss;
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - n_predictors - 1);
}

struct StandardizedResiduals {
  Vector fitted;
  Vector values;
  std::vector<bool> outlier;  // |value| > 2
};

inline StandardizedResiduals standardized_residuals(const PcrModel& model, const Vector& y, const CompositionBatch& x,
                                                    const FactorLabels* factor = nullptr) {
  const Matrix A = pcr_design_for(model, x, factor);
  if (y.size() != A.rows()) throw Error(Errc::DimensionMismatch, "response length mismatch");
  StandardizedResiduals out;
  out.fitted = A * model.coefficients;
  const Vector h = leverages(A);
  const Vector r = y - out.fitted;
  out.values = Vector::Zero(y.size());
  out.outlier.assign(static_cast<std::size_t>(y.size()), false);
  if (model.sigma2 <= 1e-300) return out;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double denom = model.sigma2 * (1.0 - h[i]);
    if (denom <= 1e-300) continue;
    out.values[i] = r[i] / std::sqrt(denom);
    out.outlier[static_cast<std::size_t>(i)] = std::abs(out.values[i]) > 2.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation over (alpha, k).

/// Uniform integer in [0, bound) by rejection on raw 64-bit draws, so fold
/// assignment does not depend on the standard library's distributions.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// Fold index per row. Rows are shuffled within each stratum (strata in
/// sorted order) and dealt round-robin, continuing the deal across strata.
inline std::vector<int> assign_folds(Eigen::Index n, int folds, std::uint64_t seed, const FactorLabels* strata = nullptr) {
  if (folds < 2) throw Error(Errc::FoldTooSmall, "need at least 2 folds");
  if (n < folds) throw Error(Errc::FoldTooSmall, "fewer rows than folds");
  if (strata && static_cast<Eigen::Index>(strata->size()) != n) throw Error(Errc::DimensionMismatch, "strata length mismatch");
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[strata ? (*strata)[static_cast<std::size_t>(i)] : std::string()].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(n), 0);
  std::size_t dealt = 0;
  for (auto& [level, idx] : groups) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_below(rng, i)]);
    for (Eigen::Index r : idx) fold[static_cast<std::size_t>(r)] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

struct CvOptions {
  int folds = 10;
  std::uint64_t seed = 0;
  const FactorLabels* strata = nullptr;  // defaults to the factor when one is given
  std::optional<std::string> reference;
};

struct CvCell {
  double alpha = 0.0;
  Eigen::Index k = 0;
  std::vector<double> fold_mspe;
  double mean_mspe = std::numeric_limits<double>::quiet_NaN();
  std::string failure;
};

struct CvReport {
  std::vector<CvCell> cells;  // alpha-major, then k
  std::size_t chosen = 0;
  std::uint64_t seed = 0;
  int folds = 0;
  std::vector<int> fold_of;

  const CvCell& best() const { return cells.at(chosen); }
};

namespace detail {

inline bool cv_better(const CvCell& a, const CvCell& b) {
  if (a.mean_mspe != b.mean_mspe) return a.mean_mspe < b.mean_mspe;
  if (a.k != b.k) return a.k < b.k;
  if (std::abs(a.alpha) != std::abs(b.alpha)) return std::abs(a.alpha) < std::abs(b.alpha);
  return a.alpha < b.alpha;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<Eigen::Index>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (Eigen::Index i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

inline Matrix pick_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace detail

/// K-fold MSPE for every (alpha, k) cell. Standardizer and eigenvectors are
/// refitted on each training fold.
inline CvReport cross_validate(const Vector& y, const CompositionBatch& x, const std::vector<double>& alpha_grid,
                               const std::vector<Eigen::Index>& k_grid, const FactorLabels* factor, const CvOptions& options) {
  if (alpha_grid.empty() || k_grid.empty()) throw Error(Errc::InvalidArgument, "empty alpha or k grid");
  if (y.size() != x.n()) throw Error(Errc::DimensionMismatch, "response and predictor row counts differ");
  if (factor && static_cast<Eigen::Index>(factor->size()) != x.n())
    throw Error(Errc::DimensionMismatch, "factor and predictor row counts differ");
  const FactorLabels* strata = options.strata ? options.strata : factor;

  CvReport report;
  report.seed = options.seed;
  report.folds = options.folds;
  report.fold_of = assign_folds(x.n(), options.folds, options.seed, strata);

  std::vector<std::vector<Eigen::Index>> train(static_cast<std::size_t>(options.folds)), test(train.size());
  for (Eigen::Index i = 0; i < x.n(); ++i)
    for (int f = 0; f < options.folds; ++f)
      (report.fold_of[static_cast<std::size_t>(i)] == f ? test : train)[static_cast<std::size_t>(f)].push_back(i);

  std::optional<FactorEncoding> encoding;
  if (factor) {
    encoding = FactorEncoding::from_labels(*factor, options.reference);
    for (const auto& tr : train) {
      const auto labels = detail::pick(*factor, tr);
      if (std::set<std::string>(labels.begin(), labels.end()).size() != encoding->levels.size())
        throw Error(Errc::FoldTooSmall, "a training fold is missing a factor level");
    }
  }

  for (double a : alpha_grid) {
    std::vector<CvCell> row;
    for (Eigen::Index k : k_grid) row.push_back(CvCell{a, k, {}, std::numeric_limits<double>::quiet_NaN(), {}});
    try {
      const AlphaParam alpha(a);
      const Matrix transformed = alpha_or_ilr_transform(x, alpha).coords;
      for (Eigen::Index k : k_grid)
        if (k < 1 || k > transformed.cols())
          throw Error(Errc::InvalidArgument, "k = " + std::to_string(k) + " outside [1, " + std::to_string(transformed.cols()) + "]");
      for (std::size_t f = 0; f < train.size(); ++f) {
        const Matrix t_train = detail::pick_rows(transformed, train[f]);
        const Matrix t_test = detail::pick_rows(transformed, test[f]);
        const Vector y_train = detail::pick_rows(y, train[f]);
        const Vector y_test = detail::pick_rows(y, test[f]);
        std::optional<FactorLabels> f_train, f_test;
        if (factor) {
          f_train = detail::pick(*factor, train[f]);
          f_test = detail::pick(*factor, test[f]);
        }
        const PcrBasis basis = PcrBasis::fit(t_train);
        for (std::size_t c = 0; c < k_grid.size(); ++c) {
          const PcrModel m = detail::fit_on_basis(y_train, t_train, basis, k_grid[c], f_train ? &*f_train : nullptr, encoding);
          const Matrix scores = basis.scores(t_test, k_grid[c]);
          std::optional<Matrix> dummies;
          if (factor) dummies = encoding->dummies(*f_test);
          const Vector pred = detail::pcr_design(scores, dummies ? &*dummies : nullptr) * m.coefficients;
          row[c].fold_mspe.push_back((y_test - pred).squaredNorm() / static_cast<double>(y_test.size()));
        }
      }
      for (auto& cell : row) {
        double s = 0.0;
        for (double v : cell.fold_mspe) s += v;
        cell.mean_mspe = s / static_cast<double>(cell.fold_mspe.size());
      }
    } catch (const Error& e) {
      for (auto& cell : row) {
        cell.fold_mspe.clear();
        cell.mean_mspe = std::numeric_limits<double>::quiet_NaN();
        cell.failure = e.what();
      }
    }
    report.cells.insert(report.cells.end(), row.begin(), row.end());
  }

  bool found = false;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    if (!report.cells[i].failure.empty()) continue;
    if (!found || detail::cv_better(report.cells[i], report.cells[report.chosen])) {
      report.chosen = i;
      found = true;
    }
  }
  if (!found) throw Error(Errc::OptimizerFailure, "every (alpha, k) cell failed: " + report.cells.front().failure);
  return report;
}

}  // namespace compreg
