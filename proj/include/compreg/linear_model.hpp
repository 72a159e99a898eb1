#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "compreg/error.hpp"
#include "compreg/simplex.hpp"

namespace compreg {

/// n x (p+1) design with a leading intercept column of ones.
class DesignMatrix {
 public:
  DesignMatrix() = default;

  /// Builds [1 | covariates]. Pass a 0-column matrix (with n rows) for intercept-only.
  static DesignMatrix with_intercept(const Matrix& covariates, std::vector<std::string> names = {}) {
    Matrix v(covariates.rows(), covariates.cols() + 1);
    v.col(0).setOnes();
    v.rightCols(covariates.cols()) = covariates;
    return DesignMatrix(std::move(v), std::move(names));
  }

  static DesignMatrix intercept_only(Eigen::Index n) { return with_intercept(Matrix(n, 0)); }

  /// Takes a full design whose first column must be all ones.
  explicit DesignMatrix(Matrix values, std::vector<std::string> covariate_names = {})
      : values_(std::move(values)), names_(std::move(covariate_names)) {
    if (values_.cols() < 1 || values_.rows() < 1) throw Error(Errc::EmptyData, "empty design matrix");
    if ((values_.col(0).array() != 1.0).any()) throw Error(Errc::InvalidArgument, "first design column must be all ones");
    if (names_.empty())
      for (Eigen::Index j = 1; j < values_.cols(); ++j) names_.push_back("x" + std::to_string(j));
    if (names_.size() != static_cast<std::size_t>(values_.cols() - 1))
      throw Error(Errc::DimensionMismatch, "covariate name count does not match design columns");
  }

  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }
  Eigen::Index n() const noexcept { return values_.rows(); }
  /// Number of covariates, excluding the intercept.
  Eigen::Index p() const noexcept { return values_.cols() - 1; }

 private:
  Matrix values_;
  std::vector<std::string> names_;
};

struct LeastSquares {
  Matrix coefficients;  // columns(X) x columns(Y)
  Matrix fitted;
  Matrix residuals;
};

/// Ordinary least squares of every column of Y on X. Throws RankDeficientDesign.
inline LeastSquares least_squares(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows()) throw Error(Errc::DimensionMismatch, "design and response row counts differ");
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols())
    throw Error(Errc::RankDeficientDesign,
                "design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(X.cols()) + " columns");
  LeastSquares out;
  out.coefficients = qr.solve(Y);
  out.fitted = X * out.coefficients;
  out.residuals = Y - out.fitted;
  return out;
}

/// Diagonal of the hat matrix X (X'X)^-1 X'.
inline Vector leverages(const Matrix& X) {
  Eigen::HouseholderQR<Matrix> qr(X);
  const Matrix Q = qr.householderQ() * Matrix::Identity(X.rows(), X.cols());
  return Q.rowwise().squaredNorm();
}

/// Unbiased covariance of the columns of `data`.
inline Matrix sample_covariance(const Matrix& data) {
  const Matrix centered = data.rowwise() - data.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(data.rows() - 1);
}

}  // namespace compreg
