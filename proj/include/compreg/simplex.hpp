#pragma once

// Simplex geometry: closure, the Helmert sub-matrix, the alpha / ilr / alr
// transformations with their inverses, and the twice-KL fit divergence.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "compreg/error.hpp"

namespace compreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Labels = std::vector<std::string>;

inline constexpr double kClosureTol = 1e-9;

namespace detail {

inline void validate_raw(const Eigen::Ref<const Eigen::RowVectorXd>& raw) {
  if (raw.size() < 2) throw Error(Errc::InvalidDimension, "a composition needs at least 2 parts");
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    if (!std::isfinite(raw[j])) throw Error(Errc::NegativePart, "non-finite part at index " + std::to_string(j));
    if (raw[j] < 0) throw Error(Errc::NegativePart, "part " + std::to_string(j) + " is negative");
  }
  if (!(raw.sum() > 0)) throw Error(Errc::AllZeroVector, "all parts are zero");
}

inline Labels default_labels(std::size_t D) {
  Labels out;
  out.reserve(D);
  for (std::size_t j = 0; j < D; ++j) out.push_back("x" + std::to_string(j + 1));
  return out;
}

}  // namespace detail

/// A point on the simplex: D >= 2 nonnegative parts summing to one.
class Composition {
 public:
  /// Closes `parts` on construction; throws NegativePart / AllZeroVector / InvalidDimension.
  explicit Composition(Vector parts, Labels labels = {}) : parts_(std::move(parts)), labels_(std::move(labels)) {
    detail::validate_raw(parts_.transpose());
    parts_ /= parts_.sum();
    if (labels_.empty()) labels_ = detail::default_labels(static_cast<std::size_t>(parts_.size()));
    if (labels_.size() != static_cast<std::size_t>(parts_.size()))
      throw Error(Errc::DimensionMismatch, "label count does not match part count");
  }

  const Vector& parts() const noexcept { return parts_; }
  const Labels& labels() const noexcept { return labels_; }
  Eigen::Index size() const noexcept { return parts_.size(); }
  double operator[](Eigen::Index i) const { return parts_[i]; }
  bool has_zero() const { return (parts_.array() == 0.0).any(); }

 private:
  Vector parts_;
  Labels labels_;
};

/// n compositions sharing D and label order, stored row-wise.
class CompositionBatch {
 public:
  CompositionBatch() = default;

  /// Every row is closed; throws on negative, all-zero or too-narrow rows.
  explicit CompositionBatch(Matrix rows, Labels labels = {}) : rows_(std::move(rows)), labels_(std::move(labels)) {
    if (rows_.rows() < 1) throw Error(Errc::EmptyData, "a batch needs at least one row");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      try {
        detail::validate_raw(rows_.row(i));
      } catch (const Error& e) {
        throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what());
      }
      rows_.row(i) /= rows_.row(i).sum();
    }
    if (labels_.empty()) labels_ = detail::default_labels(static_cast<std::size_t>(rows_.cols()));
    if (labels_.size() != static_cast<std::size_t>(rows_.cols()))
      throw Error(Errc::DimensionMismatch, "label count does not match part count");
  }

  static CompositionBatch from_rows(std::span<const Composition> rows) {
    if (rows.empty()) throw Error(Errc::EmptyData, "a batch needs at least one row");
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols() || rows[i].labels() != rows.front().labels())
        throw Error(Errc::DimensionMismatch, "rows disagree on D or labels");
      m.row(static_cast<Eigen::Index>(i)) = rows[i].parts().transpose();
    }
    return CompositionBatch(std::move(m), rows.front().labels());
  }

  const Matrix& matrix() const noexcept { return rows_; }
  const Labels& labels() const noexcept { return labels_; }
  Eigen::Index n() const noexcept { return rows_.rows(); }
  Eigen::Index D() const noexcept { return rows_.cols(); }
  Composition row(Eigen::Index i) const { return Composition(rows_.row(i).transpose(), labels_); }
  bool has_zero() const { return (rows_.array() == 0.0).any(); }

  CompositionBatch subset(std::span<const Eigen::Index> idx) const {
    Matrix m(static_cast<Eigen::Index>(idx.size()), D());
    for (std::size_t i = 0; i < idx.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows_.row(idx[i]);
    return CompositionBatch(std::move(m), labels_);
  }

 private:
  Matrix rows_;
  Labels labels_;
};

/// Power parameter of the alpha-transformation, restricted to [-1, 1].
class AlphaParam {
 public:
  constexpr AlphaParam() = default;
  explicit AlphaParam(double value) : value_(value) {
    if (!(value >= -1.0 && value <= 1.0))
      throw Error(Errc::InvalidArgument, "alpha must lie in [-1, 1], got " + std::to_string(value));
  }
  constexpr double value() const noexcept { return value_; }
  constexpr bool is_zero() const noexcept { return value_ == 0.0; }

 private:
  double value_ = 0.0;
};

/// Transformed coordinates; `alpha.is_zero()` marks the ilr limit.
struct TransformedBatch {
  Matrix coords;  // n x (D-1)
  AlphaParam alpha;
  Labels source_labels;
};

inline Composition close(std::span<const double> raw, Labels labels = {}) {
  Vector v = Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  return Composition(std::move(v), std::move(labels));
}

/// Helmert matrix without its constant row. Row k (1-based) carries k entries
/// 1/sqrt(k(k+1)) followed by -k/sqrt(k(k+1)) and zeros.
inline Matrix helmert_submatrix(Eigen::Index D) {
  if (D < 2) throw Error(Errc::InvalidDimension, "Helmert sub-matrix needs D >= 2");
  Matrix H = Matrix::Zero(D - 1, D);
  for (Eigen::Index k = 1; k < D; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    H.row(k - 1).head(k).setConstant(s);
    H(k - 1, k) = -static_cast<double>(k) * s;
  }
  return H;
}

// ---------------------------------------------------------------------------
// Batch kernels. Each row of the input matrix is one closed composition.

namespace detail {

inline void require_alpha_ok(const Matrix& x, double alpha) {
  if (alpha <= 0.0 && (x.array() == 0.0).any())
    throw Error(Errc::ZeroWithNonpositiveAlpha, "data contain zeros; alpha must be > 0");
}

inline void require_positive(const Matrix& x) {
  if ((x.array() <= 0.0).any())
    throw Error(Errc::ZeroPart, "log-ratio transform of a zero part (logarithm of zero is undefined)");
}

inline Matrix power_rows(const Matrix& x, double alpha) {
  require_alpha_ok(x, alpha);
  Matrix u = x.array().pow(alpha).matrix();
  const Vector s = u.rowwise().sum();
  return (u.array().colwise() / s.array()).matrix();
}

inline Matrix close_rows(Matrix m) {
  const Vector s = m.rowwise().sum();
  return (m.array().colwise() / s.array()).matrix();
}

}  // namespace detail

inline Matrix power_transform_rows(const Matrix& x, AlphaParam alpha) { return detail::power_rows(x, alpha.value()); }

inline Matrix alpha_transform_rows(const Matrix& x, AlphaParam alpha) {
  if (alpha.is_zero()) throw Error(Errc::AlphaIsZero, "alpha = 0 is the ilr limit; call ilr explicitly");
  const Eigen::Index D = x.cols();
  const Matrix u = detail::power_rows(x, alpha.value());
  const Matrix H = helmert_submatrix(D);
  return ((static_cast<double>(D) * u).array() - 1.0).matrix() * H.transpose() / alpha.value();
}

inline Matrix inverse_alpha_transform_rows(const Matrix& z, AlphaParam alpha) {
  if (alpha.is_zero()) throw Error(Errc::AlphaIsZero, "alpha = 0 is the ilr limit; call inverse_ilr explicitly");
  const Eigen::Index D = z.cols() + 1;
  const Matrix H = helmert_submatrix(D);
  Matrix u = ((alpha.value() * z * H).array() + 1.0).matrix() / static_cast<double>(D);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index j = 0; j < D; ++j) {
      if (u(i, j) < 0.0) {
        if (u(i, j) > -1e-12) {
          u(i, j) = 0.0;
        } else {
          throw Error(Errc::OutOfRange, "coordinates fall outside the transformed simplex (row " + std::to_string(i) + ")");
        }
      }
      if (u(i, j) == 0.0 && alpha.value() < 0.0)
        throw Error(Errc::OutOfRange, "boundary point cannot be inverted for negative alpha");
    }
  }
  return detail::close_rows(u.array().pow(1.0 / alpha.value()).matrix());
}

inline Matrix ilr_rows(const Matrix& x) {
  detail::require_positive(x);
  const Matrix L = x.array().log().matrix();
  const Matrix centered = L.colwise() - L.rowwise().mean();
  return centered * helmert_submatrix(x.cols()).transpose();
}

inline Matrix inverse_ilr_rows(const Matrix& v) {
  const Matrix H = helmert_submatrix(v.cols() + 1);
  Matrix c = v * H;
  // shift by the row max before exponentiating; closure removes the factor
  c = c.colwise() - c.rowwise().maxCoeff();
  return detail::close_rows(c.array().exp().matrix());
}

inline Matrix alr_rows(const Matrix& x, Eigen::Index divisor) {
  if (divisor < 0 || divisor >= x.cols()) throw Error(Errc::InvalidArgument, "alr divisor index out of range");
  detail::require_positive(x);
  Matrix z(x.rows(), x.cols() - 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double ld = std::log(x(i, divisor));
    for (Eigen::Index j = 0, c = 0; j < x.cols(); ++j) {
      if (j == divisor) continue;
      z(i, c++) = std::log(x(i, j)) - ld;
    }
  }
  return z;
}

inline Matrix inverse_alr_rows(const Matrix& z, Eigen::Index divisor) {
  const Eigen::Index D = z.cols() + 1;
  if (divisor < 0 || divisor >= D) throw Error(Errc::InvalidArgument, "alr divisor index out of range");
  Matrix e(z.rows(), D);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = std::max(0.0, z.row(i).maxCoeff());
    for (Eigen::Index j = 0, c = 0; j < D; ++j) e(i, j) = (j == divisor) ? std::exp(-m) : std::exp(z(i, c++) - m);
  }
  return detail::close_rows(std::move(e));
}

/// Alpha-transform for alpha != 0, ilr for alpha == 0.
inline TransformedBatch alpha_or_ilr_transform(const CompositionBatch& x, AlphaParam alpha) {
  Matrix z = alpha.is_zero() ? ilr_rows(x.matrix()) : alpha_transform_rows(x.matrix(), alpha);
  return TransformedBatch{std::move(z), alpha, x.labels()};
}

// ---------------------------------------------------------------------------
// Single-composition API.

namespace detail {
inline Matrix as_row(const Composition& x) { return x.parts().transpose(); }
inline Matrix as_row(const Vector& v) { return v.transpose(); }
}  // namespace detail

inline Composition power_transform(const Composition& x, AlphaParam alpha) {
  return Composition(power_transform_rows(detail::as_row(x), alpha).row(0).transpose(), x.labels());
}

inline Vector alpha_transform(const Composition& x, AlphaParam alpha) {
  return alpha_transform_rows(detail::as_row(x), alpha).row(0).transpose();
}

inline Composition inverse_alpha_transform(const Vector& z, AlphaParam alpha) {
  return Composition(inverse_alpha_transform_rows(detail::as_row(z), alpha).row(0).transpose());
}

inline Vector ilr(const Composition& x) { return ilr_rows(detail::as_row(x)).row(0).transpose(); }

inline Composition inverse_ilr(const Vector& v) { return Composition(inverse_ilr_rows(detail::as_row(v)).row(0).transpose()); }

inline Vector alr(const Composition& x, Eigen::Index divisor) {
  return alr_rows(detail::as_row(x), divisor).row(0).transpose();
}

inline Composition inverse_alr(const Vector& z, Eigen::Index divisor) {
  return Composition(inverse_alr_rows(detail::as_row(z), divisor).row(0).transpose());
}

/// Twice the Kullback-Leibler divergence of fitted from observed compositions,
/// 2 * sum_ij y_ij log(y_ij / yhat_ij), with 0 * log(0 / yhat) taken as 0.
inline double kl_fit_divergence(const Matrix& observed, const Matrix& fitted) {
  if (observed.rows() != fitted.rows() || observed.cols() != fitted.cols())
    throw Error(Errc::DimensionMismatch, "observed and fitted batches differ in shape");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < observed.rows(); ++i) {
    for (Eigen::Index j = 0; j < observed.cols(); ++j) {
      const double y = observed(i, j);
      if (y == 0.0) continue;
      const double f = fitted(i, j);
      if (!(f > 0.0))
        throw Error(Errc::FittedZero, "fitted part is zero where the observed part is positive (row " +
                                          std::to_string(i) + ", part " + std::to_string(j) + ")");
      kl += y * std::log(y / f);
    }
  }
  // rounding can push a perfect fit a hair below zero
  return std::max(0.0, 2.0 * kl);
}

inline double kl_fit_divergence(const CompositionBatch& observed, const CompositionBatch& fitted) {
  return kl_fit_divergence(observed.matrix(), fitted.matrix());
}

}  // namespace compreg
