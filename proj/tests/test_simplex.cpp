#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "compreg/simplex.hpp"

using namespace compreg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Composition random_composition(std::mt19937_64& rng, Eigen::Index D) {
  std::gamma_distribution<double> g(1.5, 1.0);
  Vector v(D);
  for (Eigen::Index j = 0; j < D; ++j) v[j] = g(rng) + 1e-6;
  return Composition(v);
}

}  // namespace

TEST(Close, SymmetricPair) {
  const std::vector<double> raw{2, 2};
  const Composition c = close(raw);
  EXPECT_DOUBLE_EQ(c[0], 0.5);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
}

TEST(Close, Percentages) {
  const std::vector<double> raw{70, 20, 10};
  const Composition c = close(raw);
  EXPECT_NEAR(c[0], 0.7, 1e-15);
  EXPECT_NEAR(c[1], 0.2, 1e-15);
  EXPECT_NEAR(c[2], 0.1, 1e-15);
}

TEST(Close, GlassRowDividesByRowTotal) {
  const std::vector<double> raw{13.64, 4.49, 1.10, 71.78, 0.06, 8.75, 0, 0};
  const Composition c = close(raw);
  for (std::size_t j = 0; j < raw.size(); ++j) EXPECT_NEAR(c[static_cast<Eigen::Index>(j)], raw[j] / 99.82, 1e-15);
  EXPECT_NEAR(c.parts().sum(), 1.0, kClosureTol);
}

TEST(Close, Errors) {
  const std::vector<double> zeros{0, 0, 0};
  const std::vector<double> negative{0.5, -0.1, 0.6};
  const std::vector<double> single{1.0};
  try {
    close(zeros);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllZeroVector);
  }
  try {
    close(negative);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegativePart);
  }
  EXPECT_THROW(close(single), Error);
}

TEST(Helmert, SmallCases) {
  const Matrix H2 = helmert_submatrix(2);
  ASSERT_EQ(H2.rows(), 1);
  EXPECT_NEAR(H2(0, 0), 1 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(H2(0, 1), -1 / std::numbers::sqrt2, 1e-15);

  const Matrix H3 = helmert_submatrix(3);
  const double s6 = std::sqrt(6.0);
  EXPECT_NEAR(H3(0, 0), 1 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(H3(0, 1), -1 / std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(H3(0, 2), 0.0);
  EXPECT_NEAR(H3(1, 0), 1 / s6, 1e-15);
  EXPECT_NEAR(H3(1, 1), 1 / s6, 1e-15);
  EXPECT_NEAR(H3(1, 2), -2 / s6, 1e-15);
}

TEST(Helmert, OrthonormalRowsSummingToZero) {
  for (Eigen::Index D = 2; D <= 20; ++D) {
    const Matrix H = helmert_submatrix(D);
    const Matrix I = Matrix::Identity(D - 1, D - 1);
    EXPECT_LT((H * H.transpose() - I).cwiseAbs().maxCoeff(), 100 * std::numeric_limits<double>::epsilon()) << D;
    EXPECT_LT(H.rowwise().sum().cwiseAbs().maxCoeff(), 100 * std::numeric_limits<double>::epsilon()) << D;
  }
  EXPECT_THROW(helmert_submatrix(1), Error);
}

TEST(PowerTransform, Examples) {
  const Composition uniform(vec({1, 1, 1}));
  for (double a : {-1.0, -0.3, 0.25, 1.0}) {
    const Composition u = power_transform(uniform, AlphaParam(a));
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(u[j], 1.0 / 3.0, 1e-15);
  }
  const Composition id = power_transform(Composition(vec({0.7, 0.3})), AlphaParam(1.0));
  EXPECT_NEAR(id[0], 0.7, 1e-15);
  // sqrt(0.9) = 3 sqrt(0.1), so the result is exactly (3/4, 1/4)
  const Composition h = power_transform(Composition(vec({0.9, 0.1})), AlphaParam(0.5));
  EXPECT_NEAR(h[0], 0.75, 1e-12);
  EXPECT_NEAR(h[1], 0.25, 1e-12);
}

TEST(PowerTransform, ZeroNeedsPositiveAlpha) {
  const Composition x(vec({0.5, 0.5, 0.0}));
  EXPECT_NO_THROW(power_transform(x, AlphaParam(0.5)));
  try {
    power_transform(x, AlphaParam(-0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroWithNonpositiveAlpha);
  }
}

TEST(PowerTransform, OutputStaysOnSimplex) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Composition x = random_composition(rng, 2 + t % 7);
    const Composition u = power_transform(x, AlphaParam(ua(rng)));
    EXPECT_NEAR(u.parts().sum(), 1.0, 1e-12);
    EXPECT_GE(u.parts().minCoeff(), 0.0);
  }
}

TEST(AlphaTransform, Examples) {
  const Vector z0 = alpha_transform(Composition(vec({1, 1, 1})), AlphaParam(0.5));
  EXPECT_NEAR(z0.cwiseAbs().maxCoeff(), 0.0, 1e-15);

  const Vector z1 = alpha_transform(Composition(vec({0.7, 0.3})), AlphaParam(1.0));
  ASSERT_EQ(z1.size(), 1);
  EXPECT_NEAR(z1[0], 0.8 / std::numbers::sqrt2, 1e-12);

  const Composition x(vec({0.2, 0.3, 0.5}));
  const Vector small = alpha_transform(x, AlphaParam(1e-7));
  const Vector v = ilr(x);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(small[j], v[j], 1e-5);
}

TEST(AlphaTransform, RefusesZeroAlpha) {
  try {
    alpha_transform(Composition(vec({0.2, 0.8})), AlphaParam(0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AlphaIsZero);
  }
}

TEST(AlphaTransform, LimitIsIlr) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const Composition x = random_composition(rng, 2 + t % 9);
    const Vector v = ilr(x);
    for (double a : {1e-6, -1e-6}) {
      const Vector z = alpha_transform(x, AlphaParam(a));
      EXPECT_LT((z - v).cwiseAbs().maxCoeff(), 1e-4);
    }
  }
}

TEST(AlphaTransform, ScaleInvariantThroughClosure) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Composition x = random_composition(rng, 5);
    const Composition scaled(x.parts() * 37.5);
    const Vector a = alpha_transform(x, AlphaParam(0.4));
    const Vector b = alpha_transform(scaled, AlphaParam(0.4));
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(InverseAlphaTransform, OriginMapsToUniform) {
  for (double a : {-0.7, 0.3, 1.0}) {
    const Composition c = inverse_alpha_transform(Vector::Zero(3), AlphaParam(a));
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(c[j], 0.25, 1e-15);
  }
}

TEST(InverseAlphaTransform, RoundTrips) {
  const Composition x(vec({0.7, 0.3}));
  const Composition back = inverse_alpha_transform(alpha_transform(x, AlphaParam(1.0)), AlphaParam(1.0));
  EXPECT_NEAR(back[0], 0.7, 1e-12);

  std::mt19937_64 rng(5);
  for (double a : {0.25, 0.5, 1.0, -0.5}) {
    for (int t = 0; t < 100; ++t) {
      const Composition c = random_composition(rng, 2 + t % 6);
      const Composition r = inverse_alpha_transform(alpha_transform(c, AlphaParam(a)), AlphaParam(a));
      EXPECT_LT((r.parts() - c.parts()).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
  // zero parts survive the round trip for positive alpha
  const Composition z(vec({0.6, 0.0, 0.4}));
  const Composition rz = inverse_alpha_transform(alpha_transform(z, AlphaParam(0.5)), AlphaParam(0.5));
  EXPECT_LT((rz.parts() - z.parts()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(InverseAlphaTransform, OutsideImageIsOutOfRange) {
  Vector z(1);
  z << 5.0;  // u would be (0.5 + 5/sqrt2, 0.5 - 5/sqrt2)/..., negative second part
  try {
    inverse_alpha_transform(z, AlphaParam(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OutOfRange);
  }
}

TEST(Ilr, Examples) {
  EXPECT_NEAR(ilr(Composition(vec({1, 1, 1, 1}))).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  const Vector v = ilr(Composition(vec({0.5, 0.25, 0.25})));
  EXPECT_NEAR(v[0], std::log(2.0) / std::numbers::sqrt2, 1e-12);
  EXPECT_NEAR(v[0], 0.4901, 1e-4);
  EXPECT_NEAR(v[1], std::log(2.0) / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(v[1], 0.2830, 1e-4);
  try {
    ilr(Composition(vec({0.5, 0.5, 0.0})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroPart);
  }
}

TEST(Ilr, RoundTrips) {
  const Composition x(vec({0.5, 0.25, 0.25}));
  EXPECT_LT((inverse_ilr(ilr(x)).parts() - x.parts()).cwiseAbs().maxCoeff(), 1e-9);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    Vector v(1 + t % 6);
    for (auto& e : v) e = g(rng);
    EXPECT_LT((ilr(inverse_ilr(v)) - v).cwiseAbs().maxCoeff(), 1e-9);
    const Composition c = random_composition(rng, 2 + t % 6);
    EXPECT_LT((inverse_ilr(ilr(c)).parts() - c.parts()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Alr, Examples) {
  const Vector z = alr(Composition(vec({0.5, 0.25, 0.25})), 2);
  EXPECT_NEAR(z[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(z[0], 0.6931, 1e-4);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
  EXPECT_NEAR(alr(Composition(vec({1, 1, 1})), 0).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_THROW(alr(Composition(vec({0.5, 0.5, 0.0})), 0), Error);
}

TEST(Alr, RoundTrips) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index D = 2 + t % 6;
    const Composition c = random_composition(rng, D);
    const Eigen::Index div = t % D;
    EXPECT_LT((inverse_alr(alr(c, div), div).parts() - c.parts()).cwiseAbs().maxCoeff(), 1e-9);
    const Vector z = alr(c, div);
    EXPECT_LT((alr(inverse_alr(z, div), div) - z).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(KlDivergence, Examples) {
  Matrix y(1, 2), f(1, 2);
  y << 1.0, 0.0;
  f << 0.5, 0.5;
  EXPECT_NEAR(kl_fit_divergence(y, f), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(kl_fit_divergence(y, f), 1.3863, 1e-4);
  EXPECT_EQ(kl_fit_divergence(f, f), 0.0);

  Matrix bad(1, 2);
  bad << 0.0, 1.0;
  try {
    kl_fit_divergence(y, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FittedZero);
  }
}

TEST(KlDivergence, NonNegativeAndZeroOnlyAtEquality) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index D = 2 + t % 5;
    Matrix a(3, D), b(3, D);
    for (Eigen::Index i = 0; i < 3; ++i) {
      a.row(i) = random_composition(rng, D).parts().transpose();
      b.row(i) = random_composition(rng, D).parts().transpose();
    }
    EXPECT_GE(kl_fit_divergence(a, b), 0.0);
    EXPECT_GT(kl_fit_divergence(a, b), 0.0);
    EXPECT_EQ(kl_fit_divergence(a, a), 0.0);
  }
}

TEST(CompositionBatch, ClosesRowsAndKeepsLabels) {
  Matrix m(2, 3);
  m << 2, 2, 4, 10, 30, 60;
  const CompositionBatch b(m, {"a", "b", "c"});
  EXPECT_NEAR(b.matrix()(0, 2), 0.5, 1e-15);
  EXPECT_NEAR(b.matrix()(1, 0), 0.1, 1e-15);
  EXPECT_EQ(b.labels()[1], "b");
  EXPECT_THROW(CompositionBatch(m, {"a", "b"}), Error);
  EXPECT_THROW(AlphaParam(1.5), Error);
}
