// Dense symmetric linear algebra: decomposition, eigensolver, signed parts, norms.
#include <evs/tensor.hpp>
#include <evs/errors.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using evs::Mat;

Mat random_mat(int dim, std::mt19937_64& rng, double span = 2.0) {
  std::uniform_real_distribution<double> u(-span, span);
  Mat m(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = u(rng);
  return m;
}

double max_abs(const Mat& m) {
  double v = 0.0;
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j) v = std::max(v, std::abs(m(i, j)));
  return v;
}

// Elementary symmetric invariants, computed without the eigensolver.
double trace_of(const Mat& m) {
  double t = 0.0;
  for (int i = 0; i < m.dim; ++i) t += m(i, i);
  return t;
}

double det_of(const Mat& m) {
  if (m.dim == 1) return m(0, 0);
  if (m.dim == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

}  // namespace

TEST(Tensor, SymSkewDecomposition) {
  std::mt19937_64 rng(42);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 50; ++trial) {
      Mat a = random_mat(dim, rng);
      Mat s = evs::sym_part(a);
      Mat w = evs::skw_part(a);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          EXPECT_DOUBLE_EQ(s(i, j) + w(i, j), a(i, j));
          EXPECT_DOUBLE_EQ(s(i, j), s(j, i));
          EXPECT_DOUBLE_EQ(w(i, j), -w(j, i));
        }
    }
  }
}

TEST(Tensor, EigenResidualAndOrthonormality) {
  std::mt19937_64 rng(7);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 200; ++trial) {
      Mat s = evs::sym_part(random_mat(dim, rng));
      auto eig = evs::sym_eigen(s);
      double scale = 1.0 + max_abs(s);
      // Ascending order.
      for (int k = 0; k + 1 < dim; ++k) EXPECT_LE(eig.values[k], eig.values[k + 1]);
      // Residual ||S v - lambda v|| small; vectors orthonormal.
      for (int k = 0; k < dim; ++k) {
        for (int i = 0; i < dim; ++i) {
          double sv = 0.0;
          for (int j = 0; j < dim; ++j) sv += s(i, j) * eig.vectors[k][j];
          EXPECT_NEAR(sv, eig.values[k] * eig.vectors[k][i], 1e-10 * scale);
        }
        for (int l = 0; l <= k; ++l) {
          double dot = 0.0;
          for (int j = 0; j < dim; ++j) dot += eig.vectors[k][j] * eig.vectors[l][j];
          EXPECT_NEAR(dot, k == l ? 1.0 : 0.0, 1e-10);
        }
      }
      // Invariants: sum of eigenvalues = trace, product = determinant.
      double sum = 0.0, prod = 1.0;
      for (int k = 0; k < dim; ++k) {
        sum += eig.values[k];
        prod *= eig.values[k];
      }
      EXPECT_NEAR(sum, trace_of(s), 1e-11 * scale);
      EXPECT_NEAR(prod, det_of(s), 1e-9 * scale * scale * scale);
    }
  }
}

TEST(Tensor, EigenDegenerateSpectra) {
  // Identity: all eigenvalues 1.
  auto eig = evs::sym_eigen(Mat::identity(3));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(eig.values[k], 1.0, 1e-14);
  // Rank-one projector diag-like matrix v v^T with v = (1,1,1)/sqrt 3.
  Mat p(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p(i, j) = 1.0 / 3.0;
  auto ep = evs::sym_eigen(p);
  EXPECT_NEAR(ep.values[0], 0.0, 1e-13);
  EXPECT_NEAR(ep.values[1], 0.0, 1e-13);
  EXPECT_NEAR(ep.values[2], 1.0, 1e-13);
  // Double eigenvalue diag(2,2,5).
  Mat d = Mat::zero(3);
  d(0, 0) = 2.0;
  d(1, 1) = 2.0;
  d(2, 2) = 5.0;
  auto ed = evs::sym_eigen(d);
  EXPECT_NEAR(ed.values[0], 2.0, 1e-13);
  EXPECT_NEAR(ed.values[1], 2.0, 1e-13);
  EXPECT_NEAR(ed.values[2], 5.0, 1e-13);
}

TEST(Tensor, EigenHandComputed2x2) {
  // [[2,1],[1,2]] has eigenvalues 1 and 3.
  Mat s(2);
  s(0, 0) = 2.0;
  s(0, 1) = 1.0;
  s(1, 0) = 1.0;
  s(1, 1) = 2.0;
  auto eig = evs::sym_eigen(s);
  EXPECT_NEAR(eig.values[0], 1.0, 1e-14);
  EXPECT_NEAR(eig.values[1], 3.0, 1e-14);
}

TEST(Tensor, EigenRejectsAsymmetricInput) {
  Mat a = Mat::zero(2);
  a(0, 1) = 1.0;  // strictly upper triangular: not symmetric
  EXPECT_THROW(evs::sym_eigen(a), evs::ContractError);
}

TEST(Tensor, SpectralNormKnownValues) {
  // Diagonal: norm is max |entry|.
  Mat d = Mat::zero(3);
  d(0, 0) = -4.0;
  d(1, 1) = 1.0;
  d(2, 2) = 2.0;
  EXPECT_NEAR(evs::spectral_norm(d), 4.0, 1e-12);
  // Pure shear [[0,1],[0,0]] has singular value 1.
  Mat sh = Mat::zero(2);
  sh(0, 1) = 1.0;
  EXPECT_NEAR(evs::spectral_norm(sh), 1.0, 1e-12);
  // Scaled rotation has both singular values equal to the scale.
  double c = std::cos(0.3), s = std::sin(0.3);
  Mat r(2);
  r(0, 0) = 5.0 * c;
  r(0, 1) = -5.0 * s;
  r(1, 0) = 5.0 * s;
  r(1, 1) = 5.0 * c;
  EXPECT_NEAR(evs::spectral_norm(r), 5.0, 1e-11);
}

TEST(Tensor, SpectralNormMatchesPowerIteration) {
  std::mt19937_64 rng(99);
  for (int dim = 2; dim <= 3; ++dim) {
    for (int trial = 0; trial < 40; ++trial) {
      Mat a = random_mat(dim, rng);
      // Power iteration on A^T A as an independent oracle.
      std::array<double, 3> v{1.0, 0.7, -0.3};
      double lam = 0.0;
      for (int it = 0; it < 400; ++it) {
        std::array<double, 3> av{0.0, 0.0, 0.0}, atav{0.0, 0.0, 0.0};
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) av[i] += a(i, j) * v[j];
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) atav[i] += a(j, i) * av[j];
        double nrm = 0.0;
        for (int i = 0; i < dim; ++i) nrm += atav[i] * atav[i];
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) break;
        lam = nrm;
        for (int i = 0; i < dim; ++i) v[i] = atav[i] / nrm;
      }
      EXPECT_NEAR(evs::spectral_norm(a), std::sqrt(lam), 1e-7 * (1.0 + std::sqrt(lam)));
    }
  }
}

TEST(Tensor, SignedPartsSplit) {
  std::mt19937_64 rng(1234);
  for (int dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 100; ++trial) {
      Mat s = evs::sym_part(random_mat(dim, rng));
      auto [plus, minus] = evs::sym_signed_parts(s);
      double scale = 1.0 + max_abs(s);
      // Sum reconstructs S.
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) EXPECT_NEAR(plus(i, j) + minus(i, j), s(i, j), 1e-12 * scale);
      // plus is PSD, minus is NSD.
      auto ep = evs::sym_eigen(plus);
      auto em = evs::sym_eigen(minus);
      EXPECT_GE(ep.values[0], -1e-11 * scale);
      EXPECT_LE(em.values[dim - 1], 1e-11 * scale);
    }
  }
}

TEST(Tensor, SignedPartsOfDefiniteMatrices) {
  Mat s = Mat::zero(2);
  s(0, 0) = 3.0;
  s(1, 1) = 1.0;
  auto [plus, minus] = evs::sym_signed_parts(s);
  EXPECT_NEAR(plus(0, 0), 3.0, 1e-13);
  EXPECT_NEAR(plus(1, 1), 1.0, 1e-13);
  EXPECT_NEAR(max_abs(minus), 0.0, 1e-13);
}

TEST(Tensor, TraceNormAndNegPart) {
  // diag(3,-1): trace norm 4, negative-part norm 1.
  Mat s = Mat::zero(2);
  s(0, 0) = 3.0;
  s(1, 1) = -1.0;
  EXPECT_NEAR(evs::trace_norm(s), 4.0, 1e-13);
  EXPECT_NEAR(evs::neg_part_norm(s), 1.0, 1e-13);
  // PSD matrix: trace norm equals trace, negative part vanishes.
  Mat p(2);
  p(0, 0) = 2.0;
  p(0, 1) = 1.0;
  p(1, 0) = 1.0;
  p(1, 1) = 2.0;
  EXPECT_NEAR(evs::trace_norm(p), 4.0, 1e-12);
  EXPECT_NEAR(evs::neg_part_norm(p), 0.0, 1e-13);
  // neg_part_norm uses the symmetric part of a general matrix.
  Mat g = Mat::zero(2);
  g(0, 1) = -2.0;  // sym part [[0,-1],[-1,0]] -> eigenvalues +-1
  EXPECT_NEAR(evs::neg_part_norm(g), 1.0, 1e-12);
}

TEST(Tensor, RequireFiniteRejectsNan) {
  Mat a = Mat::zero(2);
  a(1, 1) = std::nan("");
  EXPECT_FALSE(evs::finite(a));
  EXPECT_THROW(evs::require_finite(a), evs::DomainError);
}
