#include "firkrylov/linops.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace firkrylov;
using oracle::rel_err;

TEST(Toeplitz, WrittenOutExample) {
  Vector u(3);
  u << 2.0, 3.0, 5.0;
  Vector x(2);
  x << 7.0, 11.0;
  const ToeplitzOperator phi(u, 2);
  const Vector got = phi.apply(x);
  Vector want(3);
  want << 0.0, 2.0 * 7.0, 3.0 * 7.0 + 2.0 * 11.0;
  EXPECT_LT((got - want).norm(), 1e-13);
}

TEST(Toeplitz, ZeroInputGivesZero) {
  const ToeplitzOperator phi(oracle::gaussian(30, 1), 10);
  EXPECT_EQ(phi.apply(Matrix::Zero(10, 3)).norm(), 0.0);
  EXPECT_EQ(phi.apply_transpose(Matrix::Zero(30, 2)).norm(), 0.0);
}

TEST(Toeplitz, MatchesDenseAtM50) {
  const Vector u = oracle::gaussian(50, 2);
  const ToeplitzOperator phi(u, 20);
  const Matrix P = oracle::dense_phi(u, 20);
  const Matrix X = oracle::gaussian(20, 3, 3);
  EXPECT_LT(rel_err(phi.apply(X), P * X), 1e-12);
  const Matrix Z = oracle::gaussian(50, 2, 4);
  EXPECT_LT(rel_err(phi.apply_transpose(Z), P.transpose() * Z), 1e-12);
  EXPECT_GE(phi.fft_length(), 50 + 20 - 1);
  EXPECT_EQ(phi.fft_length() & (phi.fft_length() - 1), 0);
}

TEST(Toeplitz, FftMatchesDenseOverManySizes) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index m = 1 + static_cast<Index>(seed * 7 % 64);
    const Index n = 1 + static_cast<Index>(seed * 13 % m);
    const Vector u = oracle::gaussian(m, 100 + seed);
    const ToeplitzOperator phi(u, n);
    const Matrix P = oracle::dense_phi(u, n);
    const Vector x = oracle::gaussian(n, 200 + seed);
    const Vector z = oracle::gaussian(m, 300 + seed);
    const double scale = std::max(P.norm() * x.norm(), 1e-300);
    EXPECT_LE((phi.apply(x) - P * x).norm(), 1e-12 * scale) << "m=" << m << " n=" << n;
    EXPECT_LE((phi.apply_transpose(z) - P.transpose() * z).norm(),
              1e-12 * std::max(P.norm() * z.norm(), 1e-300));
    const double lhs = phi.apply(x).col(0).dot(z);
    const double rhs = x.dot(phi.apply_transpose(z).col(0));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(scale * z.norm(), 1e-300));
  }
}

TEST(Toeplitz, RejectsBadShapes) {
  EXPECT_THROW(ToeplitzOperator(oracle::gaussian(5, 1), 6), Error);
  EXPECT_THROW(ToeplitzOperator(oracle::gaussian(5, 1), 0), Error);
  Vector u = oracle::gaussian(5, 1);
  u(2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ToeplitzOperator(u, 2), Error);
  const ToeplitzOperator phi(oracle::gaussian(5, 1), 2);
  EXPECT_THROW(phi.apply(Matrix::Zero(3, 1)), Error);
}

TEST(Kernel, TcTwoByTwoExample) {
  const KernelFactor L = KernelFactor::tc(2, 0.5);
  const Vector ones = Vector::Ones(2);
  const Vector got = L.apply_L(L.apply_Lt(ones));
  EXPECT_NEAR(got(0), 0.75, 1e-15);
  EXPECT_NEAR(got(1), 0.5, 1e-15);
  Matrix K(2, 2);
  K << 0.5, 0.25, 0.25, 0.25;
  EXPECT_LT((oracle::dense_tc(2, 0.5) - K).norm(), 1e-15);
}

TEST(Kernel, ZeroInputGivesZero) {
  for (const KernelFactor& L : {KernelFactor::tc(10, 0.8), KernelFactor::dc(10, 0.8), KernelFactor::ss(10, 0.8)}) {
    EXPECT_EQ(L.apply_L(Matrix::Zero(10, 2)).norm(), 0.0);
    EXPECT_EQ(L.apply_Lt(Matrix::Zero(10, 2)).norm(), 0.0);
  }
}

TEST(Kernel, StructuredMatchesDenseCholesky) {
  for (KernelKind kind : {KernelKind::TC, KernelKind::DC, KernelKind::SS}) {
    for (Index n : {1, 2, 7, 30, 64}) {
      for (double beta : {0.3, 0.7, 0.9, 0.97}) {
        KernelParams p;
        p.kind = kind;
        p.beta = beta;
        const KernelFactor L = KernelFactor::make(p, n);
        const Matrix K = oracle::dense_kernel(p, n);
        const Matrix X = oracle::gaussian(n, 3, 7);
        EXPECT_LT(rel_err(L.apply_L(L.apply_Lt(X)), K * X), 1e-10)
            << kernel_name(kind) << " n=" << n << " beta=" << beta;
        Eigen::LLT<Matrix> llt(K);
        if (llt.info() == Eigen::Success && n <= 30) {
          const Matrix Lc = llt.matrixL();
          EXPECT_LT(rel_err(L.apply_L(X), Lc * X), 1e-8) << kernel_name(kind) << " n=" << n;
        }
        const Vector x = oracle::gaussian(n, 8);
        const Vector z = oracle::gaussian(n, 9);
        EXPECT_NEAR(L.apply_L(x).col(0).dot(z), x.dot(L.apply_Lt(z).col(0)),
                    1e-12 * std::max(1.0, L.apply_L(x).norm() * z.norm()));
      }
    }
  }
}

TEST(Kernel, DenseCustomMatchesItsMatrix) {
  Matrix lower = oracle::gaussian(6, 6, 5).triangularView<Eigen::Lower>();
  const KernelFactor L = KernelFactor::dense_custom(lower);
  const Matrix X = oracle::gaussian(6, 2, 6);
  EXPECT_LT(rel_err(L.apply_L(X), lower * X), 1e-14);
  EXPECT_LT(rel_err(L.apply_Lt(X), lower.transpose() * X), 1e-14);
  EXPECT_THROW(KernelFactor::dense_custom(oracle::gaussian(3, 4, 1)), Error);
}

TEST(Kernel, RejectsBadParameters) {
  EXPECT_THROW(KernelFactor::tc(5, 1.5), Error);
  EXPECT_THROW(KernelFactor::tc(5, 0.0), Error);
  EXPECT_THROW(KernelFactor::tc(0, 0.5), Error);
  EXPECT_THROW(KernelFactor::ss(5, std::numeric_limits<double>::quiet_NaN()), Error);
  EXPECT_THROW(parse_kernel_kind("xyz"), Error);
  EXPECT_EQ(parse_kernel_kind("ss"), KernelKind::SS);
}

TEST(Composite, ZeroInputSignal) {
  const CompositeOperator A(ToeplitzOperator(Vector::Zero(20), 5), KernelFactor::tc(5, 0.5));
  EXPECT_EQ(A.apply(oracle::gaussian(20, 2, 1)).norm(), 0.0);
  EXPECT_EQ(A.apply(Matrix::Zero(20, 1)).norm(), 0.0);
}

TEST(Composite, MatchesDenseAssembly) {
  const Vector u = oracle::gaussian(40, 11);
  const CompositeOperator A(ToeplitzOperator(u, 10), KernelFactor::tc(10, 0.7));
  const Matrix P = oracle::dense_phi(u, 10);
  const Matrix D = P * oracle::dense_tc(10, 0.7) * P.transpose();
  const Matrix X = oracle::gaussian(40, 2, 12);
  EXPECT_LT(rel_err(A.apply(X), D * X), 1e-10);
}

TEST(Composite, MatvecCounting) {
  const CompositeOperator A(ToeplitzOperator(oracle::gaussian(30, 1), 6), KernelFactor::dc(6, 0.8));
  EXPECT_EQ(A.matvec_count(), 0u);
  A.apply(oracle::gaussian(30, 3, 2));
  EXPECT_EQ(A.matvec_count(), 3u);
  A.apply(oracle::gaussian(30, 1, 3));
  EXPECT_EQ(A.matvec_count(), 4u);
  A.apply_factor(oracle::gaussian(6, 2, 4));
  A.apply_factor_transpose(oracle::gaussian(30, 2, 5));
  EXPECT_EQ(A.matvec_count(), 4u);
  EXPECT_EQ(A.factor_applications(), 2u);
}

TEST(Composite, DenseMaterializeIsSymmetricPsd) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index m = 20 + static_cast<Index>(seed * 4);
    const Index n = 1 + m / 5;
    const double beta = 0.3 + 0.035 * static_cast<double>(seed);
    const CompositeOperator A(ToeplitzOperator(oracle::gaussian(m, seed), n), KernelFactor::tc(n, beta));
    const Matrix D = dense_materialize(A);
    EXPECT_LE((D - D.transpose()).norm(), 1e-12 * D.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (D + D.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST(Composite, ShiftStructureWithUnitImpulse) {
  Vector u = Vector::Zero(6);
  u(1) = 1.0;
  const ToeplitzOperator phi(u, 3);
  const Matrix P = phi.apply(Matrix::Identity(3, 3));
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(P(i, j), i == j + 2 ? 1.0 : 0.0);
}

TEST(Composite, DenseMaterializeCap) {
  const CompositeOperator A(ToeplitzOperator(oracle::gaussian(30, 1), 6), KernelFactor::tc(6, 0.8));
  EXPECT_THROW(dense_materialize(A, 10), Error);
}

TEST(SystemData, Validation) {
  SystemData d;
  d.u = oracle::gaussian(10, 1);
  d.y = oracle::gaussian(10, 2);
  d.n = 4;
  EXPECT_NO_THROW(d.validate());
  d.n = 11;
  EXPECT_THROW(d.validate(), Error);
  d.n = 4;
  d.y = oracle::gaussian(9, 2);
  EXPECT_THROW(d.validate(), Error);
  d.y = oracle::gaussian(10, 2);
  d.theta_true = Vector::Zero(3);
  EXPECT_THROW(d.validate(), Error);
}
