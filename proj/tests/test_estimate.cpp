#include "firkrylov/estimate.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace firkrylov;
using oracle::rel_err;

namespace {

struct Case {
  Vector u, y;
  CompositeOperator op;
  Matrix P, K;
};

Case make_case(Index m, Index n, double beta, std::uint64_t seed) {
  Vector u = oracle::gaussian(m, seed);
  Vector y = oracle::gaussian(m, seed + 1);
  return {u, y, CompositeOperator(ToeplitzOperator(u, n), KernelFactor::tc(n, beta)), oracle::dense_phi(u, n),
          oracle::dense_tc(n, beta)};
}

}  // namespace

TEST(ConjugateGradient, SolvesShiftedSystem) {
  const Case c = make_case(60, 15, 0.8, 1);
  const Matrix A = c.P * c.K * c.P.transpose();
  CgReport report;
  const Vector x = conjugate_gradient(c.op, 0.5, c.y, {}, &report);
  const Vector want = (A + 0.5 * Matrix::Identity(60, 60)).ldlt().solve(c.y);
  EXPECT_LT(rel_err(x, want), 1e-9);
  EXPECT_LE(report.relative_residual, 1e-10);
  EXPECT_GT(report.iterations, 0);
}

TEST(ConjugateGradient, ZeroRightHandSide) {
  const Case c = make_case(30, 5, 0.5, 2);
  EXPECT_EQ(conjugate_gradient(c.op, 1.0, Vector::Zero(30)).norm(), 0.0);
}

TEST(ConjugateGradient, IterationCap) {
  const Case c = make_case(200, 50, 0.95, 3);
  CgOptions opts;
  opts.max_iterations = 2;
  EXPECT_THROW(conjugate_gradient(c.op, 1e-6, c.y, opts), Error);
}

TEST(PosteriorMean, ZeroOutput) {
  const Case c = make_case(40, 10, 0.7, 4);
  EXPECT_EQ(posterior_mean(c.op, Vector::Zero(40), 1.0).norm(), 0.0);
}

TEST(PosteriorMean, MatchesDenseSolve) {
  const Case c = make_case(60, 15, 0.8, 5);
  const Matrix A = c.P * c.K * c.P.transpose();
  for (double lambda : {0.01, 1.0, 50.0}) {
    const Vector want = c.K * c.P.transpose() * (A + lambda * Matrix::Identity(60, 60)).ldlt().solve(c.y);
    EXPECT_LT(rel_err(posterior_mean(c.op, c.y, lambda), want), 1e-8) << "lambda=" << lambda;
  }
}

TEST(PosteriorMean, PreconditionedFallbackAtTinyLambda) {
  const Case c = make_case(120, 30, 0.9, 8);
  const Matrix A = c.P * c.K * c.P.transpose();
  const double lambda = 1e-7;
  const Vector want = c.K * c.P.transpose() * (A + lambda * Matrix::Identity(120, 120)).ldlt().solve(c.y);
  CgOptions opts;
  opts.max_iterations = 20;
  CgReport report;
  const Vector got = posterior_mean(c.op, c.y, lambda, opts, &report);
  EXPECT_TRUE(report.preconditioned);
  EXPECT_LE(report.iterations, 20);
  EXPECT_LT(rel_err(got, want), 1e-6);
  opts.preconditioner_rank = 0;
  EXPECT_THROW(posterior_mean(c.op, c.y, lambda, opts), Error);
}

TEST(NystromPcg, ExactRankGivesFastConvergence) {
  const Case c = make_case(100, 20, 0.8, 9);
  const Matrix A = c.P * c.K * c.P.transpose();
  CgReport report;
  const Vector x = nystrom_pcg(c.op, 1e-4, c.y, 20, {}, &report);
  const Vector want = (A + 1e-4 * Matrix::Identity(100, 100)).ldlt().solve(c.y);
  EXPECT_LT(rel_err(x, want), 1e-6);
  EXPECT_LT(report.iterations, 30);
}

TEST(PosteriorMean, DecaysForLargeLambda) {
  const Case c = make_case(60, 15, 0.8, 6);
  const double bound_scale = (c.K * c.P.transpose() * c.y).norm();
  for (double lambda : {1e3, 1e6}) {
    EXPECT_LE(posterior_mean(c.op, c.y, lambda).norm(), bound_scale / lambda * (1.0 + 1e-10));
  }
}

TEST(PosteriorMean, LinearInY) {
  const Case c = make_case(50, 12, 0.85, 7);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector y1 = oracle::gaussian(50, 10 + s);
    const Vector y2 = oracle::gaussian(50, 20 + s);
    const Vector lhs = posterior_mean(c.op, 2.0 * y1 - 3.0 * y2, 0.3);
    const Vector rhs = 2.0 * posterior_mean(c.op, y1, 0.3) - 3.0 * posterior_mean(c.op, y2, 0.3);
    EXPECT_LT(rel_err(lhs, rhs), 1e-8);
  }
}

TEST(Fit, Anchors) {
  const Vector theta = oracle::gaussian(10, 1);
  EXPECT_DOUBLE_EQ(fit_metric(theta, theta), 100.0);
  EXPECT_NEAR(fit_metric(Vector::Constant(10, theta.mean()), theta), 0.0, 1e-12);
  Vector t(2), h(2);
  t << 1.0, 3.0;
  h << 1.0, 1.0;
  EXPECT_NEAR(fit_metric(h, t), 100.0 * (1.0 - 2.0 / std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(fit_metric(h, t), -41.42135623730951, 1e-12);
}

TEST(Fit, RejectsDegenerateInput) {
  EXPECT_THROW(fit_metric(Vector::Ones(3), Vector::Ones(3)), Error);
  EXPECT_THROW(fit_metric(Vector::Ones(3), Vector::Ones(4)), Error);
}
