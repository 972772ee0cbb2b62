#include "firkrylov/datagen.hpp"
#include "firkrylov/pml.hpp"
#include "firkrylov/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace firkrylov;
using oracle::rel_err;

namespace {

struct Fixture {
  Vector u, y;
  Matrix P, K, A;
};

Fixture make_system(Index m, Index n, double beta, std::uint64_t seed) {
  Fixture f;
  f.u = oracle::gaussian(m, seed);
  f.y = oracle::gaussian(m, seed + 1000);
  f.P = oracle::dense_phi(f.u, n);
  f.K = oracle::dense_tc(n, beta);
  f.A = f.P * f.K * f.P.transpose();
  return f;
}

double dense_psi(const Matrix& A, const Vector& y, double lambda) {
  const auto [q, t] = oracle::dense_quad_trace(A, y, lambda);
  return std::log(q) + t / static_cast<double>(A.rows());
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
  return v;
}

}  // namespace

TEST(Spectrum, ZeroOperatorCancels) {
  PmlSpectrum s;
  s.m = 2;
  s.leftover_mass = 4.0;
  for (double lambda : {1e-3, 0.5, 7.0, 1e4}) {
    const PmlEvaluation e = pml_eval_from_spectrum(s, lambda);
    EXPECT_NEAR(e.psi, std::log(4.0), 1e-14);
    EXPECT_NEAR(e.nu_star, 4.0 / lambda / 2.0, 1e-14 / lambda);
  }
}

TEST(Spectrum, ScalarExample) {
  PmlSpectrum s;
  s.m = 1;
  s.thetas = Vector::Ones(1);
  s.y_coeffs_sq = Vector::Ones(1);
  const PmlEvaluation e = pml_eval_from_spectrum(s, 1.0);
  EXPECT_NEAR(e.quad_term, std::log(0.5), 1e-15);
  EXPECT_NEAR(e.trace_term, std::log(2.0), 1e-15);
  EXPECT_NEAR(e.psi, 0.0, 1e-15);
}

TEST(Spectrum, RandomSpectrumMatchesDense) {
  const Index m = 50, r = 12;
  const Matrix Q = oracle::gaussian(m, m, 3).householderQr().householderQ();
  Vector theta(r);
  for (Index i = 0; i < r; ++i) theta(i) = std::pow(0.6, static_cast<double>(i)) * 10.0;
  const Matrix A = Q.leftCols(r) * theta.asDiagonal() * Q.leftCols(r).transpose();
  const Vector y = oracle::gaussian(m, 4);
  PmlSpectrum s;
  s.m = m;
  s.thetas = theta;
  s.y_coeffs_sq = (Q.leftCols(r).transpose() * y).array().square();
  s.leftover_mass = (Q.rightCols(m - r).transpose() * y).squaredNorm();
  for (double lambda : log_grid(1e-3, 1e3, 20)) {
    const auto [q, t] = oracle::dense_quad_trace(A, y, lambda);
    const PmlEvaluation e = pml_eval_from_spectrum(s, lambda);
    EXPECT_LT(rel_err(std::exp(e.quad_term), q), 1e-10);
    EXPECT_LT(rel_err(e.trace_term * m, t), 1e-10);
  }
}

TEST(Spectrum, RejectsBadLambda) {
  PmlSpectrum s;
  s.m = 1;
  s.leftover_mass = 1.0;
  EXPECT_THROW(pml_eval_from_spectrum(s, 0.0), Error);
  EXPECT_THROW(pml_eval_from_spectrum(s, -1.0), Error);
  EXPECT_THROW(pml_eval_from_spectrum(s, std::nan("")), Error);
}

TEST(Direct, ZeroInput) {
  const Vector y = oracle::gaussian(20, 1);
  const PmlSpectrum s = pml_direct_precompute(ToeplitzOperator(Vector::Zero(20), 5), KernelFactor::tc(5, 0.5), y);
  EXPECT_LE(s.thetas.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(s.leftover_mass, y.squaredNorm(), 1e-12 * y.squaredNorm());
  const PmlEvaluation e = pml_eval_from_spectrum(s, 2.0);
  EXPECT_NEAR(std::exp(e.quad_term), y.squaredNorm() / 2.0, 1e-12 * y.squaredNorm());
  EXPECT_NEAR(e.trace_term, std::log(2.0), 1e-14);
}

TEST(Direct, MatchesDenseAtM60) {
  const Fixture f = make_system(60, 15, 0.8, 7);
  const PmlSpectrum s = pml_direct_precompute(ToeplitzOperator(f.u, 15), KernelFactor::tc(15, 0.8), f.y);
  for (double lambda : {0.01, 0.3, 1.0, 20.0, 1e3}) {
    const auto [q, t] = oracle::dense_quad_trace(f.A, f.y, lambda);
    const PmlEvaluation e = pml_eval_from_spectrum(s, lambda);
    EXPECT_LT(rel_err(std::exp(e.quad_term), q), 1e-9);
    EXPECT_LT(rel_err(e.trace_term * 60.0, t), 1e-9);
    EXPECT_NEAR(e.nu_star, q / 60.0, 1e-9 * q);
  }
}

TEST(Direct, SpectrumInvariants) {
  const Fixture f = make_system(80, 20, 0.9, 8);
  const PmlSpectrum s = pml_direct_precompute(ToeplitzOperator(f.u, 20), KernelFactor::tc(20, 0.9), f.y);
  EXPECT_LE(s.y_coeffs_sq.sum() + s.leftover_mass, f.y.squaredNorm() * (1.0 + 1e-10));
  for (Index i = 1; i < s.rank(); ++i) EXPECT_LE(s.thetas(i), s.thetas(i - 1));
  EXPECT_GE(s.thetas.minCoeff(), -1e-12 * s.thetas(0));
}

TEST(Direct, RowCap) {
  SystemData d;
  d.u = oracle::gaussian(50, 1);
  d.y = oracle::gaussian(50, 2);
  d.n = 5;
  DirectOptions opts;
  opts.max_rows = 40;
  EXPECT_THROW(pml_direct_precompute(d, KernelFactor::tc(5, 0.5), opts), Error);
}

TEST(Krylov, RankOneExact) {
  const Index m = 30;
  const Vector q = oracle::gaussian(m, 5).normalized();
  const double alpha = 3.0;
  const DenseOperator A(alpha * q * q.transpose());
  const Vector y = 2.5 * q;
  const KrylovPrecompute pre = pml_krylov_precompute(A, y, 0, 4, 1);
  EXPECT_EQ(pre.lanczos.size(), 1);
  ASSERT_EQ(pre.spectrum.rank(), 1);
  EXPECT_NEAR(pre.spectrum.thetas(0), alpha, 1e-12);
  for (double lambda : {0.01, 1.0, 100.0}) {
    const PmlEvaluation e = pml_krylov_eval(pre.spectrum, nullptr, lambda);
    EXPECT_LT(rel_err(e.psi, dense_psi(A.matrix(), y, lambda)), 1e-12);
  }
}

TEST(Krylov, SaturatedLowRankMatchesDense) {
  const Index m = 40, rho = 8;
  const Matrix Q = oracle::gaussian(m, rho, 6).householderQr().householderQ() * Matrix::Identity(m, rho);
  Vector d(rho);
  for (Index i = 0; i < rho; ++i) d(i) = 1.0 + static_cast<double>(i) * 0.7;
  const Matrix M = Q * d.asDiagonal() * Q.transpose();
  const DenseOperator A(M);
  const Vector y = oracle::gaussian(m, 7);
  const int n_omega = 2, k = 4;  // k (n_omega + 1) = 12 >= rho + 1
  const KrylovPrecompute pre = pml_krylov_precompute(A, y, n_omega, k, 3);
  for (double lambda : log_grid(1e-3, 1e3, 10)) {
    const auto [q, t] = oracle::dense_quad_trace(M, y, lambda);
    const PmlEvaluation e = pml_krylov_eval(pre.spectrum, nullptr, lambda);
    EXPECT_LT(rel_err(std::exp(e.quad_term), q), 1e-8);
    EXPECT_LT(rel_err(e.trace_term * m, t), 1e-8);
  }
  EXPECT_LE(pre.spectrum.leftover_mass, 1e-20 * y.squaredNorm() + 1e-300);
}

TEST(Krylov, DeskScaleAgainstDirect) {
  const Fixture f = make_system(200, 40, 0.9, 9);
  const CompositeOperator A(ToeplitzOperator(f.u, 40), KernelFactor::tc(40, 0.9));
  const PmlSpectrum direct = pml_direct_precompute(ToeplitzOperator(f.u, 40), KernelFactor::tc(40, 0.9), f.y);
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 40, 5);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, 5);
  for (double lambda : log_grid(1e-1, 1e6, 50)) {
    const double want = pml_eval_from_spectrum(direct, lambda).psi;
    const double got = pml_krylov_eval(pre.spectrum, &model, lambda).psi;
    EXPECT_LE(std::abs(got - want), 1e-4 * std::abs(want)) << "lambda=" << lambda;
    EXPECT_LE(std::abs(got - want), 1e-3);
  }
}

TEST(Krylov, NoOperatorWorkAfterPrecompute) {
  const Fixture f = make_system(100, 20, 0.8, 10);
  const CompositeOperator A(ToeplitzOperator(f.u, 20), KernelFactor::tc(20, 0.8));
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 10, 1);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, 1);
  const std::uint64_t before = A.matvec_count();
  for (double lambda : log_grid(1e-4, 1e4, 200)) pml_krylov_eval(pre.spectrum, &model, lambda);
  EXPECT_EQ(A.matvec_count(), before);
}

TEST(Krylov, StartBlockInBasis) {
  const Fixture f = make_system(60, 15, 0.8, 11);
  const CompositeOperator A(ToeplitzOperator(f.u, 15), KernelFactor::tc(15, 0.8));
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 3, 2);
  const PmlSpectrum& s = pre.spectrum;
  EXPECT_LE(s.leftover_mass, 1e-20 * f.y.squaredNorm());
  EXPECT_NEAR(s.y_coeffs_sq.sum(), f.y.squaredNorm(), 1e-10 * f.y.squaredNorm());
}

TEST(Residual, GaussWeightsSumToOne) {
  const Fixture f = make_system(60, 15, 0.8, 12);
  const DenseOperator A(f.A);
  const GaussRule rule = lanczos_gauss_rule(A, oracle::gaussian(60, 3), 25);
  EXPECT_NEAR(rule.weights.sum(), 1.0, 1e-10);
  EXPECT_GE(rule.weights.minCoeff(), 0.0);
}

TEST(Residual, SaturatedSubspaceGivesZeroCorrection) {
  const Index m = 30, rho = 4;
  const Matrix Q = oracle::gaussian(m, rho, 13).householderQr().householderQ() * Matrix::Identity(m, rho);
  Vector d(rho);
  d << 4.0, 3.0, 2.0, 1.0;
  const DenseOperator A(Q * d.asDiagonal() * Q.transpose());
  const KrylovPrecompute pre = pml_krylov_precompute(A, oracle::gaussian(m, 14), 1, 5, 1);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, 1);
  for (const ResidualProbe& p : model.probes) {
    ASSERT_EQ(p.full.nodes.size(), p.compressed.nodes.size());
    EXPECT_LE((p.full.nodes - p.compressed.nodes).cwiseAbs().maxCoeff(), 1e-8);
  }
  for (double lambda : {0.01, 1.0, 100.0}) EXPECT_LE(std::abs(residual_trace_eval(model, lambda)), 1e-8);
}

TEST(Residual, MatchesDenseMatrixLogarithm) {
  const Fixture f = make_system(60, 15, 0.9, 15);
  const DenseOperator A(f.A);
  const std::uint64_t seed = 21;
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 3, seed);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, seed);
  const Matrix Wt = pre.lanczos.basis * assemble_tridiagonal(pre.lanczos) * pre.lanczos.basis.transpose();
  const Matrix probes = GaussianSampler(stream_seed(seed, "psi")).matrix(60, 3);
  auto logm = [](const Matrix& S, double lambda) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    const Vector l = (es.eigenvalues().array().max(0.0) + lambda).log();
    return Matrix(es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose());
  };
  for (double lambda : {0.1, 1.0, 10.0}) {
    const Matrix R = logm(f.A, lambda) - logm(Wt, lambda);
    const double want = (probes.cwiseProduct(R * probes)).sum() / 3.0;
    EXPECT_LT(rel_err(residual_trace_eval(model, lambda), want), 1e-6) << "lambda=" << lambda;
  }
}

TEST(Residual, VanishesForLargeLambda) {
  const Fixture f = make_system(60, 15, 0.9, 16);
  const DenseOperator A(f.A);
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 3, 2);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, 2);
  EXPECT_LE(std::abs(residual_trace_eval(model, 1e12)), 1e-6 * 60.0);
  ResidualTraceModel empty;
  EXPECT_EQ(residual_trace_eval(empty, 1.0), 0.0);
}

TEST(Residual, ReducesMedianTraceError) {
  std::vector<double> with, without;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Fixture f = make_system(60, 15, 0.9, 100 + seed);
    const DenseOperator A(f.A);
    const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 1, 3, seed);
    const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, seed);
    const double exact = oracle::dense_quad_trace(f.A, f.y, 1.0).second;
    without.push_back(std::abs(pml_krylov_eval(pre.spectrum, nullptr, 1.0).trace_term * 60 - exact));
    with.push_back(std::abs(pml_krylov_eval(pre.spectrum, &model, 1.0).trace_term * 60 - exact));
  }
  std::sort(with.begin(), with.end());
  std::sort(without.begin(), without.end());
  EXPECT_LE(0.5 * (with[9] + with[10]), 0.5 * (without[9] + without[10]));
}

TEST(KrylovEval, ModelAbsentEqualsSpectrumEval) {
  const Fixture f = make_system(50, 10, 0.7, 17);
  const KrylovPrecompute pre = pml_krylov_precompute(DenseOperator(f.A), f.y, 1, 3, 0);
  for (double lambda : {0.1, 1.0, 10.0}) {
    const PmlEvaluation a = pml_krylov_eval(pre.spectrum, nullptr, lambda);
    const PmlEvaluation b = pml_eval_from_spectrum(pre.spectrum, lambda);
    EXPECT_EQ(a.psi, b.psi);
    EXPECT_EQ(a.trace_term, b.trace_term);
  }
}

TEST(KrylovEval, SaturatedWithModelMatchesDense) {
  const Fixture f = make_system(40, 8, 0.8, 18);
  const DenseOperator A(f.A);
  const KrylovPrecompute pre = pml_krylov_precompute(A, f.y, 2, 6, 0);
  const ResidualTraceModel model = residual_trace_precompute(A, pre.lanczos, 3, 25, 0);
  for (double lambda : {0.05, 1.0, 30.0}) {
    EXPECT_LT(rel_err(pml_krylov_eval(pre.spectrum, &model, lambda).psi, dense_psi(f.A, f.y, lambda)), 1e-6);
  }
}

TEST(Indirect, ZeroFactor) {
  const Vector y = oracle::gaussian(30, 1);
  const CompositeOperator A(ToeplitzOperator(Vector::Zero(30), 6), KernelFactor::tc(6, 0.5));
  const PmlEvaluation e = pml_indirect_eval(A, y, 3.0, {});
  EXPECT_EQ(std::exp(e.quad_term), y.squaredNorm() / 3.0);
  EXPECT_EQ(e.trace_term, std::log(3.0));
}

TEST(Indirect, MatchesDirectAtM60) {
  const Fixture f = make_system(60, 15, 0.8, 19);
  const CompositeOperator A(ToeplitzOperator(f.u, 15), KernelFactor::tc(15, 0.8));
  const PmlSpectrum s = pml_direct_precompute(ToeplitzOperator(f.u, 15), KernelFactor::tc(15, 0.8), f.y);
  IndirectOptions opts;
  opts.gh_probes = 50;
  for (double lambda : {0.01, 1.0, 100.0}) {
    IndirectDiagnostics diag;
    const PmlEvaluation got = pml_indirect_eval(A, f.y, lambda, opts, &diag);
    const PmlEvaluation want = pml_eval_from_spectrum(s, lambda);
    EXPECT_LT(rel_err(std::exp(got.quad_term), std::exp(want.quad_term)), 1e-6);
    EXPECT_LT(rel_err(got.trace_term, want.trace_term), 1e-3);
    EXPECT_GT(diag.lsqr_iterations, 0);
  }
}

TEST(Indirect, LowRankPreconditionerStillAccurate) {
  const Fixture f = make_system(300, 60, 0.7, 20);
  const CompositeOperator A(ToeplitzOperator(f.u, 60), KernelFactor::tc(60, 0.7));
  const PmlSpectrum s = pml_direct_precompute(ToeplitzOperator(f.u, 60), KernelFactor::tc(60, 0.7), f.y);
  IndirectOptions opts;
  opts.nystrom_rank = 20;
  const PmlEvaluation got = pml_indirect_eval(A, f.y, 1.0, opts);
  const PmlEvaluation want = pml_eval_from_spectrum(s, 1.0);
  EXPECT_LT(rel_err(std::exp(got.quad_term), std::exp(want.quad_term)), 1e-6);
  EXPECT_LT(std::abs(got.trace_term - want.trace_term), 1e-2);
}

TEST(Indirect, Deterministic) {
  const Fixture f = make_system(80, 20, 0.9, 21);
  const CompositeOperator A(ToeplitzOperator(f.u, 20), KernelFactor::tc(20, 0.9));
  IndirectOptions opts;
  opts.nystrom_rank = 5;
  opts.seed = 77;
  const PmlEvaluation a = pml_indirect_eval(A, f.y, 0.5, opts);
  const PmlEvaluation b = pml_indirect_eval(A, f.y, 0.5, opts);
  EXPECT_EQ(a.psi, b.psi);
  EXPECT_EQ(a.quad_term, b.quad_term);
  EXPECT_EQ(a.trace_term, b.trace_term);
}

TEST(Indirect, RejectsBadInput) {
  const Fixture f = make_system(30, 5, 0.5, 22);
  const CompositeOperator A(ToeplitzOperator(f.u, 5), KernelFactor::tc(5, 0.5));
  EXPECT_THROW(pml_indirect_eval(A, f.y, 0.0, {}), Error);
  EXPECT_THROW(pml_indirect_eval(A, Vector::Zero(30), 1.0, {}), Error);
  EXPECT_THROW(pml_indirect_eval(A, Vector::Ones(29), 1.0, {}), Error);
}

TEST(Direct, UnderflowingKernelStaysFinite) {
  SynthSpec s;
  s.m = 2000;
  s.n = 400;
  s.seed = 16;
  s.snr = std::numeric_limits<double>::infinity();
  const SystemData d = generate(s);
  const PmlSpectrum spec = pml_direct_precompute(d, KernelFactor::tc(400, 0.0206586));
  EXPECT_TRUE(spec.thetas.allFinite());
  EXPECT_TRUE(spec.y_coeffs_sq.allFinite());
  EXPECT_TRUE(std::isfinite(pml_eval_from_spectrum(spec, 1e-6).psi));
}

TEST(FlushTiny, ZeroesOnlyNegligibleEntries) {
  Matrix X(2, 2);
  X << 1.0, 1e-40, 1e-20, -1e-300;
  const Matrix F = flush_tiny(X);
  EXPECT_EQ(F(0, 0), 1.0);
  EXPECT_EQ(F(1, 0), 1e-20);
  EXPECT_EQ(F(0, 1), 0.0);
  EXPECT_EQ(F(1, 1), 0.0);
}
