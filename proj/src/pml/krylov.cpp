#include "firkrylov/pml.hpp"
#include "firkrylov/rng.hpp"

#include <cmath>

namespace firkrylov {

KrylovPrecompute pml_krylov_precompute(const SymmetricOperator& A, const Vector& y, int n_omega,
                                       int k, std::uint64_t seed, double tau) {
  const Index m = A.size();
  require(y.size() == m, ErrorCode::DimensionMismatch, "y must have m entries");
  require(n_omega >= 0, ErrorCode::InvalidArgument, "n_omega must be non-negative");
  require_finite(y, "output signal y");
  require(y.squaredNorm() > 0.0, ErrorCode::InvalidArgument, "y is zero");

  Matrix Z(m, 1 + n_omega);
  Z.col(0) = y;
  if (n_omega > 0) {
    GaussianSampler sampler(stream_seed(seed, "omega"));
    Z.rightCols(n_omega) = sampler.matrix(m, n_omega);
  }

  KrylovPrecompute out;
  LanczosOptions options;
  options.tau = tau;
  out.lanczos = block_lanczos(A, Z, k, options);
  const SymmetricEigen eig = eig_sym(assemble_tridiagonal(out.lanczos));

  out.spectrum.m = m;
  out.spectrum.thetas = eig.values.cwiseMax(0.0);
  const Vector coeffs = eig.vectors.transpose() * (out.lanczos.basis.transpose() * y);
  out.spectrum.y_coeffs_sq = coeffs.array().square();
  out.spectrum.leftover_mass = 0.0;
  return out;
}

CompressedOperator::CompressedOperator(Matrix basis, Matrix compression)
    : basis_(std::move(basis)), compression_(std::move(compression)) {
  require(compression_.rows() == compression_.cols() && compression_.rows() == basis_.cols(),
          ErrorCode::DimensionMismatch, "compression must be square with one row per basis vector");
}

Matrix CompressedOperator::apply(const MatrixRef& X) const {
  require(X.rows() == basis_.rows(), ErrorCode::DimensionMismatch,
          "compressed operator expects m rows");
  return basis_ * (compression_ * (basis_.transpose() * X));
}

GaussRule lanczos_gauss_rule(const SymmetricOperator& A, const Vector& v, int depth, double tau) {
  require(depth >= 1, ErrorCode::InvalidArgument, "quadrature depth must be positive");
  LanczosOptions options;
  options.tau = tau;
  const BlockLanczosResult run = block_lanczos(A, v, depth, options);
  const SymmetricEigen eig = eig_sym(assemble_tridiagonal(run));
  GaussRule rule;
  rule.nodes = eig.values.cwiseMax(0.0);
  rule.weights = eig.vectors.row(0).transpose().array().square();
  return rule;
}

ResidualTraceModel residual_trace_precompute(const SymmetricOperator& A,
                                             const BlockLanczosResult& lanczos, int n_psi,
                                             int k_quad, std::uint64_t seed) {
  const Index m = A.size();
  require(n_psi >= 1, ErrorCode::InvalidArgument, "n_psi must be at least 1");
  require(k_quad >= 1, ErrorCode::InvalidArgument, "k_quad must be at least 1");
  require(lanczos.basis.rows() == m, ErrorCode::DimensionMismatch,
          "Lanczos basis does not match the operator size");

  const CompressedOperator compressed(lanczos.basis, assemble_tridiagonal(lanczos));
  GaussianSampler sampler(stream_seed(seed, "psi"));
  const Matrix probes = sampler.matrix(m, n_psi);

  ResidualTraceModel model;
  model.k_quad = k_quad;
  model.probes.reserve(static_cast<size_t>(n_psi));
  for (int i = 0; i < n_psi; ++i) {
    const Vector psi = probes.col(i);
    ResidualProbe probe;
    probe.norm_sq = psi.squaredNorm();
    probe.full = lanczos_gauss_rule(A, psi, k_quad);
    probe.compressed = lanczos_gauss_rule(compressed, psi, k_quad);
    model.probes.push_back(std::move(probe));
  }
  return model;
}

namespace {

double gauss_log(const GaussRule& rule, double lambda) {
  double sum = 0.0;
  for (Index j = 0; j < rule.nodes.size(); ++j) sum += rule.weights(j) * std::log(lambda + rule.nodes(j));
  return sum;
}

}  // namespace

double residual_trace_eval(const ResidualTraceModel& model, double lambda) {
  require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidArgument,
          "lambda must be positive and finite");
  if (model.probes.empty()) return 0.0;
  double total = 0.0;
  for (const ResidualProbe& p : model.probes)
    total += p.norm_sq * (gauss_log(p.full, lambda) - gauss_log(p.compressed, lambda));
  return total / static_cast<double>(model.probes.size());
}

PmlEvaluation pml_krylov_eval(const PmlSpectrum& spectrum, const ResidualTraceModel* model,
                              double lambda) {
  PmlEvaluation out = pml_eval_from_spectrum(spectrum, lambda);
  if (model != nullptr) {
    out.trace_term += residual_trace_eval(*model, lambda) / static_cast<double>(spectrum.m);
    out.psi = out.quad_term + out.trace_term;
  }
  return out;
}

}  // namespace firkrylov
