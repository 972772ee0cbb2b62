#pragma once

#include "firkrylov/lanczos.hpp"
#include "firkrylov/linops.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace firkrylov {

/// Precomputed spectral data from which the profile marginal likelihood
///   psi(lambda) = log(y^T (lambda I + A)^{-1} y) + Tr log(lambda I + A) / m
/// is evaluated in O(r) per lambda:
///   quad  = leftover_mass / lambda + sum_i y_coeffs_sq[i] / (thetas[i] + lambda)
///   trace = (m - r) log(lambda) + sum_i log(thetas[i] + lambda)
struct PmlSpectrum {
  Vector thetas;       // descending, nonnegative
  Vector y_coeffs_sq;  // same length as thetas
  double leftover_mass = 0.0;
  Index m = 0;

  Index rank() const { return thetas.size(); }
};

struct PmlEvaluation {
  double psi = 0.0;
  double quad_term = 0.0;   // log of the quadratic form
  double trace_term = 0.0;  // Tr log(lambda I + A) / m
  double nu_star = 0.0;     // quadratic form / m
  double lambda = 0.0;
  double beta = std::numeric_limits<double>::quiet_NaN();
};

PmlEvaluation pml_eval_from_spectrum(const PmlSpectrum& spectrum, double lambda);

// ---------------------------------------------------------------------------
// Direct evaluator: economy SVD of Phi L.

struct DirectOptions {
  Index max_rows = 20000;
};

PmlSpectrum pml_direct_precompute(const SystemData& data, const KernelFactor& kernel,
                                  const DirectOptions& options = {});
PmlSpectrum pml_direct_precompute(const ToeplitzOperator& phi, const KernelFactor& kernel,
                                  const Vector& y, const DirectOptions& options = {});

// ---------------------------------------------------------------------------
// Krylov-augmented evaluator.

struct KrylovOptions {
  int k = 40;
  int n_omega = 1;
  int n_psi = 3;
  int k_quad = 25;
  double tau = 1e-10;
  std::uint64_t seed = 0;
  bool residual_correction = true;
};

struct KrylovPrecompute {
  PmlSpectrum spectrum;
  BlockLanczosResult lanczos;
};

/// One block Lanczos run on K_k(A, [y, Omega]) with Gaussian Omega
/// (m x n_omega, drawn from `seed`), followed by an eigendecomposition of the
/// compressed operator.
KrylovPrecompute pml_krylov_precompute(const SymmetricOperator& A, const Vector& y, int n_omega,
                                       int k, std::uint64_t seed, double tau = 1e-10);

struct GaussRule {
  Vector nodes;
  Vector weights;  // nonnegative, summing to one
};

struct ResidualProbe {
  double norm_sq = 0.0;
  GaussRule full;        // Lanczos on A started at the probe
  GaussRule compressed;  // Lanczos on W T W^T started at the same probe
};

/// Quadrature rules that estimate Tr(log(lambda I + A) - log(lambda I + W T W^T))
/// for any lambda without further operator applications.
struct ResidualTraceModel {
  std::vector<ResidualProbe> probes;
  int k_quad = 0;
};

/// Gauss rule for v^T f(A) v / |v|^2 from `depth` Lanczos steps started at v.
GaussRule lanczos_gauss_rule(const SymmetricOperator& A, const Vector& v, int depth,
                             double tau = 1e-10);

ResidualTraceModel residual_trace_precompute(const SymmetricOperator& A,
                                             const BlockLanczosResult& lanczos, int n_psi,
                                             int k_quad, std::uint64_t seed);

double residual_trace_eval(const ResidualTraceModel& model, double lambda);

/// Spectrum evaluation plus, when `model` is non-null, the residual trace
/// correction added to the trace term.
PmlEvaluation pml_krylov_eval(const PmlSpectrum& spectrum, const ResidualTraceModel* model,
                              double lambda);

/// W T W^T applied as three dense products.
class CompressedOperator final : public SymmetricOperator {
 public:
  CompressedOperator(Matrix basis, Matrix compression);
  Index size() const override { return basis_.rows(); }
  Matrix apply(const MatrixRef& X) const override;

 private:
  Matrix basis_;
  Matrix compression_;
};

// ---------------------------------------------------------------------------
// Indirect evaluator: LSQR with a randomized Nystrom preconditioner for the
// quadratic form, Girard-Hutchinson on a Mercator series for the trace.

struct IndirectOptions {
  Index nystrom_rank = 50;
  double lsqr_tol = 1e-8;
  int lsqr_maxit = 2000;
  int gh_probes = 20;
  double mercator_tol = 1e-10;
  int mercator_max_terms = 20000;
  std::uint64_t seed = 0;
};

struct IndirectDiagnostics {
  int lsqr_iterations = 0;
  int mercator_terms = 0;
  double spectral_radius = 0.0;
};

PmlEvaluation pml_indirect_eval(const CompositeOperator& A, const Vector& y, double lambda,
                                const IndirectOptions& options = {},
                                IndirectDiagnostics* diagnostics = nullptr);

}  // namespace firkrylov
