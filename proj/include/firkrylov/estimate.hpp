#pragma once

#include "firkrylov/linops.hpp"

#include <optional>

namespace firkrylov {

struct FirEstimate {
  Vector theta_hat;
  double nu_star = 0.0;
  double sigma2_star = 0.0;  // lambda_star * nu_star
  double lambda_star = 0.0;
  double beta_star = 0.0;
  std::optional<double> fit;
};

struct CgOptions {
  double tol = 1e-10;  // relative residual
  int max_iterations = 5000;
  /// Sketch size of the Nystrom preconditioner used by posterior_mean when
  /// plain CG reaches the iteration cap; 0 disables the fallback.
  Index preconditioner_rank = 400;
  std::uint64_t seed = 0;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool preconditioned = false;
};

/// Solves (shift I + A) x = b by conjugate gradients. Throws NotConverged
/// with the final residual if the iteration cap is reached.
Vector conjugate_gradient(const SymmetricOperator& A, double shift, const Vector& b,
                          const CgOptions& options = {}, CgReport* report = nullptr);

/// Preconditioned CG with M^{-1} = (s + shift) U (D + shift)^{-1} U^T + (I - U U^T),
/// where A ~ U D U^T is a randomized Nystrom approximation of rank `rank`
/// and s is its smallest retained eigenvalue.
Vector nystrom_pcg(const SymmetricOperator& A, double shift, const Vector& b, Index rank,
                   const CgOptions& options = {}, CgReport* report = nullptr);

/// theta_hat = K Phi^T (lambda I + A)^{-1} y. Falls back to nystrom_pcg
/// with rank min(n, options.preconditioner_rank) if plain CG hits the cap.
Vector posterior_mean(const CompositeOperator& A, const Vector& y, double lambda,
                      const CgOptions& options = {}, CgReport* report = nullptr);

/// 100 (1 - |theta_hat - theta| / |theta - mean(theta)|).
double fit_metric(const Vector& theta_hat, const Vector& theta_true);

}  // namespace firkrylov
