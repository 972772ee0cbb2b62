#pragma once

#include "firkrylov/lanczos.hpp"
#include "firkrylov/linops.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace firkrylov::verify {

/// Dense reference values of the two PML ingredients.
struct DensePml {
  double quad = 0.0;   // y^T (lambda I + A)^{-1} y
  double trace = 0.0;  // Tr log(lambda I + A)
};

/// Throws NotConverged if lambda I + A is not positive definite.
DensePml dense_pml(const Matrix& A, const Vector& y, double lambda, Index max_size = 2000);

/// Haar-distributed orthogonal matrix.
Matrix random_orthogonal(Index m, std::uint64_t seed);

/// Q diag(spectrum) Q^T with a random orthogonal Q.
Matrix spd_with_spectrum(const Vector& spectrum, std::uint64_t seed);

/// Number of basis columns after the first k block iterations.
Index leading_size(const BlockLanczosResult& run, int k);

/// c^T (T_k + lambda I)^{-1} c with c = W_k^T y, i.e. y^T W_k (T_k + lambda)^{-1} W_k^T y.
double krylov_quadratic(const BlockLanczosResult& run, int k, const Vector& y, double lambda);

/// Tr log(lambda I + W_k T_k W_k^T).
double krylov_log_trace(const BlockLanczosResult& run, int k, double lambda);

struct TheoryCheckConfig {
  Index m = 200;
  std::uint64_t seed = 0;
  int k_max = 30;
  std::vector<double> lambda_list{0.1, 1.0, 10.0, 100.0};
  double kappa = 1e4;
  int k = 3;
  int n_omega = 2;
  int q = 2;
  int p = 3;
  double delta = 0.1;
  int s = 2;
  int trials = 100;
  int n_psi = 4;
  int k_quad = 25;
  double lambda = 1.0;
  double decay = 0.7;

  static TheoryCheckConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct CheckReport {
  std::string name;
  nlohmann::json parameters;
  nlohmann::json details = nlohmann::json::object();
  bool passed = true;
  std::vector<std::string> failures;

  void fail(std::string message);
  nlohmann::json to_json() const;
};

/// Relative quadratic-form error of plain Lanczos/CG on a dense SPD matrix
/// with log-spaced spectrum in [1, kappa] against 4((sqrt k - 1)/(sqrt k + 1))^{2k},
/// plus the paired augmented run (error never larger than plain).
CheckReport check_cg_bound(const TheoryCheckConfig& cfg);

/// Quadratic-form monotonicity: 0 <= err(augmented) <= err(plain), and
/// both non-increasing in k, at every lambda in lambda_list.
CheckReport check_augmentation_quadratic(const TheoryCheckConfig& cfg);

/// Tr log plain <= Tr log augmented <= Tr log exact, plus eigenvalue
/// ordering on nested random bases.
CheckReport check_trace_sandwich(const TheoryCheckConfig& cfg);

/// Augmented Krylov error against the bound with the condition number of
/// the Nystrom-preconditioned matrix, sketch taken from K_s(A, Omega).
CheckReport check_implicit_preconditioning(const TheoryCheckConfig& cfg);

/// Violation frequency of the non-augmented log-trace bound over `trials`
/// Gaussian sketches, compared with delta plus a 3-sigma binomial margin.
CheckReport check_trace_bound_quantile(const TheoryCheckConfig& cfg);

/// Violation frequency of the Gaussian Hutchinson tail bound on the
/// residual R(lambda).
CheckReport check_hutchinson_quantile(const TheoryCheckConfig& cfg);

/// Residual correction on a small system: median trace error with and
/// without correction over `trials` seeds.
CheckReport check_residual_correction(const TheoryCheckConfig& cfg);

/// Log-log slope of the RMS residual-correction error for n_psi in {1, 4, 16}.
CheckReport check_residual_scaling(const TheoryCheckConfig& cfg);

/// Names accepted by run_check.
std::vector<std::string> check_names();

/// Runs a check by name with parameters overriding the defaults.
CheckReport run_check(const std::string& name, const nlohmann::json& params);

/// Violation threshold delta + 3 sqrt(delta (1 - delta) / trials).
double quantile_threshold(double delta, int trials);

}  // namespace firkrylov::verify
