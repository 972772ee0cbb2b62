#pragma once

#include "firkrylov/estimate.hpp"
#include "firkrylov/linops.hpp"
#include "firkrylov/pml.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace firkrylov {

enum class EvaluatorKind { Direct, Indirect, Krylov };

const char* evaluator_name(EvaluatorKind kind);
EvaluatorKind parse_evaluator_kind(const std::string& name);

struct EvaluatorConfig {
  EvaluatorKind kind = EvaluatorKind::Krylov;
  DirectOptions direct;
  KrylovOptions krylov;
  IndirectOptions indirect;
};

/// psi(lambda) at a fixed beta. Direct and Krylov profiles do all operator
/// work at construction; the indirect profile works per lambda.
class LambdaProfile {
 public:
  virtual ~LambdaProfile() = default;
  virtual PmlEvaluation eval(double lambda) const = 0;
  /// Operator applications spent so far (construction plus evaluations).
  /// The direct evaluator reports the n factor columns it materializes.
  virtual std::uint64_t matvecs() const = 0;
};

/// Profile backed by a fixed spectrum and optional residual trace model.
class SpectrumProfile final : public LambdaProfile {
 public:
  SpectrumProfile(PmlSpectrum spectrum, std::shared_ptr<const ResidualTraceModel> model,
                  double beta, std::uint64_t matvecs);
  PmlEvaluation eval(double lambda) const override;
  std::uint64_t matvecs() const override { return matvecs_; }
  const PmlSpectrum& spectrum() const { return spectrum_; }

 private:
  PmlSpectrum spectrum_;
  std::shared_ptr<const ResidualTraceModel> model_;
  double beta_;
  std::uint64_t matvecs_;
};

/// Builds the profile of `data` at kernel parameters `kernel` with one
/// precompute.
std::unique_ptr<LambdaProfile> make_profile(const SystemData& data, const KernelParams& kernel,
                                            const EvaluatorConfig& config);

struct ProfileMinimum {
  double lambda_star = 0.0;
  double psi_star = 0.0;
  double nu_star = 0.0;
  bool at_boundary = false;
  int evaluations = 0;
};

/// Log-grid scan of psi over [lo, hi] followed by golden-section refinement
/// in log(lambda) to a relative lambda tolerance. A minimum on the grid
/// boundary is returned as is, flagged.
ProfileMinimum lambda_profile_min(const LambdaProfile& profile, double lo, double hi,
                                  int grid_size = 50, double rel_tol = 1e-3);

/// psi as a function of beta, one precompute per call.
class PmlObjective {
 public:
  virtual ~PmlObjective() = default;
  virtual std::unique_ptr<LambdaProfile> at_beta(double beta) const = 0;
};

class SystemObjective final : public PmlObjective {
 public:
  SystemObjective(const SystemData& data, KernelParams kernel, EvaluatorConfig config);
  std::unique_ptr<LambdaProfile> at_beta(double beta) const override;

 private:
  const SystemData& data_;
  KernelParams kernel_;
  EvaluatorConfig config_;
};

struct SearchConfig {
  std::pair<double, double> beta_range{1e-2, 0.99};
  std::pair<double, double> lambda_range{1e-1, 1e6};
  int budget = 40;
  int lambda_grid_size = 50;
  EvaluatorConfig evaluator;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Upper cap applied when widening the beta range.
  double beta_cap = 0.999;

  void validate() const;
};

struct BetaProbe {
  double beta = 0.0;
  double lambda_star = 0.0;
  double psi_star = 0.0;
  double nu_star = 0.0;
  bool lambda_at_boundary = false;
  std::uint64_t matvecs = 0;
};

struct SearchResult {
  double lambda_star = 0.0;
  double beta_star = 0.0;
  double psi_star = 0.0;
  double nu_star = 0.0;
  std::vector<BetaProbe> trace;  // in probe order
  int precompute_count = 0;
  std::uint64_t matvec_total = 0;
  std::vector<std::string> warnings;
};

/// Outer search over log(beta): a coarse log grid of ceil(budget / 2)
/// points, then golden-section steps around the incumbent until the budget
/// is spent. Each beta costs one precompute and one lambda profile scan.
SearchResult minimize_pml(const PmlObjective& objective, const SearchConfig& config);
SearchResult minimize_pml(const SystemData& data, KernelKind kernel, const SearchConfig& config,
                          const KernelParams& secondary = {});

/// minimize_pml followed by the posterior mean at the optimum and, when the
/// data carries a true FIR, the fit.
FirEstimate identify(const SystemData& data, KernelKind kernel, const SearchConfig& config,
                     SearchResult* search = nullptr, const KernelParams& secondary = {});

}  // namespace firkrylov
