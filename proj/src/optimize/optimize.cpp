#include "firkrylov/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace firkrylov {

namespace {

constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt(5)) / 2

class IndirectProfile final : public LambdaProfile {
 public:
  IndirectProfile(std::shared_ptr<const CompositeOperator> op, Vector y, IndirectOptions options,
                  double beta)
      : op_(std::move(op)), y_(std::move(y)), options_(options), beta_(beta) {}

  PmlEvaluation eval(double lambda) const override {
    PmlEvaluation e = pml_indirect_eval(*op_, y_, lambda, options_);
    e.beta = beta_;
    return e;
  }
  std::uint64_t matvecs() const override {
    return op_->matvec_count() + op_->factor_applications();
  }

 private:
  std::shared_ptr<const CompositeOperator> op_;
  Vector y_;
  IndirectOptions options_;
  double beta_;
};

std::string format_beta(double beta) {
  std::ostringstream os;
  os.precision(6);
  os << beta;
  return os.str();
}

}  // namespace

const char* evaluator_name(EvaluatorKind kind) {
  switch (kind) {
    case EvaluatorKind::Direct: return "direct";
    case EvaluatorKind::Indirect: return "indirect";
    case EvaluatorKind::Krylov: return "krylov";
  }
  return "unknown";
}

EvaluatorKind parse_evaluator_kind(const std::string& name) {
  if (name == "direct") return EvaluatorKind::Direct;
  if (name == "indirect") return EvaluatorKind::Indirect;
  if (name == "krylov") return EvaluatorKind::Krylov;
  throw Error(ErrorCode::InvalidArgument,
              "unknown evaluator '" + name + "' (expected direct, indirect or krylov)");
}

SpectrumProfile::SpectrumProfile(PmlSpectrum spectrum,
                                 std::shared_ptr<const ResidualTraceModel> model, double beta,
                                 std::uint64_t matvecs)
    : spectrum_(std::move(spectrum)), model_(std::move(model)), beta_(beta), matvecs_(matvecs) {}

PmlEvaluation SpectrumProfile::eval(double lambda) const {
  PmlEvaluation e = pml_krylov_eval(spectrum_, model_.get(), lambda);
  e.beta = beta_;
  return e;
}

std::unique_ptr<LambdaProfile> make_profile(const SystemData& data, const KernelParams& kernel,
                                            const EvaluatorConfig& config) {
  data.validate();
  KernelFactor factor = KernelFactor::make(kernel, data.n);
  switch (config.kind) {
    case EvaluatorKind::Direct: {
      PmlSpectrum spectrum = pml_direct_precompute(data, factor, config.direct);
      return std::make_unique<SpectrumProfile>(std::move(spectrum), nullptr, kernel.beta,
                                               static_cast<std::uint64_t>(data.n));
    }
    case EvaluatorKind::Krylov: {
      const KrylovOptions& ko = config.krylov;
      CompositeOperator op(ToeplitzOperator(data.u, data.n), std::move(factor));
      KrylovPrecompute pre = pml_krylov_precompute(op, data.y, ko.n_omega, ko.k, ko.seed, ko.tau);
      std::shared_ptr<const ResidualTraceModel> model;
      if (ko.residual_correction && ko.n_psi > 0) {
        model = std::make_shared<ResidualTraceModel>(
            residual_trace_precompute(op, pre.lanczos, ko.n_psi, ko.k_quad, ko.seed));
      }
      return std::make_unique<SpectrumProfile>(std::move(pre.spectrum), std::move(model),
                                               kernel.beta, op.matvec_count());
    }
    case EvaluatorKind::Indirect: {
      auto op = std::make_shared<const CompositeOperator>(ToeplitzOperator(data.u, data.n),
                                                          std::move(factor));
      return std::make_unique<IndirectProfile>(std::move(op), data.y, config.indirect, kernel.beta);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown evaluator kind");
}

ProfileMinimum lambda_profile_min(const LambdaProfile& profile, double lo, double hi,
                                  int grid_size, double rel_tol) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && lo <= hi,
          ErrorCode::InvalidArgument, "lambda range must satisfy 0 < lo <= hi");
  require(grid_size >= 1, ErrorCode::InvalidArgument, "lambda grid needs at least one point");
  require(rel_tol > 0.0, ErrorCode::InvalidArgument, "lambda tolerance must be positive");

  ProfileMinimum out;
  const double a0 = std::log(lo);
  const double b0 = std::log(hi);
  double best_nu = 0.0;
  auto psi_at = [&](double t) {
    ++out.evaluations;
    return profile.eval(std::exp(t));
  };

  std::vector<double> ts(static_cast<size_t>(grid_size));
  std::vector<double> vals(ts.size());
  std::vector<double> nus(ts.size());
  for (int i = 0; i < grid_size; ++i) {
    const size_t si = static_cast<size_t>(i);
    ts[si] = grid_size == 1 ? a0 : a0 + (b0 - a0) * static_cast<double>(i) / (grid_size - 1);
    const PmlEvaluation e = psi_at(ts[si]);
    vals[si] = e.psi;
    nus[si] = e.nu_star;
  }
  size_t best = static_cast<size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  const double spread = *std::max_element(vals.begin(), vals.end()) - vals[best];
  const bool flat = grid_size > 1 && spread <= 1e-12 * std::max(1.0, std::abs(vals[best]));
  if (flat) best = 0;
  out.lambda_star = std::exp(ts[best]);
  out.psi_star = vals[best];
  out.nu_star = nus[best];
  if (best == 0 || best + 1 == ts.size()) {
    out.at_boundary = true;
    if (best == 0) out.lambda_star = lo;
    if (best + 1 == ts.size()) out.lambda_star = hi;
    return out;
  }

  double a = ts[best - 1];
  double b = ts[best + 1];
  double x1 = b - (1.0 - kGolden) * (b - a);
  double x2 = a + (1.0 - kGolden) * (b - a);
  PmlEvaluation e1 = psi_at(x1);
  PmlEvaluation e2 = psi_at(x2);
  double f1 = e1.psi;
  double f2 = e2.psi;
  const double width_tol = std::log1p(rel_tol);
  double best_t = ts[best];
  double best_f = vals[best];
  best_nu = nus[best];
  auto consider = [&](double t, const PmlEvaluation& e) {
    if (e.psi < best_f) {
      best_f = e.psi;
      best_nu = e.nu_star;
      best_t = t;
    }
  };
  consider(x1, e1);
  consider(x2, e2);
  while (b - a > width_tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - (1.0 - kGolden) * (b - a);
      e1 = psi_at(x1);
      f1 = e1.psi;
      consider(x1, e1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + (1.0 - kGolden) * (b - a);
      e2 = psi_at(x2);
      f2 = e2.psi;
      consider(x2, e2);
    }
  }
  out.lambda_star = std::exp(best_t);
  out.psi_star = best_f;
  out.nu_star = best_nu;
  return out;
}

SystemObjective::SystemObjective(const SystemData& data, KernelParams kernel,
                                 EvaluatorConfig config)
    : data_(data), kernel_(kernel), config_(std::move(config)) {
  data_.validate();
}

std::unique_ptr<LambdaProfile> SystemObjective::at_beta(double beta) const {
  KernelParams p = kernel_;
  p.beta = beta;
  return make_profile(data_, p, config_);
}

void SearchConfig::validate() const {
  auto check_range = [](const std::pair<double, double>& r, const char* what) {
    require(std::isfinite(r.first) && std::isfinite(r.second) && r.first > 0.0 &&
                r.first < r.second,
            ErrorCode::InvalidArgument, std::string(what) + " range must satisfy 0 < lo < hi");
  };
  check_range(beta_range, "beta");
  check_range(lambda_range, "lambda");
  require(budget >= 1, ErrorCode::InvalidArgument, "budget must be at least 1");
  require(lambda_grid_size >= 1, ErrorCode::InvalidArgument, "lambda grid size must be positive");
  require(threads >= 1, ErrorCode::InvalidArgument, "thread count must be positive");
}

SearchResult minimize_pml(const PmlObjective& objective, const SearchConfig& config) {
  config.validate();
  SearchResult result;

  auto probe = [&](double beta) {
    BetaProbe p;
    p.beta = beta;
    try {
      const auto profile = objective.at_beta(beta);
      const ProfileMinimum pm = lambda_profile_min(*profile, config.lambda_range.first,
                                                   config.lambda_range.second,
                                                   config.lambda_grid_size);
      p.lambda_star = pm.lambda_star;
      p.psi_star = pm.psi_star;
      p.nu_star = pm.nu_star;
      p.lambda_at_boundary = pm.at_boundary;
      p.matvecs = profile->matvecs();
    } catch (const Error& e) {
      throw Error(e.code(), "evaluation at beta = " + format_beta(beta) + " failed: " + e.what());
    }
    return p;
  };
  auto record = [&](const BetaProbe& p) {
    result.trace.push_back(p);
    ++result.precompute_count;
    result.matvec_total += p.matvecs;
    if (result.precompute_count == 1 || p.psi_star < result.psi_star) {
      result.psi_star = p.psi_star;
      result.beta_star = p.beta;
      result.lambda_star = p.lambda_star;
      result.nu_star = p.nu_star;
    }
  };

  double lo = std::log(config.beta_range.first);
  double hi = std::log(config.beta_range.second);
  const int coarse = std::max(1, (config.budget + 1) / 2);
  std::vector<double> grid(static_cast<size_t>(coarse));
  for (int i = 0; i < coarse; ++i)
    grid[static_cast<size_t>(i)] = coarse == 1 ? 0.5 * (lo + hi)
                                               : lo + (hi - lo) * static_cast<double>(i) / (coarse - 1);

  auto grid_beta = [&](size_t i) {
    if (coarse > 1 && i == 0) return config.beta_range.first;
    if (coarse > 1 && i + 1 == grid.size()) return config.beta_range.second;
    return std::exp(grid[i]);
  };

  std::vector<BetaProbe> coarse_results(grid.size());
  const int workers = std::min<int>(config.threads, coarse);
  if (workers <= 1) {
    for (size_t i = 0; i < grid.size(); ++i) coarse_results[i] = probe(grid_beta(i));
  } else {
    std::vector<std::exception_ptr> errors(grid.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < grid.size(); i += static_cast<size_t>(workers)) {
          try {
            coarse_results[i] = probe(grid_beta(i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (const BetaProbe& p : coarse_results) record(p);
  int remaining = config.budget - coarse;

  // Bracket (a, x, b) in log(beta) around the incumbent.
  size_t best = 0;
  for (size_t i = 1; i < coarse_results.size(); ++i)
    if (coarse_results[i].psi_star < coarse_results[best].psi_star) best = i;
  double x = grid[best];
  double fx = coarse_results[best].psi_star;
  double a = coarse == 1 ? lo : grid[best == 0 ? 0 : best - 1];
  double b = coarse == 1 ? hi : grid[std::min(best + 1, grid.size() - 1)];

  if (coarse >= 2 && remaining > 0 && (best == 0 || best + 1 == grid.size())) {
    const bool low_side = best == 0;
    const double edge = low_side ? lo - std::log(10.0)
                                 : std::min(hi + std::log(10.0), std::log(config.beta_cap));
    if ((low_side && edge < lo) || (!low_side && edge > hi)) {
      const BetaProbe p = probe(std::exp(edge));
      record(p);
      --remaining;
      result.warnings.push_back("beta optimum at the " + std::string(low_side ? "lower" : "upper") +
                                " end of the range; widened once to " + format_beta(std::exp(edge)));
      if (p.psi_star < fx) {
        a = low_side ? edge : x;
        b = low_side ? x : edge;
        x = edge;
        fx = p.psi_star;
      } else if (low_side) {
        a = edge;
      } else {
        b = edge;
      }
    }
  }

  const double min_width = 1e-6;
  while (remaining > 0 && b - a > min_width) {
    const bool right = (b - x) >= (x - a);
    const double u = right ? x + kGolden * (b - x) : x - kGolden * (x - a);
    const BetaProbe p = probe(std::exp(u));
    record(p);
    --remaining;
    if (p.psi_star < fx) {
      if (right) a = x;
      else b = x;
      x = u;
      fx = p.psi_star;
    } else {
      if (right) b = u;
      else a = u;
    }
  }

  if (!result.trace.empty()) {
    const BetaProbe* inc = nullptr;
    for (const BetaProbe& p : result.trace)
      if (p.beta == result.beta_star) inc = &p;
    if (inc != nullptr && inc->lambda_at_boundary) {
      result.warnings.push_back("lambda optimum at the edge of the lambda range");
    }
  }
  return result;
}

SearchResult minimize_pml(const SystemData& data, KernelKind kernel, const SearchConfig& config,
                          const KernelParams& secondary) {
  KernelParams params = secondary;
  params.kind = kernel;
  EvaluatorConfig ev = config.evaluator;
  ev.krylov.seed = config.seed;
  ev.indirect.seed = config.seed;
  const SystemObjective objective(data, params, ev);
  return minimize_pml(objective, config);
}

FirEstimate identify(const SystemData& data, KernelKind kernel, const SearchConfig& config,
                     SearchResult* search, const KernelParams& secondary) {
  SearchResult sr = minimize_pml(data, kernel, config, secondary);
  KernelParams params = secondary;
  params.kind = kernel;
  params.beta = sr.beta_star;
  const CompositeOperator op(ToeplitzOperator(data.u, data.n), KernelFactor::make(params, data.n));

  FirEstimate est;
  est.lambda_star = sr.lambda_star;
  est.beta_star = sr.beta_star;
  est.theta_hat = posterior_mean(op, data.y, sr.lambda_star);
  est.nu_star = sr.nu_star;
  est.sigma2_star = est.lambda_star * est.nu_star;
  if (data.theta_true) est.fit = fit_metric(est.theta_hat, *data.theta_true);
  if (search) *search = std::move(sr);
  return est;
}

}  // namespace firkrylov
