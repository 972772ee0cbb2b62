#include "firkrylov/firkrylov.h"

#include "firkrylov/datagen.hpp"
#include "firkrylov/estimate.hpp"
#include "firkrylov/io.hpp"
#include "firkrylov/optimize.hpp"
#include "firkrylov/verify.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

using namespace firkrylov;

struct fk_system {
  SystemData data;
};

struct fk_profile {
  std::unique_ptr<LambdaProfile> profile;
  double beta = 0.0;
};

struct fk_estimate {
  FirEstimate estimate;
  SearchResult search;
};

namespace {

thread_local std::string g_last_error;

fk_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return FK_ERR_INVALID_ARGUMENT;
    case ErrorCode::DimensionMismatch: return FK_ERR_DIMENSION_MISMATCH;
    case ErrorCode::NonFinite: return FK_ERR_NON_FINITE;
    case ErrorCode::NotConverged: return FK_ERR_NOT_CONVERGED;
    case ErrorCode::CapacityExceeded: return FK_ERR_CAPACITY_EXCEEDED;
    case ErrorCode::Io: return FK_ERR_IO;
    case ErrorCode::Internal: return FK_ERR_INTERNAL;
  }
  return FK_ERR_INTERNAL;
}

template <typename F>
fk_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return FK_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return FK_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FK_ERR_CAPACITY_EXCEEDED;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FK_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return FK_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

KernelKind to_kernel(fk_kernel k) {
  switch (k) {
    case FK_KERNEL_TC: return KernelKind::TC;
    case FK_KERNEL_DC: return KernelKind::DC;
    case FK_KERNEL_SS: return KernelKind::SS;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown kernel");
}

EvaluatorConfig to_evaluator(const fk_evaluator_config& c) {
  EvaluatorConfig e;
  switch (c.evaluator) {
    case FK_EVAL_DIRECT: e.kind = EvaluatorKind::Direct; break;
    case FK_EVAL_INDIRECT: e.kind = EvaluatorKind::Indirect; break;
    case FK_EVAL_KRYLOV: e.kind = EvaluatorKind::Krylov; break;
    default: throw Error(ErrorCode::InvalidArgument, "unknown evaluator");
  }
  e.krylov.k = c.k;
  e.krylov.n_omega = c.n_omega;
  e.krylov.n_psi = c.n_psi;
  e.krylov.k_quad = c.k_quad;
  e.krylov.residual_correction = c.residual_correction != 0;
  e.krylov.seed = c.seed;
  e.indirect.nystrom_rank = c.nystrom_rank;
  e.indirect.lsqr_tol = c.lsqr_tol;
  e.indirect.gh_probes = c.gh_probes;
  e.indirect.seed = c.seed;
  e.direct.max_rows = c.direct_max_rows;
  return e;
}

Vector copy_vector(const double* p, int64_t n) {
  return Eigen::Map<const Vector>(p, static_cast<Index>(n));
}

}  // namespace

extern "C" {

const char* fk_last_error(void) { return g_last_error.c_str(); }

const char* fk_status_name(fk_status status) {
  switch (status) {
    case FK_OK: return "ok";
    case FK_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FK_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case FK_ERR_NON_FINITE: return "non_finite";
    case FK_ERR_NOT_CONVERGED: return "not_converged";
    case FK_ERR_CAPACITY_EXCEEDED: return "capacity_exceeded";
    case FK_ERR_IO: return "io";
    case FK_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* fk_version(void) { return "0.1.0"; }

void fk_string_free(char* s) { std::free(s); }

void fk_synth_spec_default(fk_synth_spec* spec) {
  if (!spec) return;
  const SynthSpec d;
  spec->a = d.a;
  spec->m = d.m;
  spec->n = d.n;
  spec->snr = d.snr;
  spec->seed = d.seed;
}

double fk_snr_from_db(double db) { return snr_from_db(db); }

fk_status fk_system_generate(const fk_synth_spec* spec, fk_system** out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    SynthSpec s;
    s.a = spec->a;
    s.m = spec->m;
    s.n = spec->n;
    s.snr = spec->snr;
    s.seed = spec->seed;
    auto sys = std::make_unique<fk_system>();
    sys->data = generate(s);
    *out = sys.release();
  });
}

fk_status fk_system_create(const double* u, const double* y, int64_t m, int64_t n,
                           const double* theta_true, fk_system** out) {
  return guarded([&] {
    need(u, "u");
    need(y, "y");
    need(out, "out");
    require(m >= 1, ErrorCode::InvalidArgument, "m must be positive");
    auto sys = std::make_unique<fk_system>();
    sys->data.u = copy_vector(u, m);
    sys->data.y = copy_vector(y, m);
    sys->data.n = n;
    if (theta_true) sys->data.theta_true = copy_vector(theta_true, n);
    sys->data.validate();
    *out = sys.release();
  });
}

fk_status fk_system_load_csv(const char* path, int64_t n, fk_system** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto sys = std::make_unique<fk_system>();
    read_signal_csv(path, sys->data.u, sys->data.y);
    sys->data.n = n;
    sys->data.validate();
    *out = sys.release();
  });
}

fk_status fk_system_save_csv(const fk_system* sys, const char* path, const char* comment) {
  return guarded([&] {
    need(sys, "system");
    need(path, "path");
    write_signal_csv(path, sys->data.u, sys->data.y, comment ? comment : "");
  });
}

fk_status fk_system_set_truth(fk_system* sys, const double* theta_true, int64_t n) {
  return guarded([&] {
    need(sys, "system");
    if (!theta_true) {
      sys->data.theta_true.reset();
      return;
    }
    require(n == sys->data.n, ErrorCode::DimensionMismatch, "theta_true must have n entries");
    Vector t = copy_vector(theta_true, n);
    require_finite(t, "theta_true");
    sys->data.theta_true = std::move(t);
  });
}

void fk_system_free(fk_system* sys) { delete sys; }

fk_status fk_system_view_get(const fk_system* sys, fk_system_view* view) {
  return guarded([&] {
    need(sys, "system");
    need(view, "view");
    view->m = sys->data.m();
    view->n = sys->data.n;
    view->u = sys->data.u.data();
    view->y = sys->data.y.data();
    view->theta_true = sys->data.theta_true ? sys->data.theta_true->data() : nullptr;
  });
}

void fk_kernel_params_default(fk_kernel_params* params) {
  if (!params) return;
  const KernelParams d;
  params->kernel = FK_KERNEL_TC;
  params->beta = d.beta;
  params->rho = d.rho;
  params->c = d.c;
}

void fk_evaluator_config_default(fk_evaluator_config* config) {
  if (!config) return;
  const EvaluatorConfig d;
  config->evaluator = FK_EVAL_KRYLOV;
  config->k = d.krylov.k;
  config->n_omega = d.krylov.n_omega;
  config->n_psi = d.krylov.n_psi;
  config->k_quad = d.krylov.k_quad;
  config->residual_correction = d.krylov.residual_correction ? 1 : 0;
  config->nystrom_rank = static_cast<int>(d.indirect.nystrom_rank);
  config->lsqr_tol = d.indirect.lsqr_tol;
  config->gh_probes = d.indirect.gh_probes;
  config->direct_max_rows = d.direct.max_rows;
  config->seed = 0;
}

fk_status fk_profile_create(const fk_system* sys, const fk_kernel_params* kernel,
                            const fk_evaluator_config* config, fk_profile** out) {
  return guarded([&] {
    need(sys, "system");
    need(kernel, "kernel");
    need(config, "config");
    need(out, "out");
    KernelParams kp;
    kp.kind = to_kernel(kernel->kernel);
    kp.beta = kernel->beta;
    kp.rho = kernel->rho;
    kp.c = kernel->c;
    auto p = std::make_unique<fk_profile>();
    p->profile = make_profile(sys->data, kp, to_evaluator(*config));
    p->beta = kernel->beta;
    *out = p.release();
  });
}

fk_status fk_profile_eval(const fk_profile* profile, double lambda, fk_pml_value* out) {
  return guarded([&] {
    need(profile, "profile");
    need(out, "out");
    const PmlEvaluation e = profile->profile->eval(lambda);
    out->psi = e.psi;
    out->quad_term = e.quad_term;
    out->trace_term = e.trace_term;
    out->nu_star = e.nu_star;
    out->lambda = e.lambda;
    out->beta = profile->beta;
  });
}

uint64_t fk_profile_matvecs(const fk_profile* profile) {
  return profile ? profile->profile->matvecs() : 0;
}

void fk_profile_free(fk_profile* profile) { delete profile; }

fk_status fk_lambda_profile_min(const fk_profile* profile, double lambda_lo, double lambda_hi,
                                int grid_size, double rel_tol, fk_profile_min* out) {
  return guarded([&] {
    need(profile, "profile");
    need(out, "out");
    const ProfileMinimum pm =
        lambda_profile_min(*profile->profile, lambda_lo, lambda_hi, grid_size, rel_tol);
    out->lambda_star = pm.lambda_star;
    out->psi_star = pm.psi_star;
    out->nu_star = pm.nu_star;
    out->at_boundary = pm.at_boundary ? 1 : 0;
    out->evaluations = pm.evaluations;
  });
}

void fk_search_config_default(fk_search_config* config) {
  if (!config) return;
  const SearchConfig d;
  const KernelParams k;
  config->kernel = FK_KERNEL_TC;
  config->rho = k.rho;
  config->c = k.c;
  config->beta_lo = d.beta_range.first;
  config->beta_hi = d.beta_range.second;
  config->lambda_lo = d.lambda_range.first;
  config->lambda_hi = d.lambda_range.second;
  config->budget = d.budget;
  config->lambda_grid = d.lambda_grid_size;
  config->threads = d.threads;
  config->beta_cap = d.beta_cap;
  config->seed = d.seed;
  fk_evaluator_config_default(&config->evaluator);
}

fk_status fk_identify(const fk_system* sys, const fk_search_config* config, fk_estimate** out) {
  return guarded([&] {
    need(sys, "system");
    need(config, "config");
    need(out, "out");
    SearchConfig sc;
    sc.beta_range = {config->beta_lo, config->beta_hi};
    sc.lambda_range = {config->lambda_lo, config->lambda_hi};
    sc.budget = config->budget;
    sc.lambda_grid_size = config->lambda_grid;
    sc.threads = config->threads;
    sc.beta_cap = config->beta_cap;
    sc.seed = config->seed;
    sc.evaluator = to_evaluator(config->evaluator);
    KernelParams secondary;
    secondary.kind = to_kernel(config->kernel);
    secondary.rho = config->rho;
    secondary.c = config->c;
    auto est = std::make_unique<fk_estimate>();
    est->estimate = identify(sys->data, secondary.kind, sc, &est->search, secondary);
    *out = est.release();
  });
}

void fk_estimate_free(fk_estimate* est) { delete est; }

fk_status fk_estimate_summary_get(const fk_estimate* est, fk_estimate_summary* out) {
  return guarded([&] {
    need(est, "estimate");
    need(out, "out");
    const FirEstimate& e = est->estimate;
    out->n = e.theta_hat.size();
    out->lambda_star = e.lambda_star;
    out->beta_star = e.beta_star;
    out->psi_star = est->search.psi_star;
    out->nu_star = e.nu_star;
    out->sigma2_star = e.sigma2_star;
    out->has_fit = e.fit.has_value() ? 1 : 0;
    out->fit = e.fit.value_or(std::nan(""));
    out->precompute_count = est->search.precompute_count;
    out->matvec_total = est->search.matvec_total;
    out->probe_count = est->search.trace.size();
    out->warning_count = est->search.warnings.size();
  });
}

const double* fk_estimate_theta(const fk_estimate* est) {
  return est ? est->estimate.theta_hat.data() : nullptr;
}

fk_status fk_estimate_probe(const fk_estimate* est, size_t index, fk_beta_probe* out) {
  return guarded([&] {
    need(est, "estimate");
    need(out, "out");
    require(index < est->search.trace.size(), ErrorCode::InvalidArgument, "probe index out of range");
    const BetaProbe& p = est->search.trace[index];
    out->beta = p.beta;
    out->lambda_star = p.lambda_star;
    out->psi_star = p.psi_star;
    out->nu_star = p.nu_star;
    out->lambda_at_boundary = p.lambda_at_boundary ? 1 : 0;
    out->matvecs = p.matvecs;
  });
}

const char* fk_estimate_warning(const fk_estimate* est, size_t index) {
  if (!est || index >= est->search.warnings.size()) return nullptr;
  return est->search.warnings[index].c_str();
}

fk_status fk_estimate_to_json(const fk_estimate* est, char** out) {
  return guarded([&] {
    need(est, "estimate");
    need(out, "out");
    const FirEstimate& e = est->estimate;
    const SearchResult& s = est->search;
    nlohmann::json j;
    j["lambda_star"] = e.lambda_star;
    j["beta_star"] = e.beta_star;
    j["psi_star"] = s.psi_star;
    j["nu_star"] = e.nu_star;
    j["sigma2_star"] = e.sigma2_star;
    j["fit"] = e.fit ? nlohmann::json(*e.fit) : nlohmann::json(nullptr);
    j["precompute_count"] = s.precompute_count;
    j["matvec_total"] = s.matvec_total;
    j["theta_hat"] = std::vector<double>(e.theta_hat.data(), e.theta_hat.data() + e.theta_hat.size());
    nlohmann::json trace = nlohmann::json::array();
    for (const BetaProbe& p : s.trace) {
      trace.push_back({{"beta", p.beta}, {"lambda_star", p.lambda_star}, {"psi_star", p.psi_star},
                       {"nu_star", p.nu_star}, {"lambda_at_boundary", p.lambda_at_boundary},
                       {"matvecs", p.matvecs}});
    }
    j["search_trace"] = trace;
    j["warnings"] = s.warnings;
    *out = copy_string(j.dump(2));
  });
}

fk_status fk_true_fir(double a, int64_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    require(n >= 1, ErrorCode::InvalidArgument, "n must be positive");
    const Vector h = true_fir(a, n);
    std::memcpy(out, h.data(), sizeof(double) * static_cast<size_t>(n));
  });
}

fk_status fk_fit_metric(const double* theta_hat, const double* theta_true, int64_t n, double* out) {
  return guarded([&] {
    need(theta_hat, "theta_hat");
    need(theta_true, "theta_true");
    need(out, "out");
    require(n >= 1, ErrorCode::InvalidArgument, "n must be positive");
    *out = fit_metric(copy_vector(theta_hat, n), copy_vector(theta_true, n));
  });
}

fk_status fk_format_double(double value, char* buffer, size_t size) {
  return guarded([&] {
    need(buffer, "buffer");
    const std::string s = format_double(value);
    require(s.size() + 1 <= size, ErrorCode::CapacityExceeded, "buffer too small");
    std::memcpy(buffer, s.c_str(), s.size() + 1);
  });
}

uint64_t fk_hash_bytes(const char* data, size_t size) {
  return fnv1a64(std::string_view(data ? data : "", data ? size : 0));
}

fk_status fk_verify_names(char** out) {
  return guarded([&] {
    need(out, "out");
    *out = copy_string(nlohmann::json(verify::check_names()).dump());
  });
}

fk_status fk_verify_run(const char* name, const char* params_json, char** report_json) {
  return guarded([&] {
    need(name, "name");
    need(report_json, "report_json");
    nlohmann::json params = nlohmann::json::object();
    if (params_json && *params_json) {
      params = nlohmann::json::parse(params_json);
    }
    *report_json = copy_string(verify::run_check(name, params).to_json().dump(2));
  });
}

}  // extern "C"
