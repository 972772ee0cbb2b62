#ifndef FIRKRYLOV_H
#define FIRKRYLOV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FK_API __declspec(dllexport)
#else
#define FK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fk_status {
  FK_OK = 0,
  FK_ERR_INVALID_ARGUMENT = 1,
  FK_ERR_DIMENSION_MISMATCH = 2,
  FK_ERR_NON_FINITE = 3,
  FK_ERR_NOT_CONVERGED = 4,
  FK_ERR_CAPACITY_EXCEEDED = 5,
  FK_ERR_IO = 6,
  FK_ERR_INTERNAL = 7
} fk_status;

typedef enum fk_evaluator { FK_EVAL_DIRECT = 0, FK_EVAL_INDIRECT = 1, FK_EVAL_KRYLOV = 2 } fk_evaluator;

typedef enum fk_kernel { FK_KERNEL_TC = 0, FK_KERNEL_DC = 1, FK_KERNEL_SS = 2 } fk_kernel;

typedef struct fk_system fk_system;
typedef struct fk_profile fk_profile;
typedef struct fk_estimate fk_estimate;

/* Message of the last failed call on this thread; empty after success. */
FK_API const char* fk_last_error(void);
FK_API const char* fk_status_name(fk_status status);
FK_API const char* fk_version(void);

/* Strings returned through char** out-parameters are released with this. */
FK_API void fk_string_free(char* s);

/* ---- systems ---------------------------------------------------------- */

typedef struct fk_synth_spec {
  double a;
  int64_t m;
  int64_t n;
  double snr; /* linear power ratio; INFINITY for noiseless data */
  uint64_t seed;
} fk_synth_spec;

FK_API void fk_synth_spec_default(fk_synth_spec* spec);
FK_API double fk_snr_from_db(double db);

FK_API fk_status fk_system_generate(const fk_synth_spec* spec, fk_system** out);
/* theta_true may be NULL. Arrays are copied. */
FK_API fk_status fk_system_create(const double* u, const double* y, int64_t m, int64_t n,
                                  const double* theta_true, fk_system** out);
/* Reads a `u,y` CSV; the FIR order n is supplied by the caller. */
FK_API fk_status fk_system_load_csv(const char* path, int64_t n, fk_system** out);
/* comment may be NULL; otherwise it becomes a leading `# ` line. */
FK_API fk_status fk_system_save_csv(const fk_system* sys, const char* path, const char* comment);
FK_API fk_status fk_system_set_truth(fk_system* sys, const double* theta_true, int64_t n);
FK_API void fk_system_free(fk_system* sys);

typedef struct fk_system_view {
  int64_t m;
  int64_t n;
  const double* u;
  const double* y;
  const double* theta_true; /* NULL when absent */
} fk_system_view;

/* Pointers stay valid until the system is modified or freed. */
FK_API fk_status fk_system_view_get(const fk_system* sys, fk_system_view* view);

/* ---- evaluators --------------------------------------------------------- */

typedef struct fk_kernel_params {
  fk_kernel kernel;
  double beta;
  double rho; /* DC only */
  double c;   /* DC only */
} fk_kernel_params;

typedef struct fk_evaluator_config {
  fk_evaluator evaluator;
  /* krylov */
  int k;
  int n_omega;
  int n_psi;
  int k_quad;
  int residual_correction;
  /* indirect */
  int nystrom_rank;
  double lsqr_tol;
  int gh_probes;
  /* direct */
  int64_t direct_max_rows;
  uint64_t seed;
} fk_evaluator_config;

FK_API void fk_kernel_params_default(fk_kernel_params* params);
FK_API void fk_evaluator_config_default(fk_evaluator_config* config);

typedef struct fk_pml_value {
  double psi;
  double quad_term;
  double trace_term;
  double nu_star;
  double lambda;
  double beta;
} fk_pml_value;

/* One precompute at fixed kernel parameters. */
FK_API fk_status fk_profile_create(const fk_system* sys, const fk_kernel_params* kernel,
                                   const fk_evaluator_config* config, fk_profile** out);
FK_API fk_status fk_profile_eval(const fk_profile* profile, double lambda, fk_pml_value* out);
/* Operator applications spent by the profile so far. */
FK_API uint64_t fk_profile_matvecs(const fk_profile* profile);
FK_API void fk_profile_free(fk_profile* profile);

typedef struct fk_profile_min {
  double lambda_star;
  double psi_star;
  double nu_star;
  int at_boundary;
  int evaluations;
} fk_profile_min;

FK_API fk_status fk_lambda_profile_min(const fk_profile* profile, double lambda_lo, double lambda_hi,
                                       int grid_size, double rel_tol, fk_profile_min* out);

/* ---- identification ----------------------------------------------------- */

typedef struct fk_search_config {
  fk_kernel kernel;
  double rho; /* DC only */
  double c;   /* DC only */
  double beta_lo;
  double beta_hi;
  double lambda_lo;
  double lambda_hi;
  int budget;
  int lambda_grid;
  int threads;
  double beta_cap;
  uint64_t seed;
  fk_evaluator_config evaluator;
} fk_search_config;

FK_API void fk_search_config_default(fk_search_config* config);

FK_API fk_status fk_identify(const fk_system* sys, const fk_search_config* config, fk_estimate** out);
FK_API void fk_estimate_free(fk_estimate* est);

typedef struct fk_estimate_summary {
  int64_t n;
  double lambda_star;
  double beta_star;
  double psi_star;
  double nu_star;
  double sigma2_star;
  int has_fit;
  double fit;
  int precompute_count;
  uint64_t matvec_total;
  size_t probe_count;
  size_t warning_count;
} fk_estimate_summary;

typedef struct fk_beta_probe {
  double beta;
  double lambda_star;
  double psi_star;
  double nu_star;
  int lambda_at_boundary;
  uint64_t matvecs;
} fk_beta_probe;

FK_API fk_status fk_estimate_summary_get(const fk_estimate* est, fk_estimate_summary* out);
/* Valid until the estimate is freed; length is summary.n. */
FK_API const double* fk_estimate_theta(const fk_estimate* est);
FK_API fk_status fk_estimate_probe(const fk_estimate* est, size_t index, fk_beta_probe* out);
FK_API const char* fk_estimate_warning(const fk_estimate* est, size_t index);
/* Full estimate, search trace included, as a JSON document. */
FK_API fk_status fk_estimate_to_json(const fk_estimate* est, char** out);

/* ---- utilities ---------------------------------------------------------- */

FK_API fk_status fk_true_fir(double a, int64_t n, double* out);
FK_API fk_status fk_fit_metric(const double* theta_hat, const double* theta_true, int64_t n,
                               double* out);
/* Shortest round-trip decimal form; the buffer needs at least 32 bytes. */
FK_API fk_status fk_format_double(double value, char* buffer, size_t size);
FK_API uint64_t fk_hash_bytes(const char* data, size_t size);

/* ---- theory checks ------------------------------------------------------ */

/* JSON array of check names. */
FK_API fk_status fk_verify_names(char** out);
/* params_json may be NULL; the report is a JSON object with a `passed` field.
   A failed check still returns FK_OK. */
FK_API fk_status fk_verify_run(const char* name, const char* params_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
