#pragma once

#include "firkrylov/firkrylov.h"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fkcli {

/// Failure carrying the process exit code: 2 for configuration errors, 1
/// for everything else.
class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& what) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

inline CliError config_error(const std::string& what) { return CliError(2, what); }

/// Throws CliError for a non-OK status, using fk_last_error().
void check(fk_status status, const char* context);

struct SystemDeleter {
  void operator()(fk_system* s) const { fk_system_free(s); }
};
struct ProfileDeleter {
  void operator()(fk_profile* p) const { fk_profile_free(p); }
};
struct EstimateDeleter {
  void operator()(fk_estimate* e) const { fk_estimate_free(e); }
};
using SystemPtr = std::unique_ptr<fk_system, SystemDeleter>;
using ProfilePtr = std::unique_ptr<fk_profile, ProfileDeleter>;
using EstimatePtr = std::unique_ptr<fk_estimate, EstimateDeleter>;

std::string fmt(double value);
double parse_snr(const std::string& text);
std::string snr_text(double snr);

/// Fully resolved configuration of one run; serialized into the manifest.
struct RunConfig {
  std::string command;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 0;

  // gen / bench
  double a = 0.2;
  std::int64_t m = 10000;
  std::int64_t n = 2000;
  std::string snr = "10";
  bool snr_db = false;

  // grid / identify input
  std::string data;
  std::string data_hash;

  std::string kernel = "tc";
  double rho = 0.9;
  double c = 1.0;
  std::string evaluator = "krylov";
  int k = 40;
  int n_omega = 1;
  int n_psi = 3;
  int k_quad = 25;
  bool residual_correction = true;
  int nystrom_rank = 50;
  double lsqr_tol = 1e-8;
  int gh_probes = 20;

  std::vector<double> beta_range{1e-2, 0.99};
  std::vector<double> lambda_range{1e-1, 1e6};
  std::vector<int> grid{50, 50};
  int budget = 40;
  int lambda_grid = 50;
  bool deterministic = false;

  // bench
  int seeds = 20;
  std::vector<std::string> snr_list{"10"};
  std::vector<std::string> kernel_list{"tc"};
  std::vector<std::string> evaluator_list{"krylov"};

  // verify
  std::vector<std::string> checks;
  std::string params = "{}";

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  /// Linear SNR after applying the dB flag.
  double linear_snr(const std::string& text) const;
  fk_evaluator_config evaluator_config(const std::string& name) const;
  fk_kernel kernel_kind(const std::string& name) const;
};

struct Manifest {
  nlohmann::json document;
  std::string hash;
};

/// Builds the manifest of `config`; the hash covers the document without
/// its own hash field.
Manifest make_manifest(const RunConfig& config);
Manifest write_manifest(const RunConfig& config);
RunConfig read_manifest(const std::string& path);

/// Output stem: `out` without its extension.
std::string stem_of(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Worker count from FIRKRYLOV_THREADS (default 1, capped at hardware threads).
int worker_threads();

/// Resolves n from the sidecar when unset and fills data_hash; a manifest
/// replay against changed input files fails.
void prepare_input(RunConfig& config, bool from_manifest);
std::string sidecar_path(const std::string& data_path);

int run_gen(const RunConfig& config);
int run_grid(const RunConfig& config);
int run_identify(const RunConfig& config);
int run_bench(const RunConfig& config);
int run_verify(const RunConfig& config);
int run(const RunConfig& config);

}  // namespace fkcli
