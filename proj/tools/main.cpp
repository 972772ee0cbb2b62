#include "run_config.hpp"

#include "CLI11.hpp"

#include <iostream>

using fkcli::RunConfig;

namespace {

void add_evaluator_options(CLI::App* app, RunConfig& c) {
  app->add_option("--kernel", c.kernel, "Kernel family")->check(CLI::IsMember({"tc", "dc", "ss"}));
  app->add_option("--rho", c.rho, "DC correlation parameter");
  app->add_option("--kernel-scale", c.c, "DC scale parameter");
  app->add_option("--evaluator", c.evaluator, "PML evaluator")
      ->check(CLI::IsMember({"direct", "indirect", "krylov"}));
  app->add_option("--k", c.k, "Block Lanczos iterations")->check(CLI::PositiveNumber);
  app->add_option("--n-omega", c.n_omega, "Random augmentation columns")->check(CLI::NonNegativeNumber);
  app->add_option("--n-psi", c.n_psi, "Residual-trace probes (0 disables the correction)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--k-quad", c.k_quad, "Quadrature depth of the residual correction")
      ->check(CLI::PositiveNumber);
  app->add_option("--nystrom-rank", c.nystrom_rank, "Indirect evaluator preconditioner rank")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--lsqr-tol", c.lsqr_tol, "Indirect evaluator LSQR tolerance")->check(CLI::PositiveNumber);
  app->add_option("--gh-probes", c.gh_probes, "Indirect evaluator trace probes")->check(CLI::PositiveNumber);
  app->add_option("--beta-range", c.beta_range, "lo,hi")->delimiter(',')->expected(2);
  app->add_option("--lambda-range", c.lambda_range, "lo,hi")->delimiter(',')->expected(2);
}

void add_common(CLI::App* app, RunConfig& c) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out", c.out, "Output file")->required();
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-regularized FIR identification with Krylov PML evaluation"};
  app.require_subcommand(0, 1);
  std::string manifest_path;
  std::string manifest_out;
  app.add_option("--from-manifest", manifest_path, "Rerun the configuration stored in a manifest");
  app.add_option("--manifest-out", manifest_out, "Output path overriding the manifest's");

  RunConfig gen;
  gen.command = "gen";
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic system");
  add_common(gen_cmd, gen);
  gen_cmd->add_option("--a", gen.a, "Pole of (1 - a z^-1)^-2");
  gen_cmd->add_option("--m", gen.m, "Samples");
  gen_cmd->add_option("--n", gen.n, "FIR order");
  gen_cmd->add_option("--snr", gen.snr, "Signal-to-noise power ratio, or inf");
  gen_cmd->add_flag("--snr-db", gen.snr_db, "Read --snr in decibels");

  RunConfig grid;
  grid.command = "grid";
  grid.n = 0;
  auto* grid_cmd = app.add_subcommand("grid", "Evaluate PML on a (beta, lambda) grid");
  add_common(grid_cmd, grid);
  add_evaluator_options(grid_cmd, grid);
  grid_cmd->add_option("--data", grid.data, "Signal CSV")->required();
  grid_cmd->add_option("--n", grid.n, "FIR order (default: from the sidecar)");
  grid_cmd->add_option("--grid", grid.grid, "Grid size: n or n_beta,n_lambda")->delimiter(',')->expected(1, 2);
  grid_cmd->add_flag("--deterministic", grid.deterministic, "Write zero timings");

  RunConfig ident;
  ident.command = "identify";
  ident.n = 0;
  ident.format = "json";
  auto* ident_cmd = app.add_subcommand("identify", "Minimize PML and estimate the FIR");
  add_common(ident_cmd, ident);
  add_evaluator_options(ident_cmd, ident);
  ident_cmd->add_option("--data", ident.data, "Signal CSV")->required();
  ident_cmd->add_option("--n", ident.n, "FIR order (default: from the sidecar)");
  ident_cmd->add_option("--budget", ident.budget, "Beta evaluations")->check(CLI::PositiveNumber);
  ident_cmd->add_option("--lambda-grid", ident.lambda_grid, "Lambda grid per beta")->check(CLI::PositiveNumber);

  RunConfig bench;
  bench.command = "bench";
  auto* bench_cmd = app.add_subcommand("bench", "Fit distributions over seeds and settings");
  add_common(bench_cmd, bench);
  add_evaluator_options(bench_cmd, bench);
  bench_cmd->add_option("--a", bench.a, "Pole of (1 - a z^-1)^-2");
  bench_cmd->add_option("--m", bench.m, "Samples");
  bench_cmd->add_option("--n", bench.n, "FIR order");
  bench_cmd->add_option("--seeds", bench.seeds, "Systems per setting")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--snr", bench.snr_list, "SNR values")->delimiter(',');
  bench_cmd->add_flag("--snr-db", bench.snr_db, "Read --snr in decibels");
  bench_cmd->add_option("--kernels", bench.kernel_list, "Kernel sweep")->delimiter(',');
  bench_cmd->add_option("--evaluators", bench.evaluator_list, "Evaluator sweep")->delimiter(',');
  bench_cmd->add_option("--budget", bench.budget, "Beta evaluations")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--lambda-grid", bench.lambda_grid, "Lambda grid per beta")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--deterministic", bench.deterministic, "Write zero timings");

  RunConfig verify;
  verify.command = "verify";
  verify.format = "json";
  auto* verify_cmd = app.add_subcommand("verify", "Run numerical checks of the convergence results");
  add_common(verify_cmd, verify);
  verify_cmd->add_option("--check", verify.checks, "Check name (repeatable; default all)");
  verify_cmd->add_option("--params", verify.params, "JSON object overriding check parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    bool from_manifest = false;
    if (!manifest_path.empty()) {
      if (!app.get_subcommands().empty()) {
        throw fkcli::config_error("--from-manifest cannot be combined with a subcommand");
      }
      config = fkcli::read_manifest(manifest_path);
      if (!manifest_out.empty()) config.out = manifest_out;
      from_manifest = true;
    } else if (gen_cmd->parsed()) {
      config = gen;
    } else if (grid_cmd->parsed()) {
      config = grid;
    } else if (ident_cmd->parsed()) {
      config = ident;
    } else if (bench_cmd->parsed()) {
      config = bench;
    } else if (verify_cmd->parsed()) {
      config = verify;
    } else {
      std::cerr << app.help();
      return 2;
    }
    if (config.n_psi == 0) {
      config.residual_correction = false;
      config.n_psi = 1;
    }
    if (config.command == "grid" || config.command == "identify") fkcli::prepare_input(config, from_manifest);
    if (config.command == "verify") {
      try {
        config.params = nlohmann::json::parse(config.params).dump();
      } catch (const nlohmann::json::exception& e) {
        throw fkcli::config_error(std::string("--params is not valid JSON: ") + e.what());
      }
    }
    return fkcli::run(config);
  } catch (const fkcli::CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
