#include "run_config.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

namespace fkcli {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
}

// Runs body(i) for i in [0, count) on up to `threads` workers; the first
// exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> log_space(const std::vector<double>& range, int count) {
  if (range.size() != 2 || !(range[0] > 0.0) || !(range[0] < range[1]) || !std::isfinite(range[1])) {
    throw config_error("ranges must be two numbers with 0 < lo < hi");
  }
  if (count < 1) throw config_error("grid sizes must be positive");
  std::vector<double> v(count);
  const double a = std::log(range[0]);
  const double b = std::log(range[1]);
  for (int i = 0; i < count; ++i) {
    v[i] = count == 1 ? range[0] : std::exp(a + (b - a) * i / (count - 1));
  }
  v.front() = range[0];
  if (count > 1) v.back() = range[1];
  return v;
}

std::string join_json_array(const std::vector<double>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += fmt(values[i]);
  }
  return s + "]";
}

SystemPtr load_system(const RunConfig& config) {
  fk_system* raw = nullptr;
  check(fk_system_load_csv(config.data.c_str(), config.n, &raw), "load data");
  SystemPtr sys(raw);
  std::ifstream probe(sidecar_path(config.data));
  if (probe) {
    const nlohmann::json side = nlohmann::json::parse(read_file(sidecar_path(config.data)));
    if (side.contains("theta_true") && side.at("theta_true").is_array() &&
        static_cast<std::int64_t>(side.at("theta_true").size()) == config.n) {
      const auto theta = side.at("theta_true").get<std::vector<double>>();
      check(fk_system_set_truth(sys.get(), theta.data(), config.n), "load truth");
    }
  }
  return sys;
}

fk_search_config search_config(const RunConfig& config, const std::string& kernel,
                               const std::string& evaluator, std::uint64_t seed, int threads) {
  if (config.beta_range.size() != 2 || config.lambda_range.size() != 2) {
    throw config_error("ranges must have two entries");
  }
  fk_search_config sc;
  fk_search_config_default(&sc);
  sc.kernel = config.kernel_kind(kernel);
  sc.rho = config.rho;
  sc.c = config.c;
  sc.beta_lo = config.beta_range[0];
  sc.beta_hi = config.beta_range[1];
  sc.lambda_lo = config.lambda_range[0];
  sc.lambda_hi = config.lambda_range[1];
  sc.budget = config.budget;
  sc.lambda_grid = config.lambda_grid;
  sc.threads = threads;
  sc.seed = seed;
  sc.evaluator = config.evaluator_config(evaluator);
  return sc;
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

int run_gen(const RunConfig& config) {
  fk_synth_spec spec;
  fk_synth_spec_default(&spec);
  spec.a = config.a;
  spec.m = config.m;
  spec.n = config.n;
  spec.snr = config.linear_snr(config.snr);
  spec.seed = config.seed;
  fk_system* raw = nullptr;
  check(fk_system_generate(&spec, &raw), "generate");
  SystemPtr sys(raw);

  const Manifest manifest = write_manifest(config);
  check(fk_system_save_csv(sys.get(), config.out.c_str(), ("manifest " + manifest.hash).c_str()),
        "write data");
  fk_system_view view;
  check(fk_system_view_get(sys.get(), &view), "view");
  std::vector<double> theta(view.theta_true, view.theta_true + view.n);

  // Built by hand so the doubles use the same shortest form as the CSV.
  std::string side = "{\n";
  side += "  \"manifest_hash\": \"" + manifest.hash + "\",\n";
  side += "  \"spec\": {\"a\": " + fmt(spec.a) + ", \"m\": " + std::to_string(spec.m) +
          ", \"n\": " + std::to_string(spec.n) + ", \"snr\": \"" + snr_text(spec.snr) +
          "\", \"seed\": " + std::to_string(spec.seed) + "},\n";
  side += std::string("  \"noiseless\": ") + (std::isinf(spec.snr) ? "true" : "false") + ",\n";
  side += "  \"theta_true\": " + join_json_array(theta) + "\n}\n";
  write_file(sidecar_path(config.out), side);
  std::cout << "wrote " << config.out << " (m=" << view.m << ", n=" << view.n
            << ", snr=" << snr_text(spec.snr) << ")\n";
  return 0;
}

int run_grid(const RunConfig& config) {
  if (config.grid.empty() || config.grid.size() > 2) throw config_error("--grid takes one or two sizes");
  const int nb = config.grid[0];
  const int nl = config.grid.size() == 2 ? config.grid[1] : config.grid[0];
  const std::vector<double> betas = log_space(config.beta_range, nb);
  const std::vector<double> lambdas = log_space(config.lambda_range, nl);
  const fk_evaluator_config ev = config.evaluator_config(config.evaluator);
  const fk_kernel kernel = config.kernel_kind(config.kernel);
  const SystemPtr sys = load_system(config);

  struct Row {
    fk_pml_value value;
    std::uint64_t matvecs;
    std::int64_t elapsed_us;
  };
  std::vector<std::vector<Row>> rows(betas.size());
  parallel_for(betas.size(), worker_threads(), [&](std::size_t b) {
    fk_kernel_params kp;
    fk_kernel_params_default(&kp);
    kp.kernel = kernel;
    kp.beta = betas[b];
    kp.rho = config.rho;
    kp.c = config.c;
    auto t0 = Clock::now();
    fk_profile* raw = nullptr;
    check(fk_profile_create(sys.get(), &kp, &ev, &raw), "precompute");
    ProfilePtr profile(raw);
    std::int64_t carry = micros_since(t0);
    rows[b].resize(lambdas.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      t0 = Clock::now();
      Row& r = rows[b][l];
      check(fk_profile_eval(profile.get(), lambdas[l], &r.value), "evaluate");
      r.elapsed_us = config.deterministic ? 0 : carry + micros_since(t0);
      carry = 0;
      r.matvecs = fk_profile_matvecs(profile.get());
    }
  });

  struct Minimum {
    double beta, lambda, psi, nu;
  };
  std::vector<Minimum> minima;
  Minimum best{0, 0, std::numeric_limits<double>::infinity(), 0};
  for (std::size_t b = 0; b < betas.size(); ++b) {
    Minimum m{betas[b], 0, std::numeric_limits<double>::infinity(), 0};
    for (const Row& r : rows[b]) {
      if (r.value.psi < m.psi) m = {betas[b], r.value.lambda, r.value.psi, r.value.nu_star};
    }
    minima.push_back(m);
    if (m.psi < best.psi) best = m;
  }

  const Manifest manifest = write_manifest(config);
  if (config.format == "csv") {
    std::string out = "# manifest " + manifest.hash + "\n";
    out += "beta,lambda,psi,quad_term,trace_term,nu_star,matvecs,elapsed_us\n";
    for (std::size_t b = 0; b < betas.size(); ++b) {
      for (const Row& r : rows[b]) {
        out += fmt(betas[b]) + ',' + fmt(r.value.lambda) + ',' + fmt(r.value.psi) + ',' +
               fmt(r.value.quad_term) + ',' + fmt(r.value.trace_term) + ',' + fmt(r.value.nu_star) +
               ',' + std::to_string(r.matvecs) + ',' + std::to_string(r.elapsed_us) + '\n';
      }
    }
    write_file(config.out, out);
    std::string mins = "# manifest " + manifest.hash + "\nbeta,lambda_star,psi_star,nu_star,global\n";
    for (const Minimum& m : minima) {
      mins += fmt(m.beta) + ',' + fmt(m.lambda) + ',' + fmt(m.psi) + ',' + fmt(m.nu) + ',' +
              (m.beta == best.beta ? "1" : "0") + '\n';
    }
    write_file(stem_of(config.out) + "_minima.csv", mins);
  } else {
    nlohmann::json j;
    j["manifest_hash"] = manifest.hash;
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t b = 0; b < betas.size(); ++b) {
      for (const Row& r : rows[b]) {
        arr.push_back({{"beta", betas[b]}, {"lambda", r.value.lambda}, {"psi", r.value.psi},
                       {"quad_term", r.value.quad_term}, {"trace_term", r.value.trace_term},
                       {"nu_star", r.value.nu_star}, {"matvecs", r.matvecs},
                       {"elapsed_us", r.elapsed_us}});
      }
    }
    j["rows"] = arr;
    nlohmann::json mins = nlohmann::json::array();
    for (const Minimum& m : minima) {
      mins.push_back({{"beta", m.beta}, {"lambda_star", m.lambda}, {"psi_star", m.psi}, {"nu_star", m.nu}});
    }
    j["minima"] = mins;
    j["global"] = {{"beta", best.beta}, {"lambda", best.lambda}, {"psi", best.psi}, {"nu_star", best.nu}};
    write_file(config.out, j.dump(2) + "\n");
  }
  std::cout << "grid minimum psi=" << fmt(best.psi) << " at beta=" << fmt(best.beta)
            << " lambda=" << fmt(best.lambda) << "\n";
  return 0;
}

int run_identify(const RunConfig& config) {
  const SystemPtr sys = load_system(config);
  const fk_search_config sc = search_config(config, config.kernel, config.evaluator, config.seed,
                                            worker_threads());
  fk_estimate* raw = nullptr;
  check(fk_identify(sys.get(), &sc, &raw), "identify");
  const EstimatePtr est(raw);
  fk_estimate_summary summary;
  check(fk_estimate_summary_get(est.get(), &summary), "summary");

  const Manifest manifest = write_manifest(config);
  if (config.format == "json") {
    char* text = nullptr;
    check(fk_estimate_to_json(est.get(), &text), "serialize");
    nlohmann::json j = nlohmann::json::parse(text);
    fk_string_free(text);
    j["manifest_hash"] = manifest.hash;
    write_file(config.out, j.dump(2) + "\n");
  } else {
    const double* theta = fk_estimate_theta(est.get());
    std::string out = "# manifest " + manifest.hash + "\nindex,theta_hat\n";
    for (std::int64_t i = 0; i < summary.n; ++i) out += std::to_string(i) + ',' + fmt(theta[i]) + '\n';
    write_file(config.out, out);
    std::string trace = "# manifest " + manifest.hash +
                        "\nbeta,lambda_star,psi_star,nu_star,lambda_at_boundary,matvecs\n";
    for (std::size_t i = 0; i < summary.probe_count; ++i) {
      fk_beta_probe p;
      check(fk_estimate_probe(est.get(), i, &p), "probe");
      trace += fmt(p.beta) + ',' + fmt(p.lambda_star) + ',' + fmt(p.psi_star) + ',' + fmt(p.nu_star) +
               ',' + std::to_string(p.lambda_at_boundary) + ',' + std::to_string(p.matvecs) + '\n';
    }
    write_file(stem_of(config.out) + "_search.csv", trace);
  }
  std::cout << "lambda*=" << fmt(summary.lambda_star) << " beta*=" << fmt(summary.beta_star)
            << " psi*=" << fmt(summary.psi_star);
  if (summary.has_fit) std::cout << " fit=" << fmt(summary.fit);
  std::cout << "\n";
  for (std::size_t i = 0; i < summary.warning_count; ++i) {
    std::cerr << "warning: " << fk_estimate_warning(est.get(), i) << "\n";
  }
  return 0;
}

int run_bench(const RunConfig& config) {
  if (config.seeds < 1) throw config_error("--seeds must be positive");
  struct Setting {
    std::string snr;
    std::string kernel;
    std::string evaluator;
  };
  std::vector<Setting> settings;
  for (const auto& s : config.snr_list)
    for (const auto& k : config.kernel_list)
      for (const auto& e : config.evaluator_list) {
        config.linear_snr(s);
        config.kernel_kind(k);
        config.evaluator_config(e);
        settings.push_back({s, k, e});
      }
  if (settings.empty()) throw config_error("bench needs at least one snr, kernel and evaluator");

  struct RunRow {
    double fit = 0.0;
    double lambda_star = 0.0;
    double beta_star = 0.0;
    std::uint64_t matvecs = 0;
    std::int64_t elapsed_us = 0;
  };
  const std::size_t per = static_cast<std::size_t>(config.seeds);
  std::vector<RunRow> runs(settings.size() * per);
  parallel_for(runs.size(), worker_threads(), [&](std::size_t idx) {
    const Setting& st = settings[idx / per];
    const std::uint64_t seed = config.seed + idx % per;
    fk_synth_spec spec;
    fk_synth_spec_default(&spec);
    spec.a = config.a;
    spec.m = config.m;
    spec.n = config.n;
    spec.snr = config.linear_snr(st.snr);
    spec.seed = seed;
    const auto t0 = Clock::now();
    fk_system* sraw = nullptr;
    check(fk_system_generate(&spec, &sraw), "generate");
    const SystemPtr sys(sraw);
    const fk_search_config sc = search_config(config, st.kernel, st.evaluator, seed, 1);
    fk_estimate* eraw = nullptr;
    check(fk_identify(sys.get(), &sc, &eraw), "identify");
    const EstimatePtr est(eraw);
    fk_estimate_summary s;
    check(fk_estimate_summary_get(est.get(), &s), "summary");
    RunRow& r = runs[idx];
    r.fit = s.fit;
    r.lambda_star = s.lambda_star;
    r.beta_star = s.beta_star;
    r.matvecs = s.matvec_total;
    r.elapsed_us = config.deterministic ? 0 : micros_since(t0);
  });

  const Manifest manifest = write_manifest(config);
  nlohmann::json summary_json = nlohmann::json::array();
  nlohmann::json runs_json = nlohmann::json::array();
  std::string summary_csv = "# manifest " + manifest.hash +
                            "\nsnr,kernel,evaluator,seeds,min,q1,median,q3,max,mean\n";
  std::string runs_csv = "# manifest " + manifest.hash +
                         "\nsnr,kernel,evaluator,seed,fit,lambda_star,beta_star,matvecs,elapsed_us\n";
  for (std::size_t c = 0; c < settings.size(); ++c) {
    const Setting& st = settings[c];
    std::vector<double> fits;
    double sum = 0.0;
    for (std::size_t s = 0; s < per; ++s) {
      const RunRow& r = runs[c * per + s];
      const std::uint64_t seed = config.seed + s;
      fits.push_back(r.fit);
      sum += r.fit;
      runs_csv += st.snr + ',' + st.kernel + ',' + st.evaluator + ',' + std::to_string(seed) + ',' +
                  fmt(r.fit) + ',' + fmt(r.lambda_star) + ',' + fmt(r.beta_star) + ',' +
                  std::to_string(r.matvecs) + ',' + std::to_string(r.elapsed_us) + '\n';
      runs_json.push_back({{"snr", st.snr}, {"kernel", st.kernel}, {"evaluator", st.evaluator},
                           {"seed", seed}, {"fit", r.fit}, {"lambda_star", r.lambda_star},
                           {"beta_star", r.beta_star}, {"matvecs", r.matvecs},
                           {"elapsed_us", r.elapsed_us}});
    }
    std::sort(fits.begin(), fits.end());
    const double stats[] = {fits.front(), quantile(fits, 0.25), quantile(fits, 0.5),
                            quantile(fits, 0.75), fits.back(), sum / static_cast<double>(per)};
    summary_csv += st.snr + ',' + st.kernel + ',' + st.evaluator + ',' + std::to_string(per);
    for (double v : stats) summary_csv += ',' + fmt(v);
    summary_csv += '\n';
    summary_json.push_back({{"snr", st.snr}, {"kernel", st.kernel}, {"evaluator", st.evaluator},
                            {"seeds", per}, {"min", stats[0]}, {"q1", stats[1]}, {"median", stats[2]},
                            {"q3", stats[3]}, {"max", stats[4]}, {"mean", stats[5]}});
    std::cout << "snr=" << st.snr << " kernel=" << st.kernel << " evaluator=" << st.evaluator
              << " median fit=" << fmt(stats[2]) << "\n";
  }
  if (config.format == "csv") {
    write_file(config.out, summary_csv);
    write_file(stem_of(config.out) + "_runs.csv", runs_csv);
  } else {
    nlohmann::json j;
    j["manifest_hash"] = manifest.hash;
    j["summary"] = summary_json;
    j["runs"] = runs_json;
    write_file(config.out, j.dump(2) + "\n");
  }
  return 0;
}

int run_verify(const RunConfig& config) {
  std::vector<std::string> names = config.checks;
  if (names.empty()) {
    char* text = nullptr;
    check(fk_verify_names(&text), "verify names");
    names = nlohmann::json::parse(text).get<std::vector<std::string>>();
    fk_string_free(text);
  }
  std::vector<nlohmann::json> reports(names.size());
  parallel_for(names.size(), worker_threads(), [&](std::size_t i) {
    char* text = nullptr;
    check(fk_verify_run(names[i].c_str(), config.params.c_str(), &text), names[i].c_str());
    reports[i] = nlohmann::json::parse(text);
    fk_string_free(text);
  });

  const Manifest manifest = write_manifest(config);
  bool all = true;
  for (const auto& r : reports) {
    const bool ok = r.at("passed").get<bool>();
    all = all && ok;
    std::cout << r.at("name").get<std::string>() << ": " << (ok ? "PASS" : "FAIL") << "\n";
  }
  if (config.format == "json") {
    nlohmann::json j;
    j["manifest_hash"] = manifest.hash;
    j["passed"] = all;
    j["reports"] = reports;
    write_file(config.out, j.dump(2) + "\n");
  } else {
    std::string out = "# manifest " + manifest.hash + "\ncheck,passed,failures\n";
    for (const auto& r : reports) {
      out += r.at("name").get<std::string>() + ',' + (r.at("passed").get<bool>() ? "1" : "0") + ',' +
             std::to_string(r.at("failures").size()) + '\n';
    }
    write_file(config.out, out);
  }
  return all ? 0 : 1;
}

}  // namespace fkcli
