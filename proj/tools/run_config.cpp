#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace fkcli {

void check(fk_status status, const char* context) {
  if (status == FK_OK) return;
  const std::string msg = std::string(context) + ": " + fk_last_error();
  throw CliError(status == FK_ERR_INVALID_ARGUMENT ? 2 : 1, msg);
}

std::string fmt(double value) {
  char buf[64];
  check(fk_format_double(value, buf, sizeof(buf)), "format");
  return buf;
}

double parse_snr(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "inf" || t == "infinity" || t == "+inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || std::isnan(v)) throw config_error("cannot parse snr '" + text + "'");
  return v;
}

std::string snr_text(double snr) { return std::isinf(snr) ? "inf" : fmt(snr); }

double RunConfig::linear_snr(const std::string& text) const {
  const double v = parse_snr(text);
  if (!snr_db || std::isinf(v)) return v;
  return fk_snr_from_db(v);
}

fk_kernel RunConfig::kernel_kind(const std::string& name) const {
  if (name == "tc") return FK_KERNEL_TC;
  if (name == "dc") return FK_KERNEL_DC;
  if (name == "ss") return FK_KERNEL_SS;
  throw config_error("unknown kernel '" + name + "'");
}

fk_evaluator_config RunConfig::evaluator_config(const std::string& name) const {
  fk_evaluator_config e;
  fk_evaluator_config_default(&e);
  if (name == "direct") e.evaluator = FK_EVAL_DIRECT;
  else if (name == "indirect") e.evaluator = FK_EVAL_INDIRECT;
  else if (name == "krylov") e.evaluator = FK_EVAL_KRYLOV;
  else throw config_error("unknown evaluator '" + name + "'");
  e.k = k;
  e.n_omega = n_omega;
  e.n_psi = n_psi;
  e.k_quad = k_quad;
  e.residual_correction = residual_correction ? 1 : 0;
  e.nystrom_rank = nystrom_rank;
  e.lsqr_tol = lsqr_tol;
  e.gh_probes = gh_probes;
  e.seed = seed;
  return e;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["out"] = out;
  j["format"] = format;
  j["seed"] = seed;
  if (command == "gen" || command == "bench") {
    j["a"] = a;
    j["m"] = m;
    j["n"] = n;
    j["snr_db"] = snr_db;
  }
  if (command == "gen") j["snr"] = snr;
  if (command == "grid" || command == "identify") {
    j["data"] = data;
    j["data_hash"] = data_hash;
    j["n"] = n;
  }
  if (command == "grid" || command == "identify" || command == "bench") {
    j["kernel"] = kernel;
    j["rho"] = rho;
    j["c"] = c;
    j["evaluator"] = evaluator;
    j["k"] = k;
    j["n_omega"] = n_omega;
    j["n_psi"] = n_psi;
    j["k_quad"] = k_quad;
    j["residual_correction"] = residual_correction;
    j["nystrom_rank"] = nystrom_rank;
    j["lsqr_tol"] = lsqr_tol;
    j["gh_probes"] = gh_probes;
    j["beta_range"] = beta_range;
    j["lambda_range"] = lambda_range;
  }
  if (command == "grid") {
    j["grid"] = grid;
    j["deterministic"] = deterministic;
  }
  if (command == "identify" || command == "bench") {
    j["budget"] = budget;
    j["lambda_grid"] = lambda_grid;
  }
  if (command == "bench") {
    j["seeds"] = seeds;
    j["snr_list"] = snr_list;
    j["kernel_list"] = kernel_list;
    j["evaluator_list"] = evaluator_list;
    j["deterministic"] = deterministic;
  }
  if (command == "verify") {
    j["checks"] = checks;
    j["params"] = nlohmann::json::parse(params);
  }
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("command", c.command);
    get("out", c.out);
    get("format", c.format);
    get("seed", c.seed);
    get("a", c.a);
    get("m", c.m);
    get("n", c.n);
    get("snr", c.snr);
    get("snr_db", c.snr_db);
    get("data", c.data);
    get("data_hash", c.data_hash);
    get("kernel", c.kernel);
    get("rho", c.rho);
    get("c", c.c);
    get("evaluator", c.evaluator);
    get("k", c.k);
    get("n_omega", c.n_omega);
    get("n_psi", c.n_psi);
    get("k_quad", c.k_quad);
    get("residual_correction", c.residual_correction);
    get("nystrom_rank", c.nystrom_rank);
    get("lsqr_tol", c.lsqr_tol);
    get("gh_probes", c.gh_probes);
    get("beta_range", c.beta_range);
    get("lambda_range", c.lambda_range);
    get("grid", c.grid);
    get("budget", c.budget);
    get("lambda_grid", c.lambda_grid);
    get("deterministic", c.deterministic);
    get("seeds", c.seeds);
    get("snr_list", c.snr_list);
    get("kernel_list", c.kernel_list);
    get("evaluator_list", c.evaluator_list);
    get("checks", c.checks);
    if (j.contains("params")) c.params = j.at("params").dump();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed manifest: ") + e.what());
  }
  return c;
}

Manifest make_manifest(const RunConfig& config) {
  Manifest m;
  m.document = {{"tool", "firkrylov"}, {"version", fk_version()}, {"config", config.to_json()}};
  // Hash excludes the output path.
  nlohmann::json hashed = m.document;
  hashed["config"].erase("out");
  const std::string body = hashed.dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fk_hash_bytes(body.data(), body.size())));
  m.hash = buf;
  m.document["hash"] = m.hash;
  return m;
}

Manifest write_manifest(const RunConfig& config) {
  Manifest m = make_manifest(config);
  write_file(stem_of(config.out) + ".manifest.json", m.document.dump(2) + "\n");
  return m;
}

RunConfig read_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw config_error("cannot parse manifest '" + path + "': " + e.what());
  }
  if (!j.contains("config")) throw config_error("manifest '" + path + "' has no config");
  return RunConfig::from_json(j.at("config"));
}

std::string stem_of(const std::string& path) {
  const size_t slash = path.find_last_of('/');
  const size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(1, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(1, "cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw CliError(1, "failed writing '" + path + "'");
}

int worker_threads() {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("FIRKRYLOV_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw config_error("FIRKRYLOV_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(v, hw));
}

std::string sidecar_path(const std::string& data_path) { return stem_of(data_path) + ".json"; }

void prepare_input(RunConfig& config, bool from_manifest) {
  if (config.data.empty()) throw config_error("--data is required");
  std::string contents = read_file(config.data);
  std::ifstream probe(sidecar_path(config.data));
  if (probe) {
    const std::string side = read_file(sidecar_path(config.data));
    contents += side;
    if (config.n <= 0) {
      try {
        config.n = nlohmann::json::parse(side).at("spec").at("n").get<std::int64_t>();
      } catch (const nlohmann::json::exception& e) {
        throw config_error("cannot read n from sidecar: " + std::string(e.what()));
      }
    }
  }
  if (config.n <= 0) throw config_error("--n is required when the data has no sidecar");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fk_hash_bytes(contents.data(), contents.size())));
  if (from_manifest && !config.data_hash.empty() && config.data_hash != buf) {
    throw CliError(1, "input data changed since the manifest was written");
  }
  config.data_hash = buf;
}

int run(const RunConfig& config) {
  if (config.format != "csv" && config.format != "json") {
    throw config_error("format must be csv or json");
  }
  if (config.out.empty()) throw config_error("--out is required");
  if (config.command == "gen") return run_gen(config);
  if (config.command == "grid") return run_grid(config);
  if (config.command == "identify") return run_identify(config);
  if (config.command == "bench") return run_bench(config);
  if (config.command == "verify") return run_verify(config);
  throw config_error("unknown command '" + config.command + "'");
}

}  // namespace fkcli
