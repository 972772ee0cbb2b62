#include "firkrylov/verify.hpp"

#include "firkrylov/pml.hpp"
#include "firkrylov/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace firkrylov::verify {

namespace {

std::string describe(const char* what, int k, double value, double bound) {
  std::ostringstream os;
  os.precision(6);
  os << what << " at k=" << k << ": " << value << " exceeds " << bound;
  return os.str();
}

Vector geometric_spectrum(Index m, double decay) {
  Vector s(m);
  double v = 1.0;
  for (Index i = 0; i < m; ++i) {
    s(i) = v;
    v *= decay;
  }
  return s;
}

Vector log_spaced(Index m, double lo, double hi) {
  Vector s(m);
  for (Index i = 0; i < m; ++i) {
    const double t = m == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(m - 1);
    s(i) = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return s;
}

Matrix sym_log(const Matrix& S, double lambda) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const Vector l = (es.eigenvalues().array().max(0.0) + lambda).log();
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
}

Vector sorted_desc(Vector v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<double>());
  return v;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// (sqrt(kappa) - 1) / (sqrt(kappa) + 1) raised to 2 * steps, times 4.
double cg_bound(double kappa, int steps) {
  if (steps <= 0) return 4.0;
  const double r = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
  return 4.0 * std::pow(r, 2.0 * steps);
}

// 1 / T_j(x)^2 for x >= 1, evaluated without overflow.
double inverse_chebyshev_sq(int j, double x) {
  if (j <= 0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  const double arg = static_cast<double>(j) * std::acosh(std::max(1.0, x));
  if (arg > 350.0) return 0.0;
  const double t = std::cosh(arg);
  return 1.0 / (t * t);
}

}  // namespace

double quantile_threshold(double delta, int trials) {
  return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
}

DensePml dense_pml(const Matrix& A, const Vector& y, double lambda, Index max_size) {
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, "dense_pml needs a square matrix");
  require(A.rows() <= max_size, ErrorCode::CapacityExceeded, "dense_pml matrix above the size cap");
  require(y.size() == A.rows(), ErrorCode::DimensionMismatch, "y must match the matrix size");
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidArgument,
          "lambda must be non-negative");
  const Index m = A.rows();
  const Matrix S = 0.5 * (A + A.transpose()) + lambda * Matrix::Identity(m, m);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotConverged, "lambda I + A is not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::NotConverged, "lambda I + A is not positive definite");
  }
  DensePml out;
  out.quad = y.dot(llt.solve(y));
  out.trace = es.eigenvalues().array().log().sum();
  return out;
}

Matrix random_orthogonal(Index m, std::uint64_t seed) {
  GaussianSampler g(seed);
  Eigen::HouseholderQR<Matrix> qr(g.matrix(m, m));
  Matrix Q = qr.householderQ();
  const Matrix& R = qr.matrixQR();
  for (Index j = 0; j < m; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

Matrix spd_with_spectrum(const Vector& spectrum, std::uint64_t seed) {
  const Matrix Q = random_orthogonal(spectrum.size(), seed);
  Matrix A = Q * spectrum.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

Index leading_size(const BlockLanczosResult& run, int k) {
  Index r = 0;
  for (size_t i = 0; i < run.block_widths.size() && static_cast<int>(i) < k; ++i)
    r += run.block_widths[i];
  return std::min(r, run.size());
}

double krylov_quadratic(const BlockLanczosResult& run, int k, const Vector& y, double lambda) {
  const Index r = leading_size(run, k);
  const Matrix T = assemble_tridiagonal(run).topLeftCorner(r, r);
  const Vector c = run.basis.leftCols(r).transpose() * y;
  const Matrix S = T + lambda * Matrix::Identity(r, r);
  return c.dot(S.ldlt().solve(c));
}

double krylov_log_trace(const BlockLanczosResult& run, int k, double lambda) {
  const Index r = leading_size(run, k);
  const Index m = run.basis.rows();
  const Matrix T = assemble_tridiagonal(run).topLeftCorner(r, r);
  const Vector theta = eig_sym(T).values.cwiseMax(0.0);
  return static_cast<double>(m - r) * std::log(lambda) + (theta.array() + lambda).log().sum();
}

void CheckReport::fail(std::string message) {
  passed = false;
  if (failures.size() < 20) failures.push_back(std::move(message));
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["parameters"] = parameters;
  j["details"] = details;
  j["passed"] = passed;
  j["failures"] = failures;
  return j;
}

TheoryCheckConfig TheoryCheckConfig::from_json(const nlohmann::json& j) {
  TheoryCheckConfig c;
  if (j.is_null()) return c;
  require(j.is_object(), ErrorCode::InvalidArgument, "check parameters must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "m") c.m = it->get<Index>();
      else if (key == "seed") c.seed = it->get<std::uint64_t>();
      else if (key == "k_max") c.k_max = it->get<int>();
      else if (key == "lambda_list") c.lambda_list = it->get<std::vector<double>>();
      else if (key == "kappa") c.kappa = it->get<double>();
      else if (key == "k") c.k = it->get<int>();
      else if (key == "n_omega") c.n_omega = it->get<int>();
      else if (key == "q") c.q = it->get<int>();
      else if (key == "p") c.p = it->get<int>();
      else if (key == "delta") c.delta = it->get<double>();
      else if (key == "s") c.s = it->get<int>();
      else if (key == "trials") c.trials = it->get<int>();
      else if (key == "n_psi") c.n_psi = it->get<int>();
      else if (key == "k_quad") c.k_quad = it->get<int>();
      else if (key == "lambda") c.lambda = it->get<double>();
      else if (key == "decay") c.decay = it->get<double>();
      else throw Error(ErrorCode::InvalidArgument, "unknown check parameter '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad check parameter: ") + e.what());
  }
  require(c.m >= 2 && c.m <= 2000, ErrorCode::InvalidArgument, "m must lie in [2, 2000]");
  require(c.k_max >= 1 && c.k >= 1 && c.n_omega >= 0 && c.trials >= 1 && c.n_psi >= 1 &&
              c.k_quad >= 1 && c.s >= 0,
          ErrorCode::InvalidArgument, "check sizes must be positive");
  require(c.kappa >= 1.0, ErrorCode::InvalidArgument, "kappa must be at least 1");
  require(c.delta > 0.0 && c.delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
  require(c.lambda > 0.0 && c.decay > 0.0 && c.decay < 1.0, ErrorCode::InvalidArgument,
          "lambda must be positive and decay in (0, 1)");
  for (double l : c.lambda_list)
    require(l > 0.0, ErrorCode::InvalidArgument, "lambda_list entries must be positive");
  return c;
}

nlohmann::json TheoryCheckConfig::to_json() const {
  return {{"m", m},         {"seed", seed},     {"k_max", k_max},   {"lambda_list", lambda_list},
          {"kappa", kappa}, {"k", k},           {"n_omega", n_omega}, {"q", q},
          {"p", p},         {"delta", delta},   {"s", s},           {"trials", trials},
          {"n_psi", n_psi}, {"k_quad", k_quad}, {"lambda", lambda}, {"decay", decay}};
}

CheckReport check_cg_bound(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "cg_bound";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  const Matrix A = spd_with_spectrum(log_spaced(m, 1.0, cfg.kappa), stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  GaussianSampler g(stream_seed(cfg.seed, "start"));
  const Vector y = g.vector(m);
  Matrix Z(m, 1 + cfg.n_omega);
  Z.col(0) = y;
  Z.rightCols(cfg.n_omega) = g.matrix(m, cfg.n_omega);

  const double exact = dense_pml(A, y, 0.0).quad;
  const BlockLanczosResult plain = block_lanczos(op, y, cfg.k_max);
  const BlockLanczosResult aug = block_lanczos(op, Z, cfg.k_max);
  const double slack = 1e-10;
  nlohmann::json rows = nlohmann::json::array();
  double min_margin = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= cfg.k_max; ++k) {
    const double err_plain = (exact - krylov_quadratic(plain, k, y, 0.0)) / exact;
    const double err_aug = (exact - krylov_quadratic(aug, k, y, 0.0)) / exact;
    const double bound = cg_bound(cfg.kappa, k);
    min_margin = std::min(min_margin, bound - err_plain);
    rows.push_back({{"k", k}, {"error", err_plain}, {"augmented_error", err_aug},
                    {"bound", bound}, {"margin", bound - err_plain}});
    if (err_plain > bound + slack) rep.fail(describe("relative error", k, err_plain, bound));
    if (err_aug > err_plain + slack)
      rep.fail(describe("augmented error", k, err_aug, err_plain));
  }
  rep.details["per_k"] = rows;
  rep.details["min_margin"] = min_margin;
  return rep;
}

CheckReport check_augmentation_quadratic(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "augmentation_quadratic";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  const Matrix A = spd_with_spectrum(geometric_spectrum(m, cfg.decay), stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  GaussianSampler g(stream_seed(cfg.seed, "start"));
  const Vector y = g.vector(m);
  Matrix Z(m, 1 + cfg.n_omega);
  Z.col(0) = y;
  Z.rightCols(cfg.n_omega) = g.matrix(m, cfg.n_omega);
  const BlockLanczosResult plain = block_lanczos(op, y, cfg.k_max);
  const BlockLanczosResult aug = block_lanczos(op, Z, cfg.k_max);

  nlohmann::json per_lambda = nlohmann::json::array();
  for (double lambda : cfg.lambda_list) {
    const double exact = dense_pml(A, y, lambda).quad;
    const double slack = 1e-10 * exact;
    double prev_plain = std::numeric_limits<double>::infinity();
    double prev_aug = prev_plain;
    double worst_gap = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= cfg.k_max; ++k) {
      const double e_plain = exact - krylov_quadratic(plain, k, y, lambda);
      const double e_aug = exact - krylov_quadratic(aug, k, y, lambda);
      worst_gap = std::max(worst_gap, e_aug - e_plain);
      if (e_aug < -slack) rep.fail(describe("negative augmented error", k, -e_aug, slack));
      if (e_aug > e_plain + slack) rep.fail(describe("augmented error", k, e_aug, e_plain));
      if (e_plain > prev_plain + slack) rep.fail(describe("plain error growth", k, e_plain, prev_plain));
      if (e_aug > prev_aug + slack) rep.fail(describe("augmented error growth", k, e_aug, prev_aug));
      prev_plain = e_plain;
      prev_aug = e_aug;
    }
    per_lambda.push_back({{"lambda", lambda}, {"exact", exact}, {"max_aug_minus_plain", worst_gap},
                          {"final_plain_error", prev_plain}, {"final_aug_error", prev_aug}});
  }
  rep.details["per_lambda"] = per_lambda;
  return rep;
}

CheckReport check_trace_sandwich(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "trace_sandwich";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  require(m <= 500, ErrorCode::InvalidArgument, "trace sandwich check needs m <= 500");
  require(static_cast<Index>(cfg.k) * (cfg.n_omega + 1) <= m, ErrorCode::InvalidArgument,
          "trace sandwich needs k (n_omega + 1) <= m");
  const Matrix A = spd_with_spectrum(geometric_spectrum(m, cfg.decay), stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  GaussianSampler g(stream_seed(cfg.seed, "start"));
  const Vector y = g.vector(m);
  Matrix Z(m, 1 + cfg.n_omega);
  Z.col(0) = y;
  Z.rightCols(cfg.n_omega) = g.matrix(m, cfg.n_omega);
  const BlockLanczosResult plain = block_lanczos(op, y, cfg.k);
  const BlockLanczosResult aug = block_lanczos(op, Z, cfg.k);
  const double slack = 1e-10 * static_cast<double>(m);

  nlohmann::json per_lambda = nlohmann::json::array();
  for (double lambda : cfg.lambda_list) {
    const double t_plain = krylov_log_trace(plain, cfg.k, lambda);
    const double t_aug = krylov_log_trace(aug, cfg.k, lambda);
    const double t_exact = dense_pml(A, y, lambda).trace;
    per_lambda.push_back({{"lambda", lambda}, {"plain", t_plain}, {"augmented", t_aug},
                          {"exact", t_exact}});
    if (t_plain > t_aug + slack) rep.fail(describe("plain trace above augmented", cfg.k, t_plain, t_aug));
    if (t_aug > t_exact + slack) rep.fail(describe("augmented trace above exact", cfg.k, t_aug, t_exact));
  }
  rep.details["per_lambda"] = per_lambda;

  // Eigenvalue ordering on nested random orthonormal bases.
  const Index big = std::min<Index>(m, static_cast<Index>(cfg.k) * (cfg.n_omega + 1));
  const Index small = std::min<Index>(big, cfg.k);
  const Matrix Qh = random_orthogonal(m, stream_seed(cfg.seed, "nested")).leftCols(big);
  const Matrix Q = Qh.leftCols(small);
  Vector ev_small = Vector::Zero(m);
  Vector ev_big = Vector::Zero(m);
  ev_small.head(small) = eig_sym(Q.transpose() * A * Q).values;
  ev_big.head(big) = eig_sym(Qh.transpose() * A * Qh).values;
  ev_small = sorted_desc(ev_small);
  ev_big = sorted_desc(ev_big);
  const double tol = 1e-10 * eig_sym(A).values(0);
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    worst = std::max(worst, ev_small(i) - ev_big(i));
    if (ev_small(i) > ev_big(i) + tol)
      rep.fail(describe("nested eigenvalue ordering", static_cast<int>(i + 1), ev_small(i), ev_big(i)));
  }
  rep.details["eigenvalue_ordering_worst_gap"] = worst;
  return rep;
}

CheckReport check_implicit_preconditioning(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "implicit_preconditioning";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  const double lambda = cfg.lambda;
  const Matrix A = spd_with_spectrum(geometric_spectrum(m, cfg.decay), stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  GaussianSampler g(stream_seed(cfg.seed, "start"));
  const Vector y = g.vector(m);
  const Matrix omega = g.matrix(m, std::max(cfg.n_omega, 1));
  const Matrix Al = A + lambda * Matrix::Identity(m, m);

  // Nystrom sketch of A on a basis S of K_s(A, Omega); range(U) lies in
  // range(A S), a subspace of K_{s+1}(A, Omega).
  Matrix U(m, 0);
  Vector nys;
  if (cfg.s > 0) {
    const Matrix S = block_lanczos(op, omega, cfg.s).basis;
    const Matrix Y = A * S;
    const SymmetricEigen core = eig_sym(S.transpose() * Y);
    Index keep = 0;
    while (keep < core.values.size() && core.values(keep) > 1e-12 * core.values(0)) ++keep;
    if (keep > 0) {
      const Vector inv_root = core.values.head(keep).cwiseSqrt().cwiseInverse();
      const Matrix B = Y * core.vectors.leftCols(keep) * inv_root.asDiagonal();
      Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeThinU);
      U = svd.matrixU();
      nys = svd.singularValues().array().square();
    }
  }
  Matrix Pm = Matrix::Identity(m, m);
  if (U.cols() > 0) {
    const double c = lambda;
    const double C = nys.minCoeff() + lambda;
    const Vector d = (C / (nys.array() + c)).sqrt().matrix() - Vector::Ones(nys.size());
    Pm += U * d.asDiagonal() * U.transpose();
  }
  const Vector pre = eig_sym(Pm * Al * Pm).values;
  const double kappa_tilde = pre(0) / pre(pre.size() - 1);
  const Vector ev = eig_sym(Al).values;
  const double kappa = ev(0) / ev(ev.size() - 1);

  Matrix Z(m, 1 + cfg.n_omega);
  Z.col(0) = y;
  Z.rightCols(cfg.n_omega) = omega.leftCols(cfg.n_omega);
  const BlockLanczosResult aug = block_lanczos(op, Z, cfg.k_max);
  const double exact = dense_pml(A, y, lambda).quad;
  nlohmann::json rows = nlohmann::json::array();
  for (int k = cfg.s + 1; k <= cfg.k_max; ++k) {
    const double err = std::max(0.0, exact - krylov_quadratic(aug, k, y, lambda)) / exact;
    const double bound = cg_bound(kappa_tilde, k - cfg.s);
    rows.push_back({{"k", k}, {"error", err}, {"bound", bound},
                    {"plain_bound", cg_bound(kappa, k)}});
    if (err > bound + 1e-10) rep.fail(describe("augmented error", k, err, bound));
  }
  rep.details["kappa"] = kappa;
  rep.details["kappa_tilde"] = kappa_tilde;
  rep.details["preconditioner_rank"] = U.cols();
  rep.details["per_k"] = rows;
  return rep;
}

CheckReport check_trace_bound_quantile(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "trace_bound_quantile";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  const int q = cfg.q;
  const int p = cfg.p;
  const int n_omega = q + p;
  require(q >= 2 && p >= 2, ErrorCode::InvalidArgument, "trace bound needs q, p >= 2");
  require(cfg.k >= 2, ErrorCode::InvalidArgument, "trace bound needs k >= 2");
  require(q < m, ErrorCode::InvalidArgument, "trace bound needs q < m");
  const double lambda = cfg.lambda;
  const Vector spectrum = geometric_spectrum(m, cfg.decay);
  const Matrix A = spd_with_spectrum(spectrum, stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  const double exact = dense_pml(A, Vector::Ones(m), lambda).trace;

  const double lq = spectrum(q - 1);
  const double lq1 = spectrum(q);
  const double delta = cfg.delta;
  const double C = std::pow(std::sqrt(static_cast<double>(m - q)) + std::sqrt(n_omega) +
                                std::sqrt(2.0 * std::log(2.0 / delta)),
                            2) *
                   std::pow(2.0 / delta, 2.0 / (p + 1)) *
                   std::pow(std::exp(1.0) * std::sqrt(n_omega) / (p + 1), 2);
  const double x = lq1 > 0.0 ? (2.0 * lq - lq1) / lq1 : std::numeric_limits<double>::infinity();
  const double gain = lq1 > 0.0 ? C * (lq1 / lq) * inverse_chebyshev_sq(cfg.k - 2, x) : 0.0;
  double bound = 0.0;
  for (Index i = q; i < m; ++i)
    bound += std::log1p(gain * spectrum(i) / lambda) + std::log1p(spectrum(i) / lambda);

  const double slack = 1e-10 * static_cast<double>(m);
  int violations = 0;
  std::vector<double> errors;
  for (int t = 0; t < cfg.trials; ++t) {
    GaussianSampler g(stream_seed(mix_seed(cfg.seed + static_cast<std::uint64_t>(t)), "sketch"));
    const BlockLanczosResult run = block_lanczos(op, g.matrix(m, n_omega), cfg.k);
    const double err = exact - krylov_log_trace(run, cfg.k, lambda);
    errors.push_back(err);
    if (err < -slack) rep.fail(describe("negative trace error", cfg.k, -err, slack));
    if (err > bound + slack) ++violations;
  }
  const double rate = static_cast<double>(violations) / cfg.trials;
  const double threshold = quantile_threshold(delta, cfg.trials);
  if (rate > threshold) {
    std::ostringstream os;
    os << "violation rate " << rate << " exceeds " << threshold;
    rep.fail(os.str());
  }
  rep.details["C"] = C;
  rep.details["bound"] = bound;
  rep.details["median_error"] = median(errors);
  rep.details["max_error"] = *std::max_element(errors.begin(), errors.end());
  rep.details["violation_rate"] = rate;
  rep.details["threshold"] = threshold;
  return rep;
}

CheckReport check_hutchinson_quantile(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "hutchinson_quantile";
  rep.parameters = cfg.to_json();
  const Index m = cfg.m;
  const double lambda = cfg.lambda;
  const Matrix A = spd_with_spectrum(geometric_spectrum(m, cfg.decay), stream_seed(cfg.seed, "basis"));
  const DenseOperator op(A);
  GaussianSampler g(stream_seed(cfg.seed, "start"));
  Matrix Z(m, 1 + cfg.n_omega);
  Z.col(0) = g.vector(m);
  Z.rightCols(cfg.n_omega) = g.matrix(m, cfg.n_omega);
  const BlockLanczosResult run = block_lanczos(op, Z, cfg.k);
  const Matrix W = run.basis;
  const Matrix compressed = W * assemble_tridiagonal(run) * W.transpose();
  Matrix R = sym_log(A, lambda) - sym_log(compressed, lambda);
  R = (0.5 * (R + R.transpose())).eval();
  const double tr = R.trace();
  const double fro = R.norm();
  const Vector rev = eig_sym(R).values;
  const double spec = std::max(std::abs(rev(0)), std::abs(rev(rev.size() - 1)));

  // Gaussian tail P(|est - tr| >= eps) <= 2 exp(-N eps^2 / (4 |R|_F^2 + 4 eps |R|_2)).
  const double N = cfg.n_psi;
  const double L = std::log(2.0 / cfg.delta);
  const double eps = (4.0 * L * spec + std::sqrt(16.0 * L * L * spec * spec + 16.0 * N * L * fro * fro)) /
                     (2.0 * N);

  int violations = 0;
  std::vector<double> errors;
  for (int t = 0; t < cfg.trials; ++t) {
    GaussianSampler pg(stream_seed(mix_seed(cfg.seed + static_cast<std::uint64_t>(t)), "probe"));
    const Matrix Psi = pg.matrix(m, cfg.n_psi);
    const double est = (Psi.cwiseProduct(R * Psi)).sum() / N;
    errors.push_back(std::abs(est - tr));
    if (std::abs(est - tr) > eps) ++violations;
  }
  const double rate = static_cast<double>(violations) / cfg.trials;
  const double threshold = quantile_threshold(cfg.delta, cfg.trials);
  if (rate > threshold) {
    std::ostringstream os;
    os << "violation rate " << rate << " exceeds " << threshold;
    rep.fail(os.str());
  }
  rep.details["trace_R"] = tr;
  rep.details["frobenius_R"] = fro;
  rep.details["spectral_R"] = spec;
  rep.details["epsilon"] = eps;
  rep.details["median_error"] = median(errors);
  rep.details["violation_rate"] = rate;
  rep.details["threshold"] = threshold;
  return rep;
}

namespace {

struct SmallSystem {
  Matrix A;
  Vector y;
};

// A = Phi K Phi^T for a random input, TC kernel with beta = 0.9.
SmallSystem small_system(Index m, std::uint64_t seed) {
  GaussianSampler g(stream_seed(seed, "system"));
  const Vector u = g.vector(m);
  const Index n = std::max<Index>(1, m / 4);
  const CompositeOperator op(ToeplitzOperator(u, n), KernelFactor::tc(n, 0.9));
  SmallSystem s;
  s.A = dense_materialize(op);
  s.A = (0.5 * (s.A + s.A.transpose())).eval();
  s.y = g.vector(m);
  return s;
}

}  // namespace

CheckReport check_residual_correction(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "residual_correction";
  rep.parameters = cfg.to_json();
  std::vector<double> without, with;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = mix_seed(cfg.seed + static_cast<std::uint64_t>(t));
    const SmallSystem sys = small_system(cfg.m, seed);
    const DenseOperator op(sys.A);
    const KrylovPrecompute pre = pml_krylov_precompute(op, sys.y, cfg.n_omega, cfg.k, seed);
    const ResidualTraceModel model =
        residual_trace_precompute(op, pre.lanczos, cfg.n_psi, cfg.k_quad, seed);
    double e0 = 0.0, e1 = 0.0;
    for (double lambda : cfg.lambda_list) {
      const double exact = dense_pml(sys.A, sys.y, lambda).trace;
      const double plain = pml_krylov_eval(pre.spectrum, nullptr, lambda).trace_term * cfg.m;
      const double corrected = pml_krylov_eval(pre.spectrum, &model, lambda).trace_term * cfg.m;
      e0 += std::abs(plain - exact);
      e1 += std::abs(corrected - exact);
    }
    without.push_back(e0 / cfg.lambda_list.size());
    with.push_back(e1 / cfg.lambda_list.size());
  }
  const double med0 = median(without);
  const double med1 = median(with);
  rep.details["median_error_without"] = med0;
  rep.details["median_error_with"] = med1;
  if (med1 > med0) {
    std::ostringstream os;
    os << "median error with correction " << med1 << " exceeds " << med0;
    rep.fail(os.str());
  }
  return rep;
}

CheckReport check_residual_scaling(const TheoryCheckConfig& cfg) {
  CheckReport rep;
  rep.name = "residual_scaling";
  rep.parameters = cfg.to_json();
  const double lambda = cfg.lambda;
  const SmallSystem sys = small_system(cfg.m, cfg.seed);
  const DenseOperator op(sys.A);
  const KrylovPrecompute pre = pml_krylov_precompute(op, sys.y, cfg.n_omega, cfg.k, cfg.seed);
  const Matrix W = pre.lanczos.basis;
  const Matrix compressed = W * assemble_tridiagonal(pre.lanczos) * W.transpose();
  const double true_residual = (sym_log(sys.A, lambda) - sym_log(compressed, lambda)).trace();

  const std::vector<int> sizes{1, 4, 16};
  std::vector<double> xs, ys;
  nlohmann::json rows = nlohmann::json::array();
  for (int n_psi : sizes) {
    double sq = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t seed =
          mix_seed(cfg.seed ^ (static_cast<std::uint64_t>(n_psi) << 32) ^ static_cast<std::uint64_t>(t));
      const ResidualTraceModel model = residual_trace_precompute(op, pre.lanczos, n_psi, cfg.k_quad, seed);
      const double e = residual_trace_eval(model, lambda) - true_residual;
      sq += e * e;
    }
    const double rms = std::sqrt(sq / cfg.trials);
    rows.push_back({{"n_psi", n_psi}, {"rms_error", rms}});
    xs.push_back(std::log(static_cast<double>(n_psi)));
    ys.push_back(std::log(rms));
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  rep.details["true_residual_trace"] = true_residual;
  rep.details["per_n_psi"] = rows;
  rep.details["slope"] = slope;
  if (std::abs(slope + 0.5) > 0.2) {
    std::ostringstream os;
    os << "log-log slope " << slope << " outside -0.5 +/- 0.2";
    rep.fail(os.str());
  }
  return rep;
}

std::vector<std::string> check_names() {
  return {"cg_bound",           "augmentation_quadratic", "trace_sandwich",
          "implicit_preconditioning", "trace_bound_quantile", "hutchinson_quantile",
          "residual_correction", "residual_scaling"};
}

CheckReport run_check(const std::string& name, const nlohmann::json& params) {
  const TheoryCheckConfig cfg = TheoryCheckConfig::from_json(params);
  if (name == "cg_bound") return check_cg_bound(cfg);
  if (name == "augmentation_quadratic") return check_augmentation_quadratic(cfg);
  if (name == "trace_sandwich") return check_trace_sandwich(cfg);
  if (name == "implicit_preconditioning") return check_implicit_preconditioning(cfg);
  if (name == "trace_bound_quantile") return check_trace_bound_quantile(cfg);
  if (name == "hutchinson_quantile") return check_hutchinson_quantile(cfg);
  if (name == "residual_correction") return check_residual_correction(cfg);
  if (name == "residual_scaling") return check_residual_scaling(cfg);
  throw Error(ErrorCode::InvalidArgument, "unknown check '" + name + "'");
}

}  // namespace firkrylov::verify
