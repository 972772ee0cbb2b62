#include "firkrylov/pml.hpp"
#include "firkrylov/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace firkrylov {

namespace {

// Randomized Nystrom approximation G ~ U diag(values) U^T of the n x n Gram
// matrix G = Phi~^T Phi~, with a small shift for a stable Cholesky step.
struct Nystrom {
  Matrix U;
  Vector values;  // descending, nonnegative
};

Nystrom nystrom_gram(const CompositeOperator& A, Index rank, std::uint64_t seed) {
  const Index n = A.order();
  const Index l = std::min(rank, n);
  Nystrom out;
  if (l <= 0) return out;
  GaussianSampler sampler(stream_seed(seed, "nystrom"));
  Eigen::HouseholderQR<Matrix> qr(sampler.matrix(n, l));
  const Matrix omega = qr.householderQ() * Matrix::Identity(n, l);
  const Matrix Y = A.apply_factor_transpose(A.apply_factor(omega));
  const double y_norm = Y.norm();
  if (y_norm == 0.0) return out;

  const double shift = std::sqrt(static_cast<double>(n)) * std::numeric_limits<double>::epsilon() * y_norm;
  const Matrix Ys = Y + shift * omega;
  Matrix core = omega.transpose() * Ys;
  core = (0.5 * (core + core.transpose())).eval();
  Eigen::LLT<Matrix> llt(core);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotConverged, "Nystrom core matrix is not positive definite");
  }
  // B = Ys C^{-1} with core = C^T C, C upper triangular.
  const Matrix Bt = llt.matrixL().solve(Ys.transpose());
  Eigen::BDCSVD<Matrix> svd(flush_tiny(Bt.transpose()), Eigen::ComputeThinU);
  out.U = svd.matrixU();
  out.values = (svd.singularValues().array().square() - shift).max(0.0);
  return out;
}

// M = P^{-1/2} = U diag(scale) U^T + (I - U U^T).
class InverseRootPreconditioner {
 public:
  InverseRootPreconditioner(const Nystrom& ny, double lambda) : U_(ny.U) {
    if (ny.values.size() == 0) return;
    const double floor = ny.values(ny.values.size() - 1) + lambda;
    scale_minus_one_ = ((floor / (ny.values.array() + lambda)).sqrt() - 1.0).matrix();
    log_det_p_ = ((ny.values.array() + lambda) / floor).log().sum();
  }

  Matrix apply(const MatrixRef& X) const {
    if (U_.cols() == 0) return X;
    const Matrix c = U_.transpose() * X;
    return X + U_ * (scale_minus_one_.asDiagonal() * c);
  }

  double log_det_p() const { return log_det_p_; }

 private:
  Matrix U_;
  Vector scale_minus_one_;
  double log_det_p_ = 0.0;
};

// B = M (lambda I + G) M on R^n.
class PreconditionedGram final : public SymmetricOperator {
 public:
  PreconditionedGram(const CompositeOperator& A, const InverseRootPreconditioner& M, double lambda)
      : A_(A), M_(M), lambda_(lambda) {}
  Index size() const override { return A_.order(); }
  Matrix apply(const MatrixRef& X) const override {
    const Matrix v = M_.apply(X);
    const Matrix g = A_.apply_factor_transpose(A_.apply_factor(v)) + lambda_ * v;
    return M_.apply(g);
  }

 private:
  const CompositeOperator& A_;
  const InverseRootPreconditioner& M_;
  double lambda_;
};

struct LsqrResult {
  Vector x;  // solution in the preconditioned variable
  int iterations = 0;
};

// Paige-Saunders LSQR for min || [Phi~ M; sqrt(lambda) M] z - [y; 0] ||.
LsqrResult lsqr(const CompositeOperator& A, const InverseRootPreconditioner& M, const Vector& y,
                double lambda, double tol, int maxit) {
  const Index n = A.order();
  const double root_lambda = std::sqrt(lambda);
  auto forward = [&](const Vector& z, Vector& top, Vector& bottom) {
    const Vector v = M.apply(z);
    top = A.apply_factor(v);
    bottom = root_lambda * v;
  };
  auto adjoint = [&](const Vector& top, const Vector& bottom) -> Vector {
    const Vector g = A.apply_factor_transpose(top);
    return M.apply(g + root_lambda * bottom);
  };

  LsqrResult out;
  out.x = Vector::Zero(n);
  Vector u_top = y;
  Vector u_bot = Vector::Zero(n);
  double beta = y.norm();
  const double b_norm = beta;
  if (beta == 0.0) return out;
  u_top /= beta;
  Vector v = adjoint(u_top, u_bot);
  double alpha = v.norm();
  if (alpha == 0.0) return out;
  v /= alpha;
  Vector w = v;
  double phibar = beta;
  double rhobar = alpha;
  double a_norm_sq = 0.0;
  double x_norm = 0.0;

  for (int it = 1; it <= maxit; ++it) {
    out.iterations = it;
    Vector top, bot;
    forward(v, top, bot);
    u_top = top - alpha * u_top;
    u_bot = bot - alpha * u_bot;
    beta = std::sqrt(u_top.squaredNorm() + u_bot.squaredNorm());
    if (beta > 0.0) {
      u_top /= beta;
      u_bot /= beta;
      a_norm_sq += alpha * alpha + beta * beta;
      v = adjoint(u_top, u_bot) - beta * v;
      alpha = v.norm();
      if (alpha > 0.0) v /= alpha;
    } else {
      a_norm_sq += alpha * alpha;
    }

    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    out.x += (phi / rho) * w;
    w = v - (theta / rho) * w;
    if (!out.x.allFinite()) throw Error(ErrorCode::NonFinite, "LSQR produced non-finite iterates");
    x_norm = out.x.norm();

    const double a_norm = std::sqrt(a_norm_sq);
    const double r_norm = phibar;
    const double ar_norm = phibar * alpha * std::abs(c);
    const bool small_residual = r_norm <= tol * b_norm + tol * a_norm * x_norm;
    const bool small_normal = r_norm == 0.0 || ar_norm <= tol * a_norm * r_norm;
    if (small_residual || small_normal || alpha == 0.0 || beta == 0.0) return out;
    if (it == maxit) {
      throw Error(ErrorCode::NotConverged,
                  "LSQR did not converge in " + std::to_string(maxit) +
                      " iterations (normal-equation residual " + std::to_string(ar_norm) +
                      ", residual " + std::to_string(r_norm) + ")");
    }
  }
  return out;
}

}  // namespace

PmlEvaluation pml_indirect_eval(const CompositeOperator& A, const Vector& y, double lambda,
                                const IndirectOptions& options, IndirectDiagnostics* diagnostics) {
  const Index m = A.size();
  const Index n = A.order();
  require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidArgument,
          "lambda must be positive and finite");
  require(y.size() == m, ErrorCode::DimensionMismatch, "y must have m entries");
  require_finite(y, "output signal y");
  require(y.squaredNorm() > 0.0, ErrorCode::InvalidArgument, "y is zero");
  require(options.nystrom_rank >= 0 && options.gh_probes >= 1 && options.lsqr_maxit >= 1 &&
              options.lsqr_tol > 0.0 && options.mercator_tol > 0.0 &&
              options.mercator_max_terms >= 1,
          ErrorCode::InvalidArgument, "invalid indirect evaluator options");

  IndirectDiagnostics diag;
  const double md = static_cast<double>(m);
  const Nystrom ny = nystrom_gram(A, options.nystrom_rank, options.seed);
  PmlEvaluation out;
  out.lambda = lambda;

  if (ny.values.size() == 0) {
    // Phi~ = 0 (the sketch of G vanished).
    const double quad = y.squaredNorm() / lambda;
    out.quad_term = std::log(quad);
    out.trace_term = std::log(lambda);
    out.psi = out.quad_term + out.trace_term;
    out.nu_star = quad / md;
    if (diagnostics) *diagnostics = diag;
    return out;
  }

  const InverseRootPreconditioner M(ny, lambda);

  const LsqrResult ls = lsqr(A, M, y, lambda, options.lsqr_tol, options.lsqr_maxit);
  diag.lsqr_iterations = ls.iterations;
  const Vector x = M.apply(ls.x);
  const double quad = (y - A.apply_factor(x)).squaredNorm() / lambda + x.squaredNorm();

  // Extreme eigenvalues of B from a short Lanczos run; X = I - B/s with s
  // centering the estimated interval.
  const PreconditionedGram B(A, M, lambda);
  GaussianSampler sampler(stream_seed(options.seed, "hutchinson"));
  const Vector start = sampler.vector(n);
  const int depth = static_cast<int>(std::min<Index>(n, 40));
  const BlockLanczosResult run = block_lanczos(B, start, depth);
  const Vector ritz = eig_sym(assemble_tridiagonal(run)).values;
  const double b_hi = 1.05 * ritz(0);
  const double b_lo = 0.95 * ritz(ritz.size() - 1);
  if (!(b_lo > 0.0)) {
    throw Error(ErrorCode::NotConverged,
                "preconditioned operator is not numerically positive definite; increase nystrom_rank");
  }
  const double s = 0.5 * (b_hi + b_lo);
  const double radius = (b_hi - b_lo) / (b_hi + b_lo);
  diag.spectral_radius = radius;
  if (radius >= 1.0) {
    throw Error(ErrorCode::NotConverged,
                "Mercator series diverges (spectral radius estimate " + std::to_string(radius) +
                    "); increase nystrom_rank");
  }

  // Tr log(I - X) = -sum_k Tr(X^k) / k, with Tr(X^k) ~ mean of z^T X^k z.
  const Matrix Z = sampler.matrix(n, options.gh_probes);
  const Vector z_norms = Z.colwise().norm();
  const double probes = static_cast<double>(options.gh_probes);
  Matrix V = Z;
  double series = 0.0;
  bool converged = false;
  for (int k = 1; k <= options.mercator_max_terms; ++k) {
    V = V - B.apply(V) / s;
    const double term = (Z.cwiseProduct(V)).sum() / (probes * k);
    series -= term;
    diag.mercator_terms = k;
    const double bound = z_norms.dot(V.colwise().norm().transpose()) / (probes * k);
    if (bound <= options.mercator_tol * std::max(std::abs(series), 1.0)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NotConverged,
                "Mercator series did not reach tolerance in " +
                    std::to_string(options.mercator_max_terms) +
                    " terms (spectral radius estimate " + std::to_string(radius) +
                    "); increase nystrom_rank");
  }

  const double trace = static_cast<double>(n) * std::log(s) + series + M.log_det_p() +
                       static_cast<double>(m - n) * std::log(lambda);
  out.quad_term = std::log(quad);
  out.trace_term = trace / md;
  out.psi = out.quad_term + out.trace_term;
  out.nu_star = quad / md;
  if (diagnostics) *diagnostics = diag;
  return out;
}

}  // namespace firkrylov
