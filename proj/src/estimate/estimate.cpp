#include "firkrylov/estimate.hpp"
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

struct NystromPreconditioner {
  Matrix U;
  Vector scale;  // (s + shift) / (d_i + shift) - 1

  Vector apply(const Vector& r) const {
    if (U.cols() == 0) return r;
    const Vector c = U.transpose() * r;
    return r + U * scale.cwiseProduct(c);
  }
};

NystromPreconditioner nystrom_preconditioner(const SymmetricOperator& A, double shift, Index rank,
                                             std::uint64_t seed) {
  NystromPreconditioner out;
  const Index m = A.size();
  const Index l = std::min(rank, m);
  if (l <= 0) return out;
  Eigen::HouseholderQR<Matrix> qr(GaussianSampler(stream_seed(seed, "cg_nystrom")).matrix(m, l));
  const Matrix omega = qr.householderQ() * Matrix::Identity(m, l);
  const Matrix Y = A.apply(omega);
  const double y_norm = Y.norm();
  if (y_norm == 0.0) return out;
  const double nu = std::sqrt(static_cast<double>(m)) * std::numeric_limits<double>::epsilon() * y_norm;
  const Matrix Ys = Y + nu * omega;
  Matrix core = omega.transpose() * Ys;
  core = (0.5 * (core + core.transpose())).eval();
  Eigen::LLT<Matrix> llt(core);
  if (llt.info() != Eigen::Success) return out;
  const Matrix Bt = llt.matrixL().solve(Ys.transpose());
  Eigen::BDCSVD<Matrix> svd(flush_tiny(Bt.transpose()), Eigen::ComputeThinU);
  const Vector d = (svd.singularValues().array().square() - nu).max(0.0);
  out.U = svd.matrixU();
  const double floor = d(d.size() - 1) + shift;
  out.scale = (floor / (d.array() + shift) - 1.0).matrix();
  return out;
}

Vector cg_impl(const SymmetricOperator& A, double shift, const Vector& b, const CgOptions& options,
               CgReport* report, const NystromPreconditioner* M) {
  require(b.size() == A.size(), ErrorCode::DimensionMismatch, "right-hand side must have m entries");
  require_finite(b, "right-hand side");
  require(options.tol > 0.0 && options.max_iterations >= 1, ErrorCode::InvalidArgument,
          "invalid CG options");
  Vector x = Vector::Zero(b.size());
  const double b_norm = b.norm();
  CgReport local;
  local.preconditioned = M != nullptr;
  if (b_norm == 0.0) {
    if (report) *report = local;
    return x;
  }
  Vector r = b;
  Vector z = M ? M->apply(r) : r;
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Vector Ap = A.apply(p) + shift * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) {
      throw Error(ErrorCode::NotConverged, "CG found a non-positive curvature direction");
    }
    const double alpha = rz / pAp;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * Ap;
    local.iterations = it;
    local.relative_residual = r.norm() / b_norm;
    if (local.relative_residual <= options.tol) {
      if (report) *report = local;
      return x;
    }
    z = M ? M->apply(r) : r;
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw Error(ErrorCode::NotConverged,
              std::string(M ? "preconditioned " : "") + "CG did not converge in " +
                  std::to_string(options.max_iterations) + " iterations (relative residual " +
                  std::to_string(local.relative_residual) + ")");
}

}  // namespace

Vector conjugate_gradient(const SymmetricOperator& A, double shift, const Vector& b,
                          const CgOptions& options, CgReport* report) {
  return cg_impl(A, shift, b, options, report, nullptr);
}

Vector nystrom_pcg(const SymmetricOperator& A, double shift, const Vector& b, Index rank,
                   const CgOptions& options, CgReport* report) {
  require(rank >= 0, ErrorCode::InvalidArgument, "preconditioner rank must be nonnegative");
  require(std::isfinite(shift) && shift > 0.0, ErrorCode::InvalidArgument, "shift must be positive");
  const NystromPreconditioner M = nystrom_preconditioner(A, shift, rank, options.seed);
  return cg_impl(A, shift, b, options, report, &M);
}

Vector posterior_mean(const CompositeOperator& A, const Vector& y, double lambda,
                      const CgOptions& options, CgReport* report) {
  require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidArgument,
          "lambda must be positive and finite");
  Vector x;
  try {
    x = conjugate_gradient(A, lambda, y, options, report);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotConverged || options.preconditioner_rank <= 0) throw;
    x = nystrom_pcg(A, lambda, y, std::min(A.order(), options.preconditioner_rank), options, report);
  }
  const KernelFactor& kernel = A.kernel();
  return kernel.apply_L(kernel.apply_Lt(A.phi().apply_transpose(x)));
}

double fit_metric(const Vector& theta_hat, const Vector& theta_true) {
  require(theta_hat.size() == theta_true.size() && theta_true.size() >= 1,
          ErrorCode::DimensionMismatch, "fit needs equal-length non-empty vectors");
  require_finite(theta_hat, "estimated FIR");
  require_finite(theta_true, "true FIR");
  const double spread = (theta_true.array() - theta_true.mean()).matrix().norm();
  require(spread > 0.0, ErrorCode::InvalidArgument, "fit is undefined for a constant true FIR");
  return 100.0 * (1.0 - (theta_hat - theta_true).norm() / spread);
}

}  // namespace firkrylov
