#include "firkrylov/pml.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace firkrylov {

PmlEvaluation pml_eval_from_spectrum(const PmlSpectrum& spectrum, double lambda) {
  require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::InvalidArgument,
          "lambda must be positive and finite");
  require(spectrum.m >= 1 && spectrum.rank() <= spectrum.m, ErrorCode::InvalidArgument,
          "spectrum rank exceeds its ambient dimension");
  double quad = spectrum.leftover_mass / lambda;
  double trace = static_cast<double>(spectrum.m - spectrum.rank()) * std::log(lambda);
  for (Index i = 0; i < spectrum.rank(); ++i) {
    const double shifted = spectrum.thetas(i) + lambda;
    quad += spectrum.y_coeffs_sq(i) / shifted;
    trace += std::log(shifted);
  }
  require(quad > 0.0 && std::isfinite(quad), ErrorCode::InvalidArgument,
          "quadratic form is not positive (is y zero?)");
  const double m = static_cast<double>(spectrum.m);
  PmlEvaluation out;
  out.lambda = lambda;
  out.quad_term = std::log(quad);
  out.trace_term = trace / m;
  out.psi = out.quad_term + out.trace_term;
  out.nu_star = quad / m;
  return out;
}

PmlSpectrum pml_direct_precompute(const ToeplitzOperator& phi, const KernelFactor& kernel,
                                  const Vector& y, const DirectOptions& options) {
  const Index m = phi.rows();
  const Index n = phi.cols();
  require(y.size() == m, ErrorCode::DimensionMismatch, "y must have m entries");
  require(kernel.order() == n, ErrorCode::DimensionMismatch, "kernel order must equal n");
  require_finite(y, "output signal y");
  if (m > options.max_rows) {
    throw Error(ErrorCode::CapacityExceeded,
                "direct evaluator is capped at m = " + std::to_string(options.max_rows) +
                    " samples (got " + std::to_string(m) + "); use the krylov evaluator");
  }

  const Matrix factor = phi.apply(kernel.apply_L(Matrix::Identity(n, n)));
  Eigen::HouseholderQR<Matrix> qr(factor);
  const Vector qty = qr.householderQ().transpose() * y;
  const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Matrix> svd(flush_tiny(R), Eigen::ComputeFullU);

  PmlSpectrum out;
  out.m = m;
  out.thetas = svd.singularValues().array().square();
  const Vector coeffs = svd.matrixU().transpose() * qty.head(n);
  out.y_coeffs_sq = coeffs.array().square();
  out.leftover_mass = qty.tail(m - n).squaredNorm();
  for (Index i = 0; i < n; ++i) {
    if (out.thetas(i) == 0.0) {
      out.leftover_mass += out.y_coeffs_sq(i);
      out.y_coeffs_sq(i) = 0.0;
    }
  }
  return out;
}

PmlSpectrum pml_direct_precompute(const SystemData& data, const KernelFactor& kernel,
                                  const DirectOptions& options) {
  data.validate();
  if (data.m() > options.max_rows) {
    throw Error(ErrorCode::CapacityExceeded,
                "direct evaluator is capped at m = " + std::to_string(options.max_rows) +
                    " samples (got " + std::to_string(data.m()) + "); use the krylov evaluator");
  }
  return pml_direct_precompute(ToeplitzOperator(data.u, data.n), kernel, data.y, options);
}

}  // namespace firkrylov
