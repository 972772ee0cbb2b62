#include "firkrylov/lanczos.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace firkrylov {

namespace {

struct DeflatedPanel {
  Matrix q;  // kept orthonormal columns
  Matrix r;  // kept rows of R, columns in the original order
};

// Column-pivoted Householder QR of Y; keeps the leading columns whose |R_jj|
// exceeds tau * scale. Eigen pivots on the first maximal column norm, so ties
// resolve to the lowest column index.
DeflatedPanel deflating_qr(const Matrix& Y, double tau, double scale) {
  Eigen::ColPivHouseholderQR<Matrix> qr(Y);
  const Matrix& packed = qr.matrixQR();
  const Index width = std::min(Y.rows(), Y.cols());
  const double threshold = tau * std::max(scale, width > 0 ? std::abs(packed(0, 0)) : 0.0);
  Index kept = 0;
  while (kept < width && std::abs(packed(kept, kept)) > threshold && threshold > 0.0) ++kept;

  DeflatedPanel out;
  Matrix thin = Matrix::Identity(Y.rows(), kept);
  out.q = qr.householderQ() * thin;
  Matrix r_perm = packed.topRows(kept).triangularView<Eigen::Upper>();
  out.r = r_perm * qr.colsPermutation().transpose();
  return out;
}

}  // namespace

BlockLanczosResult block_lanczos(const SymmetricOperator& A, const MatrixRef& Z, int k,
                                 const LanczosOptions& options) {
  const Index m = A.size();
  require(k >= 1, ErrorCode::InvalidArgument, "block Lanczos needs k >= 1");
  require(Z.rows() == m && Z.cols() >= 1, ErrorCode::DimensionMismatch,
          "starting block must have m rows and at least one column");
  require_finite(Z, "starting block");
  require(Z.norm() > 0.0, ErrorCode::InvalidArgument, "starting block is zero");
  require(options.tau > 0.0, ErrorCode::InvalidArgument, "deflation tolerance must be positive");

  BlockLanczosResult result;
  DeflatedPanel first = deflating_qr(Z, options.tau, 0.0);
  require(first.q.cols() > 0, ErrorCode::InvalidArgument, "starting block is numerically zero");

  Matrix current = std::move(first.q);
  Matrix previous;     // W_{i-1}
  Matrix coupling;     // N_i, width_i x width_{i-1}
  Matrix basis = current;

  for (int it = 1; it <= k; ++it) {
    result.block_widths.push_back(current.cols());
    Matrix AW = A.apply(current);
    if (!AW.allFinite()) {
      throw Error(ErrorCode::NonFinite,
                  "block Lanczos encountered non-finite values at iteration " + std::to_string(it));
    }
    const double scale = AW.colwise().norm().maxCoeff();
    Matrix Y = AW;
    if (previous.size() > 0) Y.noalias() -= previous * coupling.transpose();
    Matrix M = current.transpose() * Y;
    M = (0.5 * (M + M.transpose())).eval();
    result.diag_blocks.push_back(M);
    if (it == k) break;

    Y.noalias() -= current * M;
    for (int pass = 0; pass < options.reorth_passes; ++pass) {
      Y.noalias() -= basis * (basis.transpose() * Y);
    }
    if (!Y.allFinite()) {
      throw Error(ErrorCode::NonFinite,
                  "block Lanczos encountered non-finite values at iteration " + std::to_string(it));
    }

    DeflatedPanel panel = deflating_qr(Y, options.tau, scale);
    if (panel.q.cols() == 0 || basis.cols() >= m) {
      result.breakdown = true;
      break;
    }
    // Keep the new block exactly orthogonal to the basis after deflation.
    panel.q -= basis * (basis.transpose() * panel.q);
    Eigen::HouseholderQR<Matrix> polish(panel.q);
    const Matrix q_polished = polish.householderQ() * Matrix::Identity(m, panel.q.cols());
    const Matrix correction = q_polished.transpose() * panel.q;
    panel.r = correction * panel.r;
    panel.q = q_polished;

    previous = std::move(current);
    current = std::move(panel.q);
    coupling = std::move(panel.r);
    result.offdiag_blocks.push_back(coupling);
    basis.conservativeResize(Eigen::NoChange, basis.cols() + current.cols());
    basis.rightCols(current.cols()) = current;
  }

  result.basis = std::move(basis);
  return result;
}

Matrix assemble_tridiagonal(const BlockLanczosResult& result) {
  const Index r = result.size();
  Matrix T = Matrix::Zero(r, r);
  Index offset = 0;
  for (size_t b = 0; b < result.diag_blocks.size(); ++b) {
    const Index w = result.diag_blocks[b].rows();
    T.block(offset, offset, w, w) = result.diag_blocks[b];
    if (b < result.offdiag_blocks.size()) {
      const Matrix& N = result.offdiag_blocks[b];
      T.block(offset + w, offset, N.rows(), N.cols()) = N;
      T.block(offset, offset + w, N.cols(), N.rows()) = N.transpose();
    }
    offset += w;
  }
  return T;
}

SymmetricEigen eig_sym(const MatrixRef& T) {
  require(T.rows() == T.cols(), ErrorCode::DimensionMismatch, "eig_sym needs a square matrix");
  require_finite(T, "eig_sym input");
  SymmetricEigen out;
  if (T.rows() == 0) return out;
  const Matrix S = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(S);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NotConverged, "symmetric eigensolver did not converge");
  }
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace firkrylov
