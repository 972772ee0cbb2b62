#pragma once

#include "firkrylov/linops.hpp"

#include <vector>

namespace firkrylov {

struct LanczosOptions {
  /// Panel columns whose pivoted-QR diagonal falls below tau times the
  /// panel scale are deflated.
  double tau = 1e-10;
  /// Full block Gram-Schmidt passes against the whole basis per iteration.
  int reorth_passes = 2;
};

/// Orthonormal basis W of K_k(A, Z) together with the block-tridiagonal
/// compression T = W^T A W, stored blockwise.
///
/// diag_blocks[i] is M_{i+1} (width_i x width_i) and offdiag_blocks[i] is
/// N_{i+2} (width_{i+1} x width_i), the block below the diagonal.
struct BlockLanczosResult {
  Matrix basis;
  std::vector<Matrix> diag_blocks;
  std::vector<Matrix> offdiag_blocks;
  std::vector<Index> block_widths;
  bool breakdown = false;

  Index size() const { return basis.cols(); }
};

/// Block Lanczos with full reorthogonalization and pivoted-QR deflation.
///
/// Runs at most k iterations. If a panel deflates completely the
/// factorization stops early with `breakdown` set; the partial result is
/// still an exact compression of A onto an invariant subspace.
BlockLanczosResult block_lanczos(const SymmetricOperator& A, const MatrixRef& Z, int k,
                                 const LanczosOptions& options = {});

Matrix assemble_tridiagonal(const BlockLanczosResult& result);

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // columns match `values`
};

SymmetricEigen eig_sym(const MatrixRef& T);

}  // namespace firkrylov
