#include "firkrylov/linops.hpp"

namespace firkrylov {

CompositeOperator::CompositeOperator(ToeplitzOperator phi, KernelFactor kernel)
    : phi_(std::move(phi)), kernel_(std::move(kernel)) {
  require(phi_.cols() == kernel_.order(), ErrorCode::DimensionMismatch,
          "kernel order must match the FIR order of the Toeplitz operator");
}

Matrix CompositeOperator::apply(const MatrixRef& X) const {
  require(X.rows() == size(), ErrorCode::DimensionMismatch, "operator apply expects m rows");
  matvecs_.fetch_add(static_cast<std::uint64_t>(X.cols()), std::memory_order_relaxed);
  return phi_.apply(kernel_.apply_L(kernel_.apply_Lt(phi_.apply_transpose(X))));
}

Matrix CompositeOperator::apply_factor(const MatrixRef& X) const {
  require(X.rows() == order(), ErrorCode::DimensionMismatch, "factor apply expects n rows");
  return phi_.apply(kernel_.apply_L(X));
}

Matrix CompositeOperator::apply_factor_transpose(const MatrixRef& Z) const {
  require(Z.rows() == size(), ErrorCode::DimensionMismatch,
          "factor transpose apply expects m rows");
  factor_applications_.fetch_add(static_cast<std::uint64_t>(Z.cols()), std::memory_order_relaxed);
  return kernel_.apply_Lt(phi_.apply_transpose(Z));
}

DenseOperator::DenseOperator(Matrix A) : A_(std::move(A)) {
  require(A_.rows() == A_.cols(), ErrorCode::DimensionMismatch, "dense operator must be square");
  require_finite(A_, "dense operator");
}

Matrix DenseOperator::apply(const MatrixRef& X) const {
  require(X.rows() == A_.rows(), ErrorCode::DimensionMismatch, "dense operator dimension mismatch");
  require_finite(X, "dense operator input");
  matvecs_.fetch_add(static_cast<std::uint64_t>(X.cols()), std::memory_order_relaxed);
  return A_ * X;
}

Matrix dense_materialize(const SymmetricOperator& A, Index max_size) {
  const Index m = A.size();
  require(m <= max_size, ErrorCode::CapacityExceeded,
          "operator of size " + std::to_string(m) + " exceeds the dense materialization cap of " +
              std::to_string(max_size));
  return A.apply(Matrix::Identity(m, m));
}

}  // namespace firkrylov
