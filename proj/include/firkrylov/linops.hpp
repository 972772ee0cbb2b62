#pragma once

#include "firkrylov/common.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace firkrylov {

/// Input/output record of one identification experiment.
///
/// `u` and `y` have length m, the FIR order n satisfies 1 <= n <= m, and
/// `theta_true` (length n) is only present for synthetic data.
struct SystemData {
  Vector u;
  Vector y;
  Index n = 0;
  std::optional<Vector> theta_true;

  Index m() const { return u.size(); }
  void validate() const;
};

/// The m x n input matrix with entries Phi(i, j) = u(i - j - 1) for i > j
/// (0-based), zero otherwise. Products are evaluated as zero-padded linear
/// convolutions through a real FFT whose length is the next power of two
/// >= m + n - 1.
///
/// Instances are immutable and apply() may be called concurrently.
class ToeplitzOperator {
 public:
  ToeplitzOperator(Vector u, Index n);

  Index rows() const { return m_; }
  Index cols() const { return n_; }
  Index fft_length() const { return fft_length_; }
  const Vector& signal() const { return u_; }

  /// Phi * X for X with n rows.
  Matrix apply(const MatrixRef& X) const;
  /// Phi^T * X for X with m rows.
  Matrix apply_transpose(const MatrixRef& X) const;

 private:
  struct Plan;

  Vector u_;
  Index m_;
  Index n_;
  Index fft_length_;
  std::shared_ptr<const Plan> plan_;
};

enum class KernelKind { TC, DC, SS, DenseCustom };

/// Kernel hyperparameters. Only the fields used by `kind` are read:
/// TC and SS use `beta`; DC uses `beta`, `rho` and `c`.
struct KernelParams {
  KernelKind kind = KernelKind::TC;
  double beta = 0.5;
  double rho = 0.9;
  double c = 1.0;
};

const char* kernel_name(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);

/// Lower Cholesky factor L of a kernel matrix K = L L^T of order n.
///
/// The structured kinds are stored as L = D * Lhat, with D diagonal and
/// Lhat generated by a short recurrence:
///   TC  K(i,j) = beta^max(i,j)                    (DC with c = 1, rho = sqrt(beta))
///   DC  K(i,j) = c beta^((i+j)/2) rho^|i-j|       first-order recurrence
///   SS  K(i,j) = beta^(i+j+max)/2 - beta^(3max)/6 two-state innovations recurrence
/// (1-based indices). Applying L or L^T costs O(n) per column. DenseCustom
/// stores an explicit lower-triangular matrix and costs O(n^2).
class KernelFactor {
 public:
  static KernelFactor tc(Index n, double beta);
  static KernelFactor dc(Index n, double beta, double rho = 0.9, double c = 1.0);
  static KernelFactor ss(Index n, double beta);
  static KernelFactor dense_custom(Matrix lower);
  static KernelFactor make(const KernelParams& params, Index n);

  KernelFactor(const KernelFactor& other);
  KernelFactor& operator=(const KernelFactor& other);
  KernelFactor(KernelFactor&&) noexcept;
  KernelFactor& operator=(KernelFactor&&) noexcept;
  ~KernelFactor();

  Index order() const { return n_; }
  KernelKind kind() const { return params_.kind; }
  const KernelParams& params() const { return params_; }

  Matrix apply_L(const MatrixRef& X) const;
  Matrix apply_Lt(const MatrixRef& X) const;

  /// Floating-point operations performed by apply_L/apply_Lt so far.
  std::uint64_t op_count() const { return ops_.load(std::memory_order_relaxed); }
  void reset_op_count() { ops_.store(0, std::memory_order_relaxed); }

 private:
  struct SecondOrder;

  KernelFactor() = default;

  KernelParams params_;
  Index n_ = 0;
  Vector scale_;                 // diagonal of D
  double rho_ = 0.0;             // first-order recurrence coefficient
  double tail_gain_ = 0.0;       // sqrt(1 - rho^2)
  std::shared_ptr<const SecondOrder> second_order_;
  Matrix dense_lower_;
  mutable std::atomic<std::uint64_t> ops_{0};
};

/// Symmetric linear operator on R^m, applied to blocks of column vectors.
class SymmetricOperator {
 public:
  virtual ~SymmetricOperator() = default;
  virtual Index size() const = 0;
  virtual Matrix apply(const MatrixRef& X) const = 0;
};

/// A(beta) = Phi K Phi^T = (Phi L)(Phi L)^T, applied as Phi(L(L^T(Phi^T X))).
///
/// matvec_count() counts columns passed through apply(). The factor
/// products used by the indirect evaluator are counted separately in
/// factor_applications(): one per column of apply_factor_transpose(), which
/// together with the matching apply_factor() call costs the same as one
/// column of apply(). Counters are atomic; everything else is immutable.
class CompositeOperator final : public SymmetricOperator {
 public:
  CompositeOperator(ToeplitzOperator phi, KernelFactor kernel);

  Index size() const override { return phi_.rows(); }
  Index order() const { return phi_.cols(); }
  Matrix apply(const MatrixRef& X) const override;

  /// Phi L X for X with n rows.
  Matrix apply_factor(const MatrixRef& X) const;
  /// L^T Phi^T Z for Z with m rows.
  Matrix apply_factor_transpose(const MatrixRef& Z) const;

  const ToeplitzOperator& phi() const { return phi_; }
  const KernelFactor& kernel() const { return kernel_; }

  std::uint64_t matvec_count() const { return matvecs_.load(std::memory_order_relaxed); }
  std::uint64_t factor_applications() const {
    return factor_applications_.load(std::memory_order_relaxed);
  }

 private:
  ToeplitzOperator phi_;
  KernelFactor kernel_;
  mutable std::atomic<std::uint64_t> matvecs_{0};
  mutable std::atomic<std::uint64_t> factor_applications_{0};
};

/// Explicit symmetric matrix behind the operator interface; used as the
/// dense oracle and by the theory checks.
class DenseOperator final : public SymmetricOperator {
 public:
  explicit DenseOperator(Matrix A);

  Index size() const override { return A_.rows(); }
  Matrix apply(const MatrixRef& X) const override;
  const Matrix& matrix() const { return A_; }
  std::uint64_t matvec_count() const { return matvecs_.load(std::memory_order_relaxed); }

 private:
  Matrix A_;
  mutable std::atomic<std::uint64_t> matvecs_{0};
};

/// Materializes an operator column by column. Throws CapacityExceeded when
/// size() > max_size.
Matrix dense_materialize(const SymmetricOperator& A, Index max_size = 2000);

}  // namespace firkrylov
