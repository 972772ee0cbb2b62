#include "firkrylov/linops.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

namespace firkrylov {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

RealBuffer alloc_real(Index n) { return RealBuffer(fftw_alloc_real(static_cast<size_t>(n))); }
ComplexBuffer alloc_complex(Index n) {
  return ComplexBuffer(fftw_alloc_complex(static_cast<size_t>(n)));
}

Index next_pow2(Index x) {
  Index p = 1;
  while (p < x) p <<= 1;
  return p;
}

}  // namespace

struct ToeplitzOperator::Plan {
  Index length = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> signal_hat;  // FFT of u(0..m-2), zero padded

  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  Index spectrum_size() const { return length / 2 + 1; }
};

ToeplitzOperator::ToeplitzOperator(Vector u, Index n) : u_(std::move(u)), m_(u_.size()), n_(n) {
  require(m_ >= 1, ErrorCode::InvalidArgument, "input signal must be non-empty");
  require(n_ >= 1 && n_ <= m_, ErrorCode::InvalidArgument,
          "FIR order n must satisfy 1 <= n <= m");
  require_finite(u_, "input signal u");

  fft_length_ = next_pow2(m_ + n_ - 1);
  auto plan = std::make_shared<Plan>();
  plan->length = fft_length_;
  if (m_ > 1) {
    const Index L = fft_length_;
    RealBuffer real = alloc_real(L);
    ComplexBuffer spec = alloc_complex(plan->spectrum_size());
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      plan->forward = fftw_plan_dft_r2c_1d(static_cast<int>(L), real.get(), spec.get(), FFTW_ESTIMATE);
      plan->backward = fftw_plan_dft_c2r_1d(static_cast<int>(L), spec.get(), real.get(), FFTW_ESTIMATE);
    }
    std::fill(real.get(), real.get() + L, 0.0);
    std::copy(u_.data(), u_.data() + (m_ - 1), real.get());
    fftw_execute_dft_r2c(plan->forward, real.get(), spec.get());
    plan->signal_hat.resize(static_cast<size_t>(plan->spectrum_size()));
    for (Index k = 0; k < plan->spectrum_size(); ++k)
      plan->signal_hat[static_cast<size_t>(k)] = {spec.get()[k][0], spec.get()[k][1]};
  }
  plan_ = std::move(plan);
}

Matrix ToeplitzOperator::apply(const MatrixRef& X) const {
  require(X.rows() == n_, ErrorCode::DimensionMismatch, "Toeplitz apply expects n rows");
  require_finite(X, "Toeplitz apply input");
  Matrix out = Matrix::Zero(m_, X.cols());
  if (m_ == 1 || X.cols() == 0) return out;

  const Index L = fft_length_;
  const Index S = plan_->spectrum_size();
  RealBuffer real = alloc_real(L);
  ComplexBuffer spec = alloc_complex(S);
  const double inv_len = 1.0 / static_cast<double>(L);
  for (Index col = 0; col < X.cols(); ++col) {
    std::fill(real.get(), real.get() + L, 0.0);
    for (Index j = 0; j < n_; ++j) real.get()[j] = X(j, col);
    fftw_execute_dft_r2c(plan_->forward, real.get(), spec.get());
    for (Index k = 0; k < S; ++k) {
      const std::complex<double> x(spec.get()[k][0], spec.get()[k][1]);
      const std::complex<double> p = plan_->signal_hat[static_cast<size_t>(k)] * x;
      spec.get()[k][0] = p.real();
      spec.get()[k][1] = p.imag();
    }
    fftw_execute_dft_c2r(plan_->backward, spec.get(), real.get());
    // Row i (>= 1) of Phi x is entry i - 1 of the linear convolution.
    for (Index i = 1; i < m_; ++i) out(i, col) = real.get()[i - 1] * inv_len;
  }
  return out;
}

Matrix ToeplitzOperator::apply_transpose(const MatrixRef& X) const {
  require(X.rows() == m_, ErrorCode::DimensionMismatch, "Toeplitz transpose apply expects m rows");
  require_finite(X, "Toeplitz transpose input");
  Matrix out = Matrix::Zero(n_, X.cols());
  if (m_ == 1 || X.cols() == 0) return out;

  const Index L = fft_length_;
  const Index S = plan_->spectrum_size();
  RealBuffer real = alloc_real(L);
  ComplexBuffer spec = alloc_complex(S);
  const double inv_len = 1.0 / static_cast<double>(L);
  for (Index col = 0; col < X.cols(); ++col) {
    std::fill(real.get(), real.get() + L, 0.0);
    for (Index i = 0; i < m_; ++i) real.get()[i] = X(i, col);
    fftw_execute_dft_r2c(plan_->forward, real.get(), spec.get());
    for (Index k = 0; k < S; ++k) {
      const std::complex<double> x(spec.get()[k][0], spec.get()[k][1]);
      const std::complex<double> p = std::conj(plan_->signal_hat[static_cast<size_t>(k)]) * x;
      spec.get()[k][0] = p.real();
      spec.get()[k][1] = p.imag();
    }
    fftw_execute_dft_c2r(plan_->backward, spec.get(), real.get());
    // Cross-correlation at lag j + 1 gives row j of Phi^T z.
    for (Index j = 0; j < n_; ++j) out(j, col) = real.get()[j + 1] * inv_len;
  }
  return out;
}

void SystemData::validate() const {
  require(u.size() >= 1, ErrorCode::InvalidArgument, "system data is empty");
  require(u.size() == y.size(), ErrorCode::DimensionMismatch,
          "input and output signals must have the same length");
  require(n >= 1 && n <= u.size(), ErrorCode::InvalidArgument,
          "FIR order n must satisfy 1 <= n <= m");
  require_finite(u, "input signal u");
  require_finite(y, "output signal y");
  if (theta_true) {
    require(theta_true->size() == n, ErrorCode::DimensionMismatch,
            "ground-truth FIR must have length n");
    require_finite(*theta_true, "ground-truth FIR");
  }
}

}  // namespace firkrylov
