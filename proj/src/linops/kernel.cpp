#include "firkrylov/linops.hpp"

#include <Eigen/LU>

#include <cmath>

namespace firkrylov {

// SS kernel: K(i,j) is the covariance of integrated Brownian motion
// X(t) = int_0^t W(s) ds sampled at t_i = beta^i. In the scaled state
// z_i = (X / t^1.5, W / t^0.5) the process is stationary with covariance
// P = [[1/3, 1/2], [1/2, 1]], and stepping from t_{i-1} to t_i = beta t_{i-1}
// is a fixed linear Gaussian transition z_i = G z_{i-1} + noise(Q). The lower
// Cholesky factor of the scaled kernel is the innovations representation of
// observing the first state component in index order, computed once by a
// Kalman recursion.
struct KernelFactor::SecondOrder {
  Eigen::Matrix2d transition;
  std::vector<double> innovation_std;        // d_i
  std::vector<Eigen::Vector2d> gain;         // k_i = P_pred e_1 / d_i^2
};

namespace {

void check_unit_interval(double beta, const char* name) {
  require(std::isfinite(beta) && beta > 0.0 && beta < 1.0, ErrorCode::InvalidArgument,
          std::string(name) + " kernel requires beta in (0, 1)");
}

}  // namespace

const char* kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::TC: return "tc";
    case KernelKind::DC: return "dc";
    case KernelKind::SS: return "ss";
    case KernelKind::DenseCustom: return "dense";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "tc" || name == "TC") return KernelKind::TC;
  if (name == "dc" || name == "DC") return KernelKind::DC;
  if (name == "ss" || name == "SS") return KernelKind::SS;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + name + "' (expected tc, dc or ss)");
}

KernelFactor KernelFactor::tc(Index n, double beta) {
  check_unit_interval(beta, "TC");
  KernelFactor f = dc(n, beta, std::sqrt(beta), 1.0);
  f.params_ = {KernelKind::TC, beta, 0.0, 1.0};
  return f;
}

KernelFactor KernelFactor::dc(Index n, double beta, double rho, double c) {
  require(n >= 1, ErrorCode::InvalidArgument, "kernel order must be positive");
  check_unit_interval(beta, "DC");
  require(std::isfinite(rho) && rho > -1.0 && rho < 1.0, ErrorCode::InvalidArgument,
          "DC kernel requires rho in (-1, 1)");
  require(std::isfinite(c) && c > 0.0, ErrorCode::InvalidArgument, "DC kernel requires c > 0");
  KernelFactor f;
  f.params_ = {KernelKind::DC, beta, rho, c};
  f.n_ = n;
  f.rho_ = rho;
  f.tail_gain_ = std::sqrt(1.0 - rho * rho);
  f.scale_.resize(n);
  const double root_c = std::sqrt(c);
  const double half_log_beta = 0.5 * std::log(beta);
  for (Index i = 0; i < n; ++i) f.scale_(i) = root_c * std::exp(half_log_beta * static_cast<double>(i + 1));
  return f;
}

KernelFactor KernelFactor::ss(Index n, double beta) {
  require(n >= 1, ErrorCode::InvalidArgument, "kernel order must be positive");
  check_unit_interval(beta, "SS");
  KernelFactor f;
  f.params_ = {KernelKind::SS, beta, 0.0, 1.0};
  f.n_ = n;
  f.scale_.resize(n);
  const double log_beta = std::log(beta);
  for (Index i = 0; i < n; ++i) f.scale_(i) = std::exp(1.5 * log_beta * static_cast<double>(i + 1));

  Eigen::Matrix2d P;
  P << 1.0 / 3.0, 0.5, 0.5, 1.0;
  Eigen::Matrix2d E;
  const double sb = std::sqrt(beta);
  E << beta * sb, 0.0, sb * (1.0 - beta), sb;
  const Eigen::Matrix2d G = P * E * P.inverse();
  Eigen::Matrix2d Q = P - G * P * G.transpose();
  Q = (0.5 * (Q + Q.transpose())).eval();

  auto so = std::make_shared<SecondOrder>();
  so->transition = G;
  so->innovation_std.resize(static_cast<size_t>(n));
  so->gain.resize(static_cast<size_t>(n));
  Eigen::Matrix2d predicted = P;
  for (Index i = 0; i < n; ++i) {
    const double s = predicted(0, 0);
    require(s > 0.0, ErrorCode::Internal, "SS kernel factorization lost positive definiteness");
    const Eigen::Vector2d col = predicted.col(0);
    so->innovation_std[static_cast<size_t>(i)] = std::sqrt(s);
    so->gain[static_cast<size_t>(i)] = col / s;
    Eigen::Matrix2d filtered = predicted - col * col.transpose() / s;
    predicted = G * filtered * G.transpose() + Q;
    predicted = (0.5 * (predicted + predicted.transpose())).eval();
  }
  f.second_order_ = std::move(so);
  return f;
}

KernelFactor KernelFactor::dense_custom(Matrix lower) {
  require(lower.rows() == lower.cols() && lower.rows() >= 1, ErrorCode::DimensionMismatch,
          "custom kernel factor must be square and non-empty");
  require_finite(lower, "custom kernel factor");
  for (Index j = 1; j < lower.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      require(lower(i, j) == 0.0, ErrorCode::InvalidArgument,
              "custom kernel factor must be lower triangular");
  KernelFactor f;
  f.params_ = {KernelKind::DenseCustom, 0.0, 0.0, 1.0};
  f.n_ = lower.rows();
  f.dense_lower_ = std::move(lower);
  return f;
}

KernelFactor KernelFactor::make(const KernelParams& p, Index n) {
  switch (p.kind) {
    case KernelKind::TC: return tc(n, p.beta);
    case KernelKind::DC: return dc(n, p.beta, p.rho, p.c);
    case KernelKind::SS: return ss(n, p.beta);
    case KernelKind::DenseCustom: break;
  }
  throw Error(ErrorCode::InvalidArgument, "dense custom kernels need an explicit factor");
}

KernelFactor::KernelFactor(const KernelFactor& o)
    : params_(o.params_), n_(o.n_), scale_(o.scale_), rho_(o.rho_), tail_gain_(o.tail_gain_),
      second_order_(o.second_order_), dense_lower_(o.dense_lower_), ops_(0) {}

KernelFactor& KernelFactor::operator=(const KernelFactor& o) {
  if (this != &o) {
    params_ = o.params_;
    n_ = o.n_;
    scale_ = o.scale_;
    rho_ = o.rho_;
    tail_gain_ = o.tail_gain_;
    second_order_ = o.second_order_;
    dense_lower_ = o.dense_lower_;
    ops_.store(0);
  }
  return *this;
}

KernelFactor::KernelFactor(KernelFactor&& o) noexcept
    : params_(o.params_), n_(o.n_), scale_(std::move(o.scale_)), rho_(o.rho_),
      tail_gain_(o.tail_gain_), second_order_(std::move(o.second_order_)),
      dense_lower_(std::move(o.dense_lower_)), ops_(o.ops_.load()) {}

KernelFactor& KernelFactor::operator=(KernelFactor&& o) noexcept {
  params_ = o.params_;
  n_ = o.n_;
  scale_ = std::move(o.scale_);
  rho_ = o.rho_;
  tail_gain_ = o.tail_gain_;
  second_order_ = std::move(o.second_order_);
  dense_lower_ = std::move(o.dense_lower_);
  ops_.store(o.ops_.load());
  return *this;
}

KernelFactor::~KernelFactor() = default;

Matrix KernelFactor::apply_L(const MatrixRef& X) const {
  require(X.rows() == n_, ErrorCode::DimensionMismatch, "kernel factor expects n rows");
  require_finite(X, "kernel factor input");
  const Index cols = X.cols();
  if (params_.kind == KernelKind::DenseCustom) {
    ops_.fetch_add(static_cast<std::uint64_t>(n_ * n_ * cols), std::memory_order_relaxed);
    return dense_lower_.triangularView<Eigen::Lower>() * X;
  }
  Matrix out(n_, cols);
  if (second_order_) {
    const SecondOrder& so = *second_order_;
    for (Index c = 0; c < cols; ++c) {
      Eigen::Vector2d state = Eigen::Vector2d::Zero();
      for (Index i = 0; i < n_; ++i) {
        const double innovation = so.innovation_std[static_cast<size_t>(i)] * X(i, c);
        const Eigen::Vector2d predicted = so.transition * state;
        out(i, c) = scale_(i) * (predicted(0) + innovation);
        state = predicted + so.gain[static_cast<size_t>(i)] * innovation;
      }
    }
    ops_.fetch_add(static_cast<std::uint64_t>(14 * n_ * cols), std::memory_order_relaxed);
    return out;
  }
  for (Index c = 0; c < cols; ++c) {
    double acc = X(0, c);
    out(0, c) = scale_(0) * acc;
    for (Index i = 1; i < n_; ++i) {
      acc = rho_ * acc + tail_gain_ * X(i, c);
      out(i, c) = scale_(i) * acc;
    }
  }
  ops_.fetch_add(static_cast<std::uint64_t>(4 * n_ * cols), std::memory_order_relaxed);
  return out;
}

Matrix KernelFactor::apply_Lt(const MatrixRef& X) const {
  require(X.rows() == n_, ErrorCode::DimensionMismatch, "kernel factor expects n rows");
  require_finite(X, "kernel factor input");
  const Index cols = X.cols();
  if (params_.kind == KernelKind::DenseCustom) {
    ops_.fetch_add(static_cast<std::uint64_t>(n_ * n_ * cols), std::memory_order_relaxed);
    return dense_lower_.triangularView<Eigen::Lower>().transpose() * X;
  }
  Matrix out(n_, cols);
  if (second_order_) {
    // Adjoint of the innovations recurrence, run backwards with a costate.
    const SecondOrder& so = *second_order_;
    const Eigen::Matrix2d Gt = so.transition.transpose();
    for (Index c = 0; c < cols; ++c) {
      Eigen::Vector2d costate = Eigen::Vector2d::Zero();
      for (Index i = n_ - 1; i >= 0; --i) {
        const double z = scale_(i) * X(i, c);
        const double d = so.innovation_std[static_cast<size_t>(i)];
        out(i, c) = d * (z + so.gain[static_cast<size_t>(i)].dot(costate));
        costate = Gt * (Eigen::Vector2d(z, 0.0) + costate);
      }
    }
    ops_.fetch_add(static_cast<std::uint64_t>(14 * n_ * cols), std::memory_order_relaxed);
    return out;
  }
  for (Index c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (Index i = n_ - 1; i >= 1; --i) {
      acc = scale_(i) * X(i, c) + rho_ * acc;
      out(i, c) = tail_gain_ * acc;
    }
    acc = scale_(0) * X(0, c) + rho_ * acc;
    out(0, c) = acc;
  }
  ops_.fetch_add(static_cast<std::uint64_t>(4 * n_ * cols), std::memory_order_relaxed);
  return out;
}

}  // namespace firkrylov
