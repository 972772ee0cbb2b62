#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace firkrylov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using MatrixRef = Eigen::Ref<const Matrix>;

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch = 2,
  NonFinite = 3,
  NotConverged = 4,
  CapacityExceeded = 5,
  Io = 6,
  Internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Throws ErrorCode::NonFinite naming `what` if any entry is NaN or infinite.
void require_finite(const MatrixRef& X, const char* what);

/// Copy of X with entries below eps^2 times its largest magnitude set to
/// zero. Applied before BDCSVD, which can return NaN otherwise.
Matrix flush_tiny(const MatrixRef& X);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace firkrylov
