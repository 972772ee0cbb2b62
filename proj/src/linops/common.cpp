#include "firkrylov/common.hpp"
#include "firkrylov/rng.hpp"

#include <cmath>
#include <limits>

namespace firkrylov {

void require_finite(const MatrixRef& X, const char* what) {
  if (!X.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(what) + " contains non-finite entries");
  }
}

Matrix flush_tiny(const MatrixRef& X) {
  if (X.size() == 0) return X;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double cut = eps * eps * X.cwiseAbs().maxCoeff();
  return X.unaryExpr([cut](double v) { return std::abs(v) < cut ? 0.0 : v; });
}

double GaussianSampler::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double GaussianSampler::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

Matrix GaussianSampler::matrix(Index rows, Index cols) {
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = (*this)();
  return out;
}

Vector GaussianSampler::vector(Index size) {
  Vector out(size);
  for (Index i = 0; i < size; ++i) out(i) = (*this)();
  return out;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
  // FNV-1a over the stream name, folded into the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(seed ^ mix_seed(h));
}

}  // namespace firkrylov
