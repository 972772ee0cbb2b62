#pragma once

#include "firkrylov/common.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace firkrylov {

/// Standard Gaussian sampler with a fully specified algorithm, so that the
/// same seed yields the same matrices on every platform.
///
/// Uniforms are the top 53 bits of std::mt19937_64; normals come from the
/// Marsaglia polar method, consuming pairs. std::normal_distribution is not
/// used because its algorithm is implementation-defined.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

  double operator()();

  /// Column-major fill: entry (i, j) is draw number j * rows + i.
  Matrix matrix(Index rows, Index cols);
  Vector vector(Index size);

 private:
  double uniform();

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Derives the seed for a named random stream (e.g. "omega", "noise").
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);

}  // namespace firkrylov
