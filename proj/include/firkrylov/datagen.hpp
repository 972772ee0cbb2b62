#pragma once

#include "firkrylov/linops.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace firkrylov {

/// Synthetic experiment: white Gaussian input through G(z) = (1 - a z^-1)^-2,
/// output noise at a prescribed signal-to-noise power ratio. snr = +inf
/// produces noiseless data.
struct SynthSpec {
  double a = 0.2;
  Index m = 10000;
  Index n = 2000;
  double snr = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool noiseless() const { return std::isinf(snr); }
};

/// Converts a decibel SNR to a linear power ratio.
double snr_from_db(double db);

/// h_j = (j + 1) a^j for j = 0..n-1.
Vector true_fir(double a, Index n);

SystemData generate(const SynthSpec& spec);

/// Mean square of a signal.
double signal_power(const Vector& x);

}  // namespace firkrylov
