#include "firkrylov/datagen.hpp"
#include "firkrylov/rng.hpp"

#include <cmath>

namespace firkrylov {

void SynthSpec::validate() const {
  require(std::isfinite(a) && a > 0.0 && a < 1.0, ErrorCode::InvalidArgument,
          "pole parameter a must lie in (0, 1)");
  require(m >= 2, ErrorCode::InvalidArgument, "need at least two samples");
  require(n >= 1 && n <= m, ErrorCode::InvalidArgument, "FIR order n must satisfy 1 <= n <= m");
  require(!std::isnan(snr) && snr > 0.0, ErrorCode::InvalidArgument, "snr must be positive");
}

double snr_from_db(double db) {
  require(!std::isnan(db), ErrorCode::InvalidArgument, "snr in dB must be a number");
  return std::pow(10.0, db / 10.0);
}

Vector true_fir(double a, Index n) {
  require(std::isfinite(a) && a >= 0.0 && a < 1.0, ErrorCode::InvalidArgument,
          "pole parameter a must lie in [0, 1)");
  require(n >= 1, ErrorCode::InvalidArgument, "FIR order must be positive");
  Vector h(n);
  double power = 1.0;
  for (Index j = 0; j < n; ++j) {
    h(j) = static_cast<double>(j + 1) * power;
    power *= a;
  }
  return h;
}

double signal_power(const Vector& x) {
  return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<double>(x.size());
}

SystemData generate(const SynthSpec& spec) {
  spec.validate();
  SystemData data;
  data.n = spec.n;
  GaussianSampler input(stream_seed(spec.seed, "input"));
  data.u = input.vector(spec.m);
  const Vector theta = true_fir(spec.a, spec.n);
  const ToeplitzOperator phi(data.u, spec.n);
  data.y = phi.apply(theta);
  if (!spec.noiseless()) {
    GaussianSampler noise_stream(stream_seed(spec.seed, "noise"));
    Vector noise = noise_stream.vector(spec.m);
    const double target = signal_power(data.y) / spec.snr;
    const double current = signal_power(noise);
    noise *= std::sqrt(target / current);
    data.y += noise;
  }
  data.theta_true = theta;
  return data;
}

}  // namespace firkrylov
