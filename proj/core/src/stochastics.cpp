#include "ape/stochastics.hpp"

#include <algorithm>
#include <cmath>

#include "ape/core.hpp"
#include "ape/errors.hpp"

namespace ape {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(stream >> 32), 0x41504531u};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  auto seq = make_seed_seq(seed, stream_id);
  engine_.seed(seq);
}

double RngStream::uniform01() {
  return std::generate_canonical<double, 64>(engine_);
}

double RngStream::standard_normal() { return normal_(engine_); }

double RngStream::standard_gamma(double shape) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return gamma(engine_);
}

std::vector<std::size_t> systematic_resample(std::span<const double> w,
                                             std::size_t n, double u) {
  require_normalized(w, "systematic_resample");
  if (n == 0) throw ContractViolation("systematic_resample: n must be >= 1");
  if (!(u >= 0.0 && u < 1.0)) {
    throw ContractViolation("systematic_resample: u must lie in [0, 1)");
  }
  // Last index carrying mass; guards against the cumulative sum falling a few
  // ulps short of one.
  std::size_t last = w.size() - 1;
  while (last > 0 && w[last] <= 0.0) --last;

  std::vector<std::size_t> out;
  out.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  std::size_t i = 0;
  double cum = w[0];
  for (std::size_t j = 0; j < n; ++j) {
    const double point = (u + static_cast<double>(j)) * step;
    while (point >= cum && i < last) {
      ++i;
      cum += w[i];
    }
    out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> w,
                                             std::size_t n, RngStream& rng) {
  return systematic_resample(w, n, rng.uniform01());
}

std::vector<std::size_t> multinomial_resample(std::span<const double> w,
                                              std::size_t n, RngStream& rng) {
  require_normalized(w, "multinomial_resample");
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<std::size_t> out(n);
  for (auto& idx : out) idx = pick(rng.engine());
  return out;
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) ||
      !std::isfinite(scale)) {
    throw ContractViolation("sample_inverse_gamma: shape and scale must be > 0");
  }
  // 1/X with X ~ Gamma(shape, rate = scale).
  double g = 0.0;
  do {
    g = rng.standard_gamma(shape);
  } while (g <= 0.0);
  return scale / g;
}

double sample_gaussian(double mean, double var, RngStream& rng) {
  if (!(var >= 0.0)) {
    throw ContractViolation("sample_gaussian: variance must be >= 0");
  }
  if (var == 0.0) return mean;
  return mean + std::sqrt(var) * rng.standard_normal();
}

double sample_uniform(double lo, double hi, RngStream& rng) {
  if (!(lo < hi)) throw ContractViolation("sample_uniform: require lo < hi");
  const double v = lo + (hi - lo) * rng.uniform01();
  return v < hi ? v : std::nextafter(hi, lo);
}

}  // namespace ape
