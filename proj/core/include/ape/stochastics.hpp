#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ape {

// A reproducible random stream identified by (seed, stream id). Two streams
// built from the same pair produce bit-identical draws. Streams are
// single-owner: pass them by reference, never share across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Uniform on [0, 1).
  double uniform01();
  double standard_normal();
  // Gamma(shape, scale = 1).
  double standard_gamma(double shape);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Systematic resampling: n indices at grid points (u + j) / n, j = 0..n-1,
// against the cumulative sums of w. Index i is selected when the grid point
// falls in [cum(i-1), cum(i)); ties go to the lower index.
std::vector<std::size_t> systematic_resample(std::span<const double> w,
                                             std::size_t n, double u);

// Draws u from the stream and calls the above.
std::vector<std::size_t> systematic_resample(std::span<const double> w,
                                             std::size_t n, RngStream& rng);

// Test-only reference scheme: n independent categorical draws.
std::vector<std::size_t> multinomial_resample(std::span<const double> w,
                                              std::size_t n, RngStream& rng);

// Inverse-gamma with density proportional to x^(-shape-1) exp(-scale / x).
// Note the conjugate statistics store (a, b) and pass shape = a/2, scale = b/2.
double sample_inverse_gamma(double shape, double scale, RngStream& rng);

double sample_gaussian(double mean, double var, RngStream& rng);

// Uniform on [lo, hi).
double sample_uniform(double lo, double hi, RngStream& rng);

}  // namespace ape
