#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ape {

// Planar target state (x, vx, y, vy). Positions in metres, velocities in m/s.
struct StateVector {
  double x = 0.0;
  double vx = 0.0;
  double y = 0.0;
  double vy = 0.0;

  Eigen::Vector4d to_eigen() const { return {x, vx, y, vy}; }
  static StateVector from_eigen(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
  bool is_finite() const;

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

// Model parameters. omega is the time-varying turn rate (rad/s) learned with a
// shrinkage kernel; the three variances are static and learned through
// conjugate sufficient statistics.
struct ParamVector {
  double omega = 0.0;
  double eta2 = 1.0;      // process noise variance, (m/s^2)^2
  double sigma_r2 = 1.0;  // range noise variance, m^2
  double sigma_b2 = 1.0;  // bearing noise variance, rad^2

  bool is_valid() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

// Inverse-gamma statistics: eta2 ~ IG(a/2, b/2), sigma_r2 ~ IG(c/2, d/2),
// sigma_b2 ~ IG(e/2, f/2).
struct SuffStats {
  double a = 1.0, b = 1.0;
  double c = 1.0, d = 1.0;
  double e = 1.0, f = 1.0;

  bool is_valid() const;

  friend bool operator==(const SuffStats&, const SuffStats&) = default;
};

struct Particle {
  StateVector state;
  ParamVector params;
  SuffStats stats;
};

// N weighted particles. Weights are linear-scale probabilities summing to one.
struct ParticleCloud {
  std::vector<Particle> particles;
  std::vector<double> weights;

  std::size_t size() const { return particles.size(); }

  // Equal weights 1/N over the given particles.
  static ParticleCloud uniform(std::vector<Particle> particles);

  // Throws ContractViolation when sizes disagree, N == 0, or weights are not a
  // probability vector.
  void validate() const;
};

// Tolerance used when checking that an incoming weight vector is normalized.
inline constexpr double kWeightSumTolerance = 1e-9;

// exp(logw - max) / sum. Throws DegenerateWeights when every entry is -inf
// (or NaN), ContractViolation on empty input.
std::vector<double> normalize_log_weights(std::span<const double> logw);

// log-sum-exp with max subtraction; -inf for all -inf input.
double log_sum_exp(std::span<const double> logw);

// 1 / sum(w^2). Requires a normalized vector.
double effective_sample_size(std::span<const double> w);

// Throws ContractViolation unless w is nonnegative and sums to one.
void require_normalized(std::span<const double> w, const char* what);

StateVector weighted_state_mean(const ParticleCloud& cloud);
ParamVector weighted_param_mean(const ParticleCloud& cloud);

}  // namespace ape
