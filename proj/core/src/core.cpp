#include "ape/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ape/errors.hpp"

namespace ape {

bool StateVector::is_finite() const {
  return std::isfinite(x) && std::isfinite(vx) && std::isfinite(y) &&
         std::isfinite(vy);
}

bool ParamVector::is_valid() const {
  return std::isfinite(omega) && eta2 > 0.0 && sigma_r2 > 0.0 &&
         sigma_b2 > 0.0 && std::isfinite(eta2) && std::isfinite(sigma_r2) &&
         std::isfinite(sigma_b2);
}

bool SuffStats::is_valid() const {
  return a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0 && e > 0.0 && f > 0.0 &&
         std::isfinite(a + b + c + d + e + f);
}

ParticleCloud ParticleCloud::uniform(std::vector<Particle> particles) {
  ParticleCloud cloud;
  const auto n = particles.size();
  cloud.particles = std::move(particles);
  cloud.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  return cloud;
}

void ParticleCloud::validate() const {
  if (particles.empty()) {
    throw ContractViolation("particle cloud is empty");
  }
  if (particles.size() != weights.size()) {
    throw ContractViolation("particle and weight counts differ");
  }
  require_normalized(weights, "cloud weights");
}

void require_normalized(std::span<const double> w, const char* what) {
  if (w.empty()) {
    throw ContractViolation(std::string(what) + ": empty weight vector");
  }
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractViolation(std::string(what) +
                              ": weights must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw ContractViolation(std::string(what) + ": weights sum to " +
                            std::to_string(sum) + ", expected 1");
  }
}

double log_sum_exp(std::span<const double> logw) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : logw) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : logw) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

std::vector<double> normalize_log_weights(std::span<const double> logw) {
  if (logw.empty()) {
    throw ContractViolation("normalize_log_weights: empty input");
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : logw) {
    if (std::isnan(v)) {
      throw DegenerateWeights("normalize_log_weights: NaN log-weight");
    }
    hi = std::max(hi, v);
  }
  if (!(hi > -std::numeric_limits<double>::infinity())) {
    throw DegenerateWeights("all log-weights are -inf");
  }
  if (std::isinf(hi)) {
    throw DegenerateWeights("log-weight of +inf");
  }
  std::vector<double> w(logw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - hi);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

double effective_sample_size(std::span<const double> w) {
  require_normalized(w, "effective_sample_size");
  double sq = 0.0;
  for (double v : w) sq += v * v;
  const double ess = 1.0 / sq;
  // Rounding can push the ratio a hair outside [1, N].
  return std::clamp(ess, 1.0, static_cast<double>(w.size()));
}

StateVector weighted_state_mean(const ParticleCloud& cloud) {
  cloud.validate();
  // Accumulated relative to the first particle so identical particles give
  // their common value exactly.
  const Eigen::Vector4d ref = cloud.particles[0].state.to_eigen();
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    acc += cloud.weights[i] * (cloud.particles[i].state.to_eigen() - ref);
  }
  return StateVector::from_eigen(ref + acc);
}

ParamVector weighted_param_mean(const ParticleCloud& cloud) {
  cloud.validate();
  const ParamVector ref = cloud.particles[0].params;
  ParamVector m{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double w = cloud.weights[i];
    const auto& p = cloud.particles[i].params;
    m.omega += w * (p.omega - ref.omega);
    m.eta2 += w * (p.eta2 - ref.eta2);
    m.sigma_r2 += w * (p.sigma_r2 - ref.sigma_r2);
    m.sigma_b2 += w * (p.sigma_b2 - ref.sigma_b2);
  }
  return {ref.omega + m.omega, ref.eta2 + m.eta2, ref.sigma_r2 + m.sigma_r2,
          ref.sigma_b2 + m.sigma_b2};
}

}  // namespace ape
