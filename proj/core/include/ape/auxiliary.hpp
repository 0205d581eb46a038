#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "ape/core.hpp"
#include "ape/errors.hpp"
#include "ape/stochastics.hpp"

namespace ape {

// Model interface for the generic resample-propagate step:
//   predict(x)           noiseless conditional mean of the next state
//   sample(x, rng)       draw from the transition density
//   log_likelihood(y, x) observation log-density
template <class M>
concept AuxiliaryModel = requires(const M& m, const typename M::State& x,
                                  const typename M::Observation& y,
                                  RngStream& rng) {
  { m.predict(x) } -> std::convertible_to<typename M::State>;
  { m.sample(x, rng) } -> std::convertible_to<typename M::State>;
  { m.log_likelihood(y, x) } -> std::convertible_to<double>;
};

template <class State>
struct AuxiliaryResult {
  std::vector<State> states;
  std::vector<double> weights;          // normalized
  std::vector<std::size_t> ancestors;   // index into the input for each output
  std::vector<double> pre_loglik;       // log p(y | predict(x_i)) per input
};

// One auxiliary particle filter step with known parameters:
//   1. first-stage weights  w_{t-1}^i * p(y | predict(x_i))
//   2. systematic resampling of N ancestors
//   3. propagate each survivor through the transition
//   4. second-stage weights p(y | x_t) / p(y | predict(x_k))
template <AuxiliaryModel M>
AuxiliaryResult<typename M::State> auxiliary_step(
    std::span<const typename M::State> states, std::span<const double> weights,
    const M& model, const typename M::Observation& y, RngStream& rng) {
  using State = typename M::State;
  const std::size_t n = states.size();
  if (n == 0 || weights.size() != n) {
    throw ContractViolation("auxiliary_step: state/weight size mismatch");
  }
  require_normalized(weights, "auxiliary_step");

  AuxiliaryResult<State> out;
  out.pre_loglik.resize(n);
  std::vector<double> first(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.pre_loglik[i] = model.log_likelihood(y, model.predict(states[i]));
    first[i] = std::log(weights[i]) + out.pre_loglik[i];
  }
  const auto first_w = normalize_log_weights(first);
  out.ancestors = systematic_resample(first_w, n, rng);

  out.states.reserve(n);
  std::vector<double> second(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = out.ancestors[j];
    out.states.push_back(model.sample(states[k], rng));
    second[j] = model.log_likelihood(y, out.states.back()) - out.pre_loglik[k];
  }
  out.weights = normalize_log_weights(second);
  return out;
}

}  // namespace ape
