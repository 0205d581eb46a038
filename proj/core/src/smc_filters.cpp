#include "ape/smc_filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Cholesky>

#include "ape/auxiliary.hpp"
#include "ape/errors.hpp"

namespace ape {

double ApeConfig::a_shrink() const { return std::sqrt(1.0 - h2); }

void ApeConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("ApeConfig: beta must lie in (0, 1)");
  }
  if (!(h2 > 0.0 && h2 < 1.0)) {
    throw ConfigError("ApeConfig: h2 must lie in (0, 1)");
  }
  if (n_particles == 0) throw ConfigError("ApeConfig: n_particles must be >= 1");
}

KernelMoments weighted_moments(std::span<const double> values,
                               std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) {
    throw ContractViolation("weighted_moments: size mismatch");
  }
  KernelMoments m;
  const double ref = values[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    m.mean += weights[i] * (values[i] - ref);
  }
  m.mean += ref;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m.mean;
    m.var += weights[i] * d * d;
  }
  return m;
}

std::vector<double> kernel_locations(std::span<const double> values,
                                     std::span<const double> weights,
                                     double a_shrink) {
  const KernelMoments m = weighted_moments(values, weights);
  std::vector<double> loc(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    loc[i] = m.mean + a_shrink * (values[i] - m.mean);
  }
  return loc;
}

KernelMoments kernel_mixture_moments(std::span<const double> locations,
                                     std::span<const double> weights,
                                     double h2, double var) {
  KernelMoments spread = weighted_moments(locations, weights);
  spread.var += h2 * var;
  return spread;
}

namespace {

std::vector<double> log_weights(const ParticleCloud& cloud) {
  std::vector<double> lw(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) lw[i] = std::log(cloud.weights[i]);
  return lw;
}

// Noise variances for one particle: learned components drawn from the
// statistics, the rest clamped to the model's known values.
ParamVector draw_variances(const SuffStats& st, double omega,
                           const TrackingModel& model, RngStream& rng) {
  ParamVector p = model.known;
  p.omega = omega;
  if (model.learned.eta2) p.eta2 = sample_inverse_gamma(st.a / 2.0, st.b / 2.0, rng);
  if (model.learned.sigma_r2) {
    p.sigma_r2 = sample_inverse_gamma(st.c / 2.0, st.d / 2.0, rng);
  }
  if (model.learned.sigma_b2) {
    p.sigma_b2 = sample_inverse_gamma(st.e / 2.0, st.f / 2.0, rng);
  }
  return p;
}

SuffStats fold_step(const SuffStats& st, const StateVector& x_prev,
                    const StateVector& x_new, double omega,
                    const Observation& y, const TrackingModel& model) {
  const SuffStats sys = update_suffstats_system(st, x_prev, x_new, omega, model.ct);
  return update_suffstats_obs(sys, x_new, y, model.sensor);
}

SuffStats reset_stats(SuffStats st, const SuffStats& s0, const VarianceMask& mask) {
  if (mask.eta2) {
    st.a = s0.a;
    st.b = s0.b;
  }
  if (mask.sigma_r2) {
    st.c = s0.c;
    st.d = s0.d;
  }
  if (mask.sigma_b2) {
    st.e = s0.e;
    st.f = s0.f;
  }
  return st;
}

FilterStepResult finish(ParticleCloud cloud, double changepoint_mass) {
  FilterStepResult r;
  r.state_estimate = weighted_state_mean(cloud);
  r.param_estimate = weighted_param_mean(cloud);
  r.changepoint_mass = changepoint_mass;
  r.cloud = std::move(cloud);
  return r;
}

// Known-parameter state model for the generic auxiliary step.
struct FixedParamModel {
  using State = StateVector;
  using Observation = ape::Observation;

  const ParamVector& params;
  const TrackingModel& model;

  State predict(const State& x) const {
    return predict_mean(x, params.omega, model.ct);
  }
  State sample(const State& x, RngStream& rng) const {
    return propagate(x, params, model.ct, rng);
  }
  double log_likelihood(const Observation& y, const State& x) const {
    return ape::log_likelihood(y, x, params, model.sensor);
  }
};

// Per-particle parameters carried along with the state.
struct CarriedParamModel {
  using State = Particle;
  using Observation = ape::Observation;

  const TrackingModel& model;

  State predict(const State& p) const {
    State out = p;
    out.state = predict_mean(p.state, p.params.omega, model.ct);
    return out;
  }
  State sample(const State& p, RngStream& rng) const {
    State out = p;
    out.state = propagate(p.state, p.params, model.ct, rng);
    return out;
  }
  double log_likelihood(const Observation& y, const State& p) const {
    return ape::log_likelihood(y, p.state, p.params, model.sensor);
  }
};

struct KernelStepOptions {
  bool changepoints = false;
  bool final_resample = false;
  bool floor_variance = false;
};

// Shared body of the Liu-West and adaptive steps. The turn rate is moved with
// the shrinkage kernel; learned variances are drawn from the statistics at the
// start of the step and the statistics absorb the step at the end.
FilterStepResult kernel_step(const ParticleCloud& cloud, const Observation& y,
                             const ApeConfig& cfg, const TrackingModel& model,
                             RngStream& rng, const KernelStepOptions& opt) {
  cloud.validate();
  const std::size_t n = cloud.size();
  const double a = cfg.a_shrink();
  const double h2 = cfg.h2;

  std::vector<double> omegas(n);
  for (std::size_t i = 0; i < n; ++i) omegas[i] = cloud.particles[i].params.omega;
  const KernelMoments mom = weighted_moments(omegas, cloud.weights);
  double kernel_var = mom.var;
  if (opt.floor_variance) kernel_var = std::max(kernel_var, kKernelVarianceFloor);

  const auto prev_lw = log_weights(cloud);

  // No-change branch: shrunken kernel locations with freshly drawn variances.
  std::vector<ParamVector> stay(n);
  std::vector<double> stay_ll(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.particles[i];
    const double loc = mom.mean + a * (p.params.omega - mom.mean);
    stay[i] = draw_variances(p.stats, loc, model, rng);
    stay_ll[i] = log_likelihood(y, predict_mean(p.state, loc, model.ct), stay[i],
                                model.sensor);
  }

  // Changepoint branch: turn rate from its prior, fixed variances kept,
  // time-varying variances redrawn from s0.
  std::vector<ParamVector> change;
  std::vector<double> change_ll;
  if (opt.changepoints) {
    change.resize(n);
    change_ll.resize(n);
    const bool any_reset = cfg.reset_on_change.any();
    for (std::size_t i = 0; i < n; ++i) {
      ParamVector g = stay[i];
      g.omega = sample_uniform(model.omega_lo, model.omega_hi, rng);
      if (any_reset) {
        const ParamVector fresh = draw_variances(model.s0, g.omega, model, rng);
        if (cfg.reset_on_change.eta2) g.eta2 = fresh.eta2;
        if (cfg.reset_on_change.sigma_r2) g.sigma_r2 = fresh.sigma_r2;
        if (cfg.reset_on_change.sigma_b2) g.sigma_b2 = fresh.sigma_b2;
      }
      change[i] = g;
      change_ll[i] = log_likelihood(
          y, predict_mean(cloud.particles[i].state, g.omega, model.ct), g,
          model.sensor);
    }
  }

  // Joint first-stage weights over the N (or 2N) candidates.
  std::vector<double> first;
  if (opt.changepoints) {
    first.resize(2 * n);
    const double log_stay = std::log1p(-cfg.beta);
    const double log_change = std::log(cfg.beta);
    for (std::size_t i = 0; i < n; ++i) {
      first[i] = prev_lw[i] + log_stay + stay_ll[i];
      first[n + i] = prev_lw[i] + log_change + change_ll[i];
    }
  } else {
    first.resize(n);
    for (std::size_t i = 0; i < n; ++i) first[i] = prev_lw[i] + stay_ll[i];
  }
  const auto first_w = normalize_log_weights(first);
  const auto picks = systematic_resample(first_w, n, rng);

  std::vector<Particle> next(n);
  std::vector<StateVector> prev_states(n);
  std::vector<double> second(n);
  std::size_t from_change = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = picks[j];
    Particle out;
    double denom = 0.0;
    if (k < n) {
      const auto& src = cloud.particles[k];
      out.params = stay[k];
      out.params.omega = sample_gaussian(stay[k].omega, h2 * kernel_var, rng);
      out.stats = src.stats;
      prev_states[j] = src.state;
      denom = stay_ll[k];
    } else {
      const std::size_t kk = k - n;
      const auto& src = cloud.particles[kk];
      out.params = change[kk];
      out.stats = reset_stats(src.stats, model.s0, cfg.reset_on_change);
      prev_states[j] = src.state;
      denom = change_ll[kk];
      ++from_change;
    }
    out.state = propagate(prev_states[j], out.params, model.ct, rng);
    second[j] = log_likelihood(y, out.state, out.params, model.sensor) - denom;
    next[j] = out;
  }
  const auto w = normalize_log_weights(second);
  const double cp_mass = static_cast<double>(from_change) / static_cast<double>(n);

  ParticleCloud result;
  if (opt.final_resample) {
    const auto idx = systematic_resample(w, n, rng);
    std::vector<Particle> chosen(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& p = next[idx[j]];
      chosen[j] = p;
      chosen[j].stats = fold_step(p.stats, prev_states[idx[j]], p.state,
                                  p.params.omega, y, model);
    }
    result = ParticleCloud::uniform(std::move(chosen));
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      next[j].stats = fold_step(next[j].stats, prev_states[j], next[j].state,
                                next[j].params.omega, y, model);
    }
    result.particles = std::move(next);
    result.weights = w;
  }
  return finish(std::move(result), cp_mass);
}

}  // namespace

FilterStepResult apf_step(const ParticleCloud& cloud, const Observation& y,
                          const ParamVector& fixed_params,
                          const TrackingModel& model, RngStream& rng) {
  cloud.validate();
  std::vector<StateVector> states(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) states[i] = cloud.particles[i].state;
  const FixedParamModel m{fixed_params, model};
  auto aux = auxiliary_step<FixedParamModel>(states, cloud.weights, m, y, rng);

  ParticleCloud next;
  next.particles.resize(cloud.size());
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    next.particles[j] = cloud.particles[aux.ancestors[j]];
    next.particles[j].state = aux.states[j];
    next.particles[j].params = fixed_params;
  }
  next.weights = std::move(aux.weights);
  return finish(std::move(next), 0.0);
}

FilterStepResult lw_step(const ParticleCloud& cloud, const Observation& y,
                         const ApeConfig& cfg, const TrackingModel& model,
                         RngStream& rng) {
  if (!(cfg.h2 > 0.0 && cfg.h2 < 1.0)) {
    throw ConfigError("lw_step: h2 must lie in (0, 1)");
  }
  return kernel_step(cloud, y, cfg, model, rng,
                     {.changepoints = false, .final_resample = false,
                      .floor_variance = false});
}

FilterStepResult pl_step(const ParticleCloud& cloud, const Observation& y,
                         const TrackingModel& model, RngStream& rng) {
  cloud.validate();
  const CarriedParamModel m{model};
  auto aux = auxiliary_step<CarriedParamModel>(cloud.particles, cloud.weights,
                                               m, y, rng);
  ParticleCloud next;
  next.particles = std::move(aux.states);
  for (std::size_t j = 0; j < next.particles.size(); ++j) {
    auto& p = next.particles[j];
    const auto& prev = cloud.particles[aux.ancestors[j]].state;
    p.stats = fold_step(p.stats, prev, p.state, p.params.omega, y, model);
    p.params = draw_variances(p.stats, p.params.omega, model, rng);
  }
  next.weights = std::move(aux.weights);
  return finish(std::move(next), 0.0);
}

FilterStepResult ape_step(const ParticleCloud& cloud, const Observation& y,
                          const ApeConfig& cfg, const TrackingModel& model,
                          RngStream& rng) {
  cfg.validate();
  return kernel_step(cloud, y, cfg, model, rng,
                     {.changepoints = true, .final_resample = true,
                      .floor_variance = true});
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::Ape: return "ape";
    case FilterKind::LiuWest: return "lw";
    case FilterKind::ParticleLearning: return "pl";
    case FilterKind::Apf: return "apf";
  }
  return "unknown";
}

ParticleCloud initial_cloud(FilterKind kind, const FilterSetup& setup,
                            RngStream& rng) {
  const std::size_t n = setup.ape.n_particles;
  if (n == 0) throw ConfigError("initial_cloud: n_particles must be >= 1");
  const auto& model = setup.model;

  Eigen::Matrix4d cov = 0.5 * (setup.init_cov + setup.init_cov.transpose());
  Eigen::LLT<Eigen::Matrix4d> llt(cov + 1e-12 * Eigen::Matrix4d::Identity());
  if (llt.info() != Eigen::Success) {
    throw ConfigError("initial_cloud: init_cov is not positive definite");
  }
  const Eigen::Matrix4d chol = llt.matrixL();
  const Eigen::Vector4d mean = setup.init_mean.to_eigen();

  std::vector<Particle> ps(n);
  for (auto& p : ps) {
    Eigen::Vector4d z;
    for (int k = 0; k < 4; ++k) z[k] = rng.standard_normal();
    p.state = StateVector::from_eigen(mean + chol * z);
    p.stats = model.s0;
    if (kind == FilterKind::Apf) {
      p.params = setup.apf_schedule.empty() ? setup.apf_params
                                            : setup.apf_schedule.front();
    } else {
      const double omega = sample_uniform(model.omega_lo, model.omega_hi, rng);
      p.params = draw_variances(model.s0, omega, model, rng);
    }
  }
  return ParticleCloud::uniform(std::move(ps));
}

FilterStepResult filter_step(FilterKind kind, const ParticleCloud& cloud,
                             const Observation& y, const FilterSetup& setup,
                             RngStream& rng) {
  switch (kind) {
    case FilterKind::Ape: return ape_step(cloud, y, setup.ape, setup.model, rng);
    case FilterKind::LiuWest: return lw_step(cloud, y, setup.ape, setup.model, rng);
    case FilterKind::ParticleLearning: return pl_step(cloud, y, setup.model, rng);
    case FilterKind::Apf:
      return apf_step(cloud, y, setup.apf_params, setup.model, rng);
  }
  throw ConfigError("filter_step: unknown filter kind");
}

FilterTrace trace_filter(FilterKind kind,
                         std::span<const Observation> observations,
                         const FilterSetup& setup, RngStream& rng) {
  if (observations.empty()) {
    throw ContractViolation("run_filter: observation sequence is empty");
  }
  FilterTrace trace;
  trace.estimates.reserve(observations.size());
  ParticleCloud cloud = initial_cloud(kind, setup, rng);
  for (std::size_t t = 0; t < observations.size(); ++t) {
    try {
      FilterStepResult r =
          (kind == FilterKind::Apf && t < setup.apf_schedule.size())
              ? apf_step(cloud, observations[t], setup.apf_schedule[t],
                         setup.model, rng)
              : filter_step(kind, cloud, observations[t], setup, rng);
      trace.estimates.push_back(r.estimate());
      cloud = std::move(r.cloud);
    } catch (const DegenerateWeights& e) {
      trace.failed_step = t + 1;
      trace.failure = e.what();
      break;
    }
  }
  trace.final_cloud = std::move(cloud);
  return trace;
}

std::vector<StepEstimate> run_filter(FilterKind kind,
                                     std::span<const Observation> observations,
                                     const FilterSetup& setup, RngStream& rng) {
  FilterTrace trace = trace_filter(kind, observations, setup, rng);
  if (trace.failed_step) {
    throw DegenerateWeights(to_string(kind) + " filter degenerate at t=" +
                            std::to_string(*trace.failed_step) + ": " +
                            trace.failure);
  }
  return std::move(trace.estimates);
}

}  // namespace ape
