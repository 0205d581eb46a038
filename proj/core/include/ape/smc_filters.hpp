#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ape/core.hpp"
#include "ape/stochastics.hpp"
#include "ape/tracking_models.hpp"

namespace ape {

// Selects which of the three noise variances a filter component touches.
struct VarianceMask {
  bool eta2 = false;
  bool sigma_r2 = false;
  bool sigma_b2 = false;

  static VarianceMask all() { return {true, true, true}; }
  static VarianceMask none() { return {}; }
  bool any() const { return eta2 || sigma_r2 || sigma_b2; }
};

// Everything a filter needs to know about the tracking problem.
struct TrackingModel {
  CtConfig ct;
  SensorPose sensor;
  SuffStats s0{9.0, 15.0, 4.0, 5000.0, 4.0, 0.0025};
  // Variances not in `learned` stay clamped at these values.
  ParamVector known;
  VarianceMask learned = VarianceMask::all();
  // Uniform prior on the turn rate, used for initialization and for
  // changepoint proposals.
  double omega_lo = -deg_to_rad(20.0);
  double omega_hi = deg_to_rad(20.0);
};

struct ApeConfig {
  double beta = 0.05;  // prior changepoint probability per step
  double h2 = 0.01;    // kernel smoothing parameter
  std::size_t n_particles = 5000;
  // Conjugate variances treated as time-varying: on a changepoint their
  // statistics restart from s0 and the proposal redraws them from the prior.
  VarianceMask reset_on_change = VarianceMask::none();

  double a_shrink() const;
  void validate() const;  // throws ConfigError
};

// Floor applied to the turn-rate kernel variance in the adaptive filter.
inline constexpr double kKernelVarianceFloor = 1e-12;

struct StepEstimate {
  StateVector state;
  ParamVector params;
  double changepoint_mass = 0.0;
};

struct FilterStepResult {
  ParticleCloud cloud;
  StateVector state_estimate;
  ParamVector param_estimate;
  // Fraction of resampled particles taken from the changepoint branch.
  double changepoint_mass = 0.0;

  StepEstimate estimate() const {
    return {state_estimate, param_estimate, changepoint_mass};
  }
};

// -- Kernel shrinkage helpers -------------------------------------------------

struct KernelMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Weighted mean and (biased, weight-normalized) variance.
KernelMoments weighted_moments(std::span<const double> values,
                               std::span<const double> weights);

// a * theta_i + (1 - a) * mean, evaluated as mean + a * (theta_i - mean).
std::vector<double> kernel_locations(std::span<const double> values,
                                     std::span<const double> weights,
                                     double a_shrink);

// Mean and variance of sum_i w_i N(loc_i, h2 * var), computed analytically.
KernelMoments kernel_mixture_moments(std::span<const double> locations,
                                     std::span<const double> weights,
                                     double h2, double var);

// -- Filter steps -------------------------------------------------------------

// Auxiliary particle filter with every parameter fixed to `fixed_params`.
FilterStepResult apf_step(const ParticleCloud& cloud, const Observation& y,
                          const ParamVector& fixed_params,
                          const TrackingModel& model, RngStream& rng);

// Liu-West kernel shrinkage on the turn rate with no changepoint handling.
// Learned conjugate variances are drawn from each particle's statistics.
// When the weighted turn-rate variance is zero the turn rates stay at their
// kernel locations.
FilterStepResult lw_step(const ParticleCloud& cloud, const Observation& y,
                         const ApeConfig& cfg, const TrackingModel& model,
                         RngStream& rng);

// Particle learning: resample on predictive weights, propagate, fold the new
// state and observation into each particle's statistics, redraw the learned
// variances. Turn rates are carried unchanged.
FilterStepResult pl_step(const ParticleCloud& cloud, const Observation& y,
                         const TrackingModel& model, RngStream& rng);

// Adaptive parameter estimation step: 2N-way resampling over the no-change
// (kernel) branch and the changepoint branch, followed by propagation,
// reweighting, a final resample to equal weights and the statistics update.
FilterStepResult ape_step(const ParticleCloud& cloud, const Observation& y,
                          const ApeConfig& cfg, const TrackingModel& model,
                          RngStream& rng);

// -- Sequential driver --------------------------------------------------------

enum class FilterKind { Ape, LiuWest, ParticleLearning, Apf };

std::string to_string(FilterKind kind);

struct FilterSetup {
  ApeConfig ape;
  TrackingModel model;
  StateVector init_mean;
  Eigen::Matrix4d init_cov = Eigen::Matrix4d::Identity();
  // Parameters handed to the APF (normally the truth). When apf_schedule is
  // nonempty, step t (0-based) uses apf_schedule[t] instead.
  ParamVector apf_params;
  std::vector<ParamVector> apf_schedule;
};

// States ~ N(init_mean, init_cov); omega ~ U(omega_lo, omega_hi) (the APF
// uses apf_params instead); learned variances from s0, others clamped.
ParticleCloud initial_cloud(FilterKind kind, const FilterSetup& setup,
                            RngStream& rng);

FilterStepResult filter_step(FilterKind kind, const ParticleCloud& cloud,
                             const Observation& y, const FilterSetup& setup,
                             RngStream& rng);

struct FilterTrace {
  std::vector<StepEstimate> estimates;  // one per processed observation
  ParticleCloud final_cloud;
  // Set when a step threw DegenerateWeights; estimates stop before it.
  std::optional<std::size_t> failed_step;
  std::string failure;
};

// Runs to completion or to the first degenerate step without throwing.
FilterTrace trace_filter(FilterKind kind,
                         std::span<const Observation> observations,
                         const FilterSetup& setup, RngStream& rng);

// Same, but rethrows a step failure annotated with its (1-based) time step.
std::vector<StepEstimate> run_filter(FilterKind kind,
                                     std::span<const Observation> observations,
                                     const FilterSetup& setup, RngStream& rng);

}  // namespace ape
