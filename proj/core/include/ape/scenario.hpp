#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ape/core.hpp"
#include "ape/stochastics.hpp"
#include "ape/tracking_models.hpp"

namespace ape {

// One segment of the piecewise-constant turn-rate schedule. The value governs
// the transition into `start_step` and every later step until the next entry.
struct TurnSegment {
  std::size_t start_step = 1;
  double omega = 0.0;  // rad/s
};

struct ScenarioConfig {
  std::size_t horizon = 400;
  double dt = 1.0;
  StateVector initial_state;
  SensorPose sensor;
  std::vector<TurnSegment> omega_schedule;
  double eta2_true = 2.0;
  double sigma_r2_true = 2500.0;
  double sigma_b2_true = 0.0;
  SuffStats s0;
  Eigen::Matrix4d init_state_prior_cov = Eigen::Matrix4d::Identity();
  double omega_prior_lo = 0.0;
  double omega_prior_hi = 0.0;
  // Debug switch: simulate the truth without process noise.
  bool noiseless_truth = false;

  // Throws ConfigError on a malformed schedule or nonpositive variances.
  void validate() const;
  double omega_at(std::size_t step) const;
  CtConfig ct() const { return CtConfig{dt, 1e-6}; }
  ParamVector true_params(std::size_t step) const;
};

struct GroundTruth {
  StateVector initial_state;            // state before the first step
  std::vector<StateVector> states;      // steps 1..horizon
  std::vector<Observation> observations;
  std::vector<double> omegas;           // turn rate used to reach each step
  std::vector<std::size_t> changepoint_times;
};

// Ten-segment maneuvering scenario: 400 steps of 1 s, turn rates
// {0, 3, 0, 5.6, 0, 8.6, 0, -7.25, 0, 7.25} deg/s switching at
// {60, 120, 150, 214, 240, 272, 300, 338, 360}, eta2 = 2, range/bearing noise
// 50 m and 1 deg (standard deviations), target starting at (30 km, 300 m/s,
// 30 km, 0), sensor at (55 km, 55 km), s0 = (9, 15, 4, 5000, 4, 0.0025).
ScenarioConfig paper_scenario();

// States from the coordinated-turn model with the scheduled turn rates and
// true process noise; observations are the range-bearing mean plus Gaussian
// noise. Draw order per step: two process normals, range normal, bearing
// normal.
GroundTruth simulate(const ScenarioConfig& cfg, RngStream& rng);

// JSON scenario files. Angles use "_deg" keys and are converted on load.
std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

}  // namespace ape
