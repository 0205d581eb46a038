#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ape/core.hpp"
#include "ape/tracking_models.hpp"

namespace ape {

struct GaussianBelief {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
};

// Scaled unscented transform parameters. lambda = alpha^2 (n + kappa) - n;
// if n + lambda collapses to (almost) zero, kappa = 3 - n is used instead.
struct SigmaPointParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
};

// Output of pushing a Gaussian through a nonlinear map with 2n + 1 sigma
// points. `angular[k]` marks output components that are angles: their mean is
// the circular mean and deviations are wrapped to (-pi, pi].
struct UnscentedResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;    // includes the additive noise
  Eigen::MatrixXd cross;  // E[(x - mean_x)(f(x) - mean)^T]
};

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

UnscentedResult unscented_transform(const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& cov,
                                    const VectorMap& f,
                                    const Eigen::MatrixXd& noise_cov,
                                    const SigmaPointParams& params = {},
                                    const std::vector<bool>& angular = {});

// Belief-level convenience for 4-dimensional state maps.
GaussianBelief unscented_transform(const GaussianBelief& belief,
                                   const VectorMap& f,
                                   const Eigen::Matrix4d& noise_cov,
                                   const SigmaPointParams& params = {});

struct UkfResult {
  GaussianBelief belief;
  double log_likelihood = 0.0;  // log N(innovation; 0, S)
};

// Generic predict + update. `transition` and `measure` act on the 4-state;
// measurement components flagged in `angular` are wrapped.
UkfResult ukf_step_generic(const GaussianBelief& belief,
                           const Eigen::VectorXd& y, const VectorMap& transition,
                           const Eigen::Matrix4d& process_cov,
                           const VectorMap& measure,
                           const Eigen::MatrixXd& measurement_cov,
                           const std::vector<bool>& angular,
                           const SigmaPointParams& params = {});

struct ImmMode {
  double omega = 0.0;  // rad/s
  double eta2 = 2.0;
  double sigma_r2 = 2500.0;
  double sigma_b2 = 3.0461741978670857e-4;
};

// Coordinated-turn predict with Q = eta2 G G^T, range-bearing update.
UkfResult ukf_step(const GaussianBelief& belief, const Observation& y,
                   const ImmMode& mode, const CtConfig& ct,
                   const SensorPose& sensor, const SigmaPointParams& params = {});

struct ImmModelBank {
  std::vector<ImmMode> modes;
  Eigen::MatrixXd transition;  // row i: P(next = j | current = i)

  std::size_t size() const { return modes.size(); }
  void validate() const;  // throws ConfigError
};

struct BankSpec {
  enum class Layout { TurnGrid, TurnNoiseProduct, Custom };

  Layout layout = Layout::TurnGrid;
  std::size_t omega_count = 20;
  double omega_max_deg = 20.0;
  // TurnGrid: eta2 for omega == 0 and for turning modes; measurement noise
  // shared by all modes.
  double eta2_straight = 2.0;
  double eta2_turn = 2.5;
  double sigma_r2 = 2500.0;
  double sigma_b2 = 3.0461741978670857e-4;
  // TurnNoiseProduct: Cartesian product omega x eta2 x (sigma_r2, sigma_b2).
  std::vector<double> eta2_values;
  std::vector<std::pair<double, double>> measurement_variances;
  // Custom: modes used as-is.
  std::vector<ImmMode> custom_modes;
  double stay_probability = 0.95;

  // omega_count equally spaced turn rates over [-20, 20] deg/s.
  static BankSpec turn_grid(std::size_t omega_count);
  // 5 turn rates x eta2 {2, 2.5, 3} x R {(50 m, 1 deg), (25 m, 2 deg),
  // (100 m, 1 deg)}.
  static BankSpec product45();
};

ImmModelBank build_model_bank(const BankSpec& spec);

struct ImmState {
  std::vector<GaussianBelief> beliefs;
  Eigen::VectorXd probs;
};

struct ImmStepResult {
  ImmState state;
  GaussianBelief fused;
  double omega_estimate = 0.0;
  ImmMode param_estimate;  // probability-weighted mode parameters
};

ImmState imm_initial_state(const ImmModelBank& bank, const GaussianBelief& prior);

// Mixing, mode-matched UKF steps, mode probability update, fusion.
ImmStepResult imm_step(const ImmState& state, const ImmModelBank& bank,
                       const Observation& y, const CtConfig& ct,
                       const SensorPose& sensor,
                       const SigmaPointParams& params = {});

// Moment-matched single Gaussian of a mixture.
GaussianBelief fuse_beliefs(std::span<const GaussianBelief> beliefs,
                            const Eigen::VectorXd& probs);

}  // namespace ape
