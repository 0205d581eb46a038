#include "ape/imm_baseline.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "ape/errors.hpp"

namespace ape {

namespace {

constexpr double kJitter = 1e-9;

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  sym.diagonal().array() += kJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericalBreakdown("Cholesky factorization failed");
  }
  return llt.matrixL();
}

struct SigmaWeights {
  double spread;  // sqrt(n + lambda)
  double w0_mean;
  double w0_cov;
  double wi;
};

SigmaWeights sigma_weights(int n, const SigmaPointParams& p) {
  double kappa = p.kappa;
  double lambda = p.alpha * p.alpha * (n + kappa) - n;
  if (n + lambda <= 1e-9) {
    kappa = 3.0 - n;
    lambda = p.alpha * p.alpha * (n + kappa) - n;
  }
  SigmaWeights w;
  w.spread = std::sqrt(n + lambda);
  w.w0_mean = lambda / (n + lambda);
  w.w0_cov = w.w0_mean + (1.0 - p.alpha * p.alpha + p.beta);
  w.wi = 1.0 / (2.0 * (n + lambda));
  return w;
}

}  // namespace

UnscentedResult unscented_transform(const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& cov,
                                    const VectorMap& f,
                                    const Eigen::MatrixXd& noise_cov,
                                    const SigmaPointParams& params,
                                    const std::vector<bool>& angular) {
  const int n = static_cast<int>(mean.size());
  const SigmaWeights w = sigma_weights(n, params);
  const Eigen::MatrixXd chol = cholesky_lower(cov);

  const int count = 2 * n + 1;
  std::vector<Eigen::VectorXd> in(count);
  in[0] = mean;
  for (int k = 0; k < n; ++k) {
    in[1 + k] = mean + w.spread * chol.col(k);
    in[1 + n + k] = mean - w.spread * chol.col(k);
  }
  std::vector<Eigen::VectorXd> out(count);
  for (int k = 0; k < count; ++k) out[k] = f(in[k]);

  const int m = static_cast<int>(out[0].size());
  auto mean_weight = [&](int k) { return k == 0 ? w.w0_mean : w.wi; };
  auto cov_weight = [&](int k) { return k == 0 ? w.w0_cov : w.wi; };
  auto is_angle = [&](int d) {
    return d < static_cast<int>(angular.size()) && angular[d];
  };

  Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(m);
  for (int d = 0; d < m; ++d) {
    if (is_angle(d)) {
      double s = 0.0, c = 0.0;
      for (int k = 0; k < count; ++k) {
        s += mean_weight(k) * std::sin(out[k][d]);
        c += mean_weight(k) * std::cos(out[k][d]);
      }
      y_mean[d] = std::atan2(s, c);
    } else {
      for (int k = 0; k < count; ++k) y_mean[d] += mean_weight(k) * out[k][d];
    }
  }

  UnscentedResult r;
  r.mean = y_mean;
  r.cov = noise_cov;
  r.cross = Eigen::MatrixXd::Zero(n, m);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd dy = out[k] - y_mean;
    for (int d = 0; d < m; ++d) {
      if (is_angle(d)) dy[d] = wrap_angle(dy[d]);
    }
    const Eigen::VectorXd dx = in[k] - mean;
    r.cov += cov_weight(k) * dy * dy.transpose();
    r.cross += cov_weight(k) * dx * dy.transpose();
  }
  r.cov = 0.5 * (r.cov + r.cov.transpose());
  return r;
}

GaussianBelief unscented_transform(const GaussianBelief& belief,
                                   const VectorMap& f,
                                   const Eigen::Matrix4d& noise_cov,
                                   const SigmaPointParams& params) {
  const UnscentedResult r =
      unscented_transform(belief.mean, belief.cov, f, noise_cov, params);
  if (r.mean.size() != 4) {
    throw ContractViolation("unscented_transform: map must return 4 components");
  }
  GaussianBelief out;
  out.mean = r.mean;
  out.cov = r.cov;
  return out;
}

UkfResult ukf_step_generic(const GaussianBelief& belief,
                           const Eigen::VectorXd& y, const VectorMap& transition,
                           const Eigen::Matrix4d& process_cov,
                           const VectorMap& measure,
                           const Eigen::MatrixXd& measurement_cov,
                           const std::vector<bool>& angular,
                           const SigmaPointParams& params) {
  const GaussianBelief pred =
      unscented_transform(belief, transition, process_cov, params);
  const UnscentedResult z = unscented_transform(pred.mean, pred.cov, measure,
                                                measurement_cov, params, angular);

  Eigen::VectorXd innov = y - z.mean;
  for (int d = 0; d < innov.size(); ++d) {
    if (d < static_cast<int>(angular.size()) && angular[d]) {
      innov[d] = wrap_angle(innov[d]);
    }
  }
  const Eigen::MatrixXd s_chol = cholesky_lower(z.cov);
  // K = C S^{-1} via the triangular factor of S.
  const Eigen::MatrixXd s_inv = s_chol.transpose()
                                    .triangularView<Eigen::Upper>()
                                    .solve(s_chol.triangularView<Eigen::Lower>()
                                               .solve(Eigen::MatrixXd::Identity(
                                                   z.cov.rows(), z.cov.cols())));
  const Eigen::MatrixXd gain = z.cross * s_inv;

  UkfResult out;
  out.belief.mean = pred.mean + gain * innov;
  Eigen::Matrix4d cov = pred.cov - gain * z.cov * gain.transpose();
  out.belief.cov = 0.5 * (cov + cov.transpose());

  const Eigen::VectorXd white =
      s_chol.triangularView<Eigen::Lower>().solve(innov);
  const double log_det = 2.0 * s_chol.diagonal().array().log().sum();
  const double m = static_cast<double>(innov.size());
  out.log_likelihood =
      -0.5 * (m * std::log(2.0 * kPi) + log_det + white.squaredNorm());
  return out;
}

UkfResult ukf_step(const GaussianBelief& belief, const Observation& y,
                   const ImmMode& mode, const CtConfig& ct,
                   const SensorPose& sensor, const SigmaPointParams& params) {
  const Eigen::Matrix4d f = ct_matrix(mode.omega, ct);
  const VectorMap transition = [&f](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return f * x;
  };
  const VectorMap measure = [&sensor](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Observation o = observe_mean(StateVector::from_eigen(x), sensor);
    return Eigen::Vector2d(o.range, o.bearing);
  };
  Eigen::Matrix2d r = Eigen::Matrix2d::Zero();
  r(0, 0) = mode.sigma_r2;
  r(1, 1) = mode.sigma_b2;
  return ukf_step_generic(belief, Eigen::Vector2d(y.range, y.bearing), transition,
                          process_noise_cov(mode.eta2, ct), measure, r,
                          {false, true}, params);
}

void ImmModelBank::validate() const {
  const auto m = static_cast<Eigen::Index>(modes.size());
  if (m < 1) throw ConfigError("IMM bank needs at least one mode");
  if (transition.rows() != m || transition.cols() != m) {
    throw ConfigError("IMM transition matrix has wrong shape");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if ((transition.row(i).array() < 0.0).any() ||
        std::abs(transition.row(i).sum() - 1.0) > 1e-12) {
      throw ConfigError("IMM transition row " + std::to_string(i) +
                        " is not a probability vector");
    }
  }
  for (const auto& mode : modes) {
    if (!(mode.eta2 > 0.0 && mode.sigma_r2 > 0.0 && mode.sigma_b2 > 0.0) ||
        !std::isfinite(mode.omega)) {
      throw ConfigError("IMM mode has invalid parameters");
    }
  }
}

BankSpec BankSpec::turn_grid(std::size_t omega_count) {
  BankSpec s;
  s.layout = Layout::TurnGrid;
  s.omega_count = omega_count;
  return s;
}

BankSpec BankSpec::product45() {
  BankSpec s;
  s.layout = Layout::TurnNoiseProduct;
  s.omega_count = 5;
  s.eta2_values = {2.0, 2.5, 3.0};
  const auto deg2 = [](double d) { return deg_to_rad(d) * deg_to_rad(d); };
  s.measurement_variances = {{50.0 * 50.0, deg2(1.0)},
                             {25.0 * 25.0, deg2(2.0)},
                             {100.0 * 100.0, deg2(1.0)}};
  return s;
}

namespace {

std::vector<double> omega_grid(std::size_t count, double max_deg) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = 0.0;
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) {
    const double deg = -max_deg + 2.0 * max_deg * static_cast<double>(k) /
                                      static_cast<double>(count - 1);
    out[k] = deg_to_rad(deg);
  }
  return out;
}

}  // namespace

ImmModelBank build_model_bank(const BankSpec& spec) {
  if (!(spec.stay_probability > 0.0 && spec.stay_probability <= 1.0)) {
    throw ConfigError("IMM stay probability must lie in (0, 1]");
  }
  ImmModelBank bank;
  switch (spec.layout) {
    case BankSpec::Layout::TurnGrid: {
      if (spec.omega_count < 1) throw ConfigError("IMM omega_count must be >= 1");
      for (double w : omega_grid(spec.omega_count, spec.omega_max_deg)) {
        const double eta2 = std::abs(w) < 1e-12 ? spec.eta2_straight : spec.eta2_turn;
        bank.modes.push_back({w, eta2, spec.sigma_r2, spec.sigma_b2});
      }
      break;
    }
    case BankSpec::Layout::TurnNoiseProduct: {
      if (spec.omega_count < 1 || spec.eta2_values.empty() ||
          spec.measurement_variances.empty()) {
        throw ConfigError("IMM product bank needs nonempty value lists");
      }
      for (double w : omega_grid(spec.omega_count, spec.omega_max_deg)) {
        for (double eta2 : spec.eta2_values) {
          for (const auto& [sr2, sb2] : spec.measurement_variances) {
            bank.modes.push_back({w, eta2, sr2, sb2});
          }
        }
      }
      break;
    }
    case BankSpec::Layout::Custom:
      if (spec.custom_modes.empty()) throw ConfigError("IMM custom bank is empty");
      bank.modes = spec.custom_modes;
      break;
  }
  const auto m = static_cast<Eigen::Index>(bank.modes.size());
  if (m == 1) {
    bank.transition = Eigen::MatrixXd::Ones(1, 1);
  } else {
    const double off = (1.0 - spec.stay_probability) / static_cast<double>(m - 1);
    bank.transition = Eigen::MatrixXd::Constant(m, m, off);
    bank.transition.diagonal().setConstant(spec.stay_probability);
    // Renormalize rows so they sum to one to the last ulp.
    for (Eigen::Index i = 0; i < m; ++i) {
      bank.transition.row(i) /= bank.transition.row(i).sum();
    }
  }
  bank.validate();
  return bank;
}

ImmState imm_initial_state(const ImmModelBank& bank, const GaussianBelief& prior) {
  ImmState s;
  s.beliefs.assign(bank.size(), prior);
  s.probs = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(bank.size()),
                                      1.0 / static_cast<double>(bank.size()));
  return s;
}

GaussianBelief fuse_beliefs(std::span<const GaussianBelief> beliefs,
                            const Eigen::VectorXd& probs) {
  GaussianBelief out;
  out.mean.setZero();
  out.cov.setZero();
  for (std::size_t j = 0; j < beliefs.size(); ++j) {
    out.mean += probs[static_cast<Eigen::Index>(j)] * beliefs[j].mean;
  }
  for (std::size_t j = 0; j < beliefs.size(); ++j) {
    const Eigen::Vector4d d = beliefs[j].mean - out.mean;
    out.cov += probs[static_cast<Eigen::Index>(j)] *
               (beliefs[j].cov + d * d.transpose());
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

ImmStepResult imm_step(const ImmState& state, const ImmModelBank& bank,
                       const Observation& y, const CtConfig& ct,
                       const SensorPose& sensor, const SigmaPointParams& params) {
  const auto m = static_cast<Eigen::Index>(bank.size());
  if (static_cast<Eigen::Index>(state.beliefs.size()) != m || state.probs.size() != m) {
    throw ContractViolation("imm_step: state does not match bank size");
  }
  require_normalized(std::span<const double>(state.probs.data(), state.probs.size()),
                     "imm_step mode probabilities");

  // Predicted mode probabilities and mixing weights mix(i, j) = P(i | j).
  const Eigen::VectorXd predicted = bank.transition.transpose() * state.probs;
  Eigen::MatrixXd mix(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      mix(i, j) = predicted[j] > 0.0
                      ? bank.transition(i, j) * state.probs[i] / predicted[j]
                      : (i == j ? 1.0 : 0.0);
    }
  }

  ImmStepResult out;
  out.state.beliefs.resize(bank.size());
  std::vector<double> log_post(bank.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    const GaussianBelief mixed = fuse_beliefs(state.beliefs, mix.col(j));
    const UkfResult r = ukf_step(mixed, y, bank.modes[j], ct, sensor, params);
    out.state.beliefs[j] = r.belief;
    log_post[j] = std::log(predicted[j]) + r.log_likelihood;
  }
  const auto probs = normalize_log_weights(log_post);
  out.state.probs = Eigen::Map<const Eigen::VectorXd>(probs.data(), m);
  out.fused = fuse_beliefs(out.state.beliefs, out.state.probs);

  out.param_estimate = {0.0, 0.0, 0.0, 0.0};
  for (Eigen::Index j = 0; j < m; ++j) {
    const double p = out.state.probs[j];
    out.param_estimate.omega += p * bank.modes[j].omega;
    out.param_estimate.eta2 += p * bank.modes[j].eta2;
    out.param_estimate.sigma_r2 += p * bank.modes[j].sigma_r2;
    out.param_estimate.sigma_b2 += p * bank.modes[j].sigma_b2;
  }
  out.omega_estimate = out.param_estimate.omega;
  return out;
}

}  // namespace ape
