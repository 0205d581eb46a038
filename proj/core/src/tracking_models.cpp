#include "ape/tracking_models.hpp"

#include <cmath>

#include "ape/errors.hpp"

namespace ape {

void CtConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("CtConfig: dt must be > 0");
  if (!(omega_epsilon > 0.0)) {
    throw ConfigError("CtConfig: omega_epsilon must be > 0");
  }
}

double wrap_angle(double radians) {
  double r = std::remainder(radians, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

namespace {

struct TurnTerms {
  double sin_over_w;    // sin(w dt) / w
  double one_minus_cos; // (1 - cos(w dt)) / w
  double s;             // sin(w dt)
  double c;             // cos(w dt)
};

TurnTerms turn_terms(double omega, const CtConfig& cfg) {
  const double dt = cfg.dt;
  const double wt = omega * dt;
  TurnTerms t{};
  t.s = std::sin(wt);
  t.c = std::cos(wt);
  if (std::abs(omega) < cfg.omega_epsilon) {
    const double w2 = omega * omega;
    t.sin_over_w = dt - w2 * dt * dt * dt / 6.0;
    t.one_minus_cos = omega * dt * dt / 2.0 - w2 * omega * dt * dt * dt * dt / 24.0;
  } else {
    t.sin_over_w = t.s / omega;
    t.one_minus_cos = (1.0 - t.c) / omega;
  }
  return t;
}

}  // namespace

Eigen::Matrix4d ct_matrix(double omega, const CtConfig& cfg) {
  const TurnTerms t = turn_terms(omega, cfg);
  Eigen::Matrix4d f;
  // clang-format off
  f << 1.0, t.sin_over_w,    0.0, -t.one_minus_cos,
       0.0, t.c,             0.0, -t.s,
       0.0, t.one_minus_cos, 1.0, t.sin_over_w,
       0.0, t.s,             0.0, t.c;
  // clang-format on
  return f;
}

Eigen::Matrix<double, 4, 2> noise_gain(const CtConfig& cfg) {
  Eigen::Matrix<double, 4, 2> g = Eigen::Matrix<double, 4, 2>::Zero();
  g(0, 0) = cfg.dt / 2.0;
  g(1, 0) = cfg.dt;
  g(2, 1) = cfg.dt / 2.0;
  g(3, 1) = cfg.dt;
  return g;
}

Eigen::Matrix4d process_noise_cov(double eta2, const CtConfig& cfg) {
  const auto g = noise_gain(cfg);
  return eta2 * g * g.transpose();
}

StateVector predict_mean(const StateVector& x, double omega,
                         const CtConfig& cfg) {
  // Expanded product avoids building the 4x4 matrix in the particle loops.
  const TurnTerms t = turn_terms(omega, cfg);
  return {x.x + t.sin_over_w * x.vx - t.one_minus_cos * x.vy,
          t.c * x.vx - t.s * x.vy,
          x.y + t.one_minus_cos * x.vx + t.sin_over_w * x.vy,
          t.s * x.vx + t.c * x.vy};
}

StateVector propagate(const StateVector& x, const ParamVector& p,
                      const CtConfig& cfg, RngStream& rng) {
  StateVector out = predict_mean(x, p.omega, cfg);
  const double sd = std::sqrt(p.eta2);
  const double nu_x = sd * rng.standard_normal();
  const double nu_y = sd * rng.standard_normal();
  out.x += 0.5 * cfg.dt * nu_x;
  out.vx += cfg.dt * nu_x;
  out.y += 0.5 * cfg.dt * nu_y;
  out.vy += cfg.dt * nu_y;
  return out;
}

Observation observe_mean(const StateVector& x, const SensorPose& s) {
  const double dx = x.x - s.sx;
  const double dy = x.y - s.sy;
  if (dx == 0.0 && dy == 0.0) {
    throw SingularGeometry("target coincides with sensor");
  }
  return {std::hypot(dx, dy), wrap_angle(std::atan2(dy, dx))};
}

double log_likelihood(const Observation& y, const StateVector& x,
                      const ParamVector& p, const SensorPose& s) {
  static const double kLog2Pi = std::log(2.0 * kPi);
  const Observation m = observe_mean(x, s);
  const double dr = y.range - m.range;
  const double db = wrap_angle(y.bearing - m.bearing);
  return -0.5 * (2.0 * kLog2Pi + std::log(p.sigma_r2) + std::log(p.sigma_b2) +
                 dr * dr / p.sigma_r2 + db * db / p.sigma_b2);
}

SuffStats update_suffstats_system(const SuffStats& st,
                                  const StateVector& x_prev,
                                  const StateVector& x_new, double omega,
                                  const CtConfig& cfg) {
  const StateVector m = predict_mean(x_prev, omega, cfg);
  const double pos_var = cfg.dt * cfg.dt / 4.0;
  const double vel_var = cfg.dt * cfg.dt;
  const double rx = x_new.x - m.x;
  const double rvx = x_new.vx - m.vx;
  const double ry = x_new.y - m.y;
  const double rvy = x_new.vy - m.vy;
  SuffStats out = st;
  out.a += 4.0;
  out.b += rx * rx / pos_var + rvx * rvx / vel_var + ry * ry / pos_var +
           rvy * rvy / vel_var;
  return out;
}

SuffStats update_suffstats_obs(const SuffStats& st, const StateVector& x,
                               const Observation& y, const SensorPose& s) {
  const Observation m = observe_mean(x, s);
  const double dr = y.range - m.range;
  const double db = wrap_angle(y.bearing - m.bearing);
  SuffStats out = st;
  out.c += 1.0;
  out.d += dr * dr;
  out.e += 1.0;
  out.f += db * db;
  return out;
}

NoiseVariances sample_params_from_suffstats(const SuffStats& st,
                                            RngStream& rng) {
  NoiseVariances v;
  v.eta2 = sample_inverse_gamma(st.a / 2.0, st.b / 2.0, rng);
  v.sigma_r2 = sample_inverse_gamma(st.c / 2.0, st.d / 2.0, rng);
  v.sigma_b2 = sample_inverse_gamma(st.e / 2.0, st.f / 2.0, rng);
  return v;
}

}  // namespace ape
