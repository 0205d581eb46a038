#pragma once

#include <Eigen/Core>

#include "ape/core.hpp"
#include "ape/stochastics.hpp"

namespace ape {

struct SensorPose {
  double sx = 0.0;
  double sy = 0.0;
};

// Range in metres, bearing in radians wrapped to (-pi, pi].
struct Observation {
  double range = 0.0;
  double bearing = 0.0;
};

struct CtConfig {
  double dt = 1.0;
  // Below this |omega| the turn terms use their series expansion.
  double omega_epsilon = 1e-6;

  void validate() const;
};

// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Coordinated-turn transition acting on (x, vx, y, vy):
//
//   [1  s/w      0  -(1-c)/w]
//   [0  c        0  -s      ]
//   [0  (1-c)/w  1   s/w    ]
//   [0  s        0   c      ]
//
// with s = sin(w dt), c = cos(w dt). Reduces to constant velocity at w = 0.
Eigen::Matrix4d ct_matrix(double omega, const CtConfig& cfg);

// Noise gain: columns (dt/2, dt, 0, 0) and (0, 0, dt/2, dt).
Eigen::Matrix<double, 4, 2> noise_gain(const CtConfig& cfg);

// eta2 * G * G^T.
Eigen::Matrix4d process_noise_cov(double eta2, const CtConfig& cfg);

// F(omega) * x, the noiseless one-step prediction.
StateVector predict_mean(const StateVector& x, double omega,
                         const CtConfig& cfg);

// F(omega) x + G nu, nu ~ N(0, eta2 I2). Consumes two normal draws.
StateVector propagate(const StateVector& x, const ParamVector& p,
                      const CtConfig& cfg, RngStream& rng);

// Throws SingularGeometry when the target sits on the sensor.
Observation observe_mean(const StateVector& x, const SensorPose& s);

// Sum of independent Gaussian log-densities in range and wrapped bearing.
double log_likelihood(const Observation& y, const StateVector& x,
                      const ParamVector& p, const SensorPose& s);

// a += 4, b += r^T diag(G G^T)^{-1} r with r = x_new - F(omega) x_prev.
SuffStats update_suffstats_system(const SuffStats& st,
                                  const StateVector& x_prev,
                                  const StateVector& x_new, double omega,
                                  const CtConfig& cfg);

// c += 1, d += range residual^2, e += 1, f += wrapped bearing residual^2.
SuffStats update_suffstats_obs(const SuffStats& st, const StateVector& x,
                               const Observation& y, const SensorPose& s);

struct NoiseVariances {
  double eta2 = 0.0;
  double sigma_r2 = 0.0;
  double sigma_b2 = 0.0;
};

// Independent draws eta2 ~ IG(a/2, b/2), sigma_r2 ~ IG(c/2, d/2),
// sigma_b2 ~ IG(e/2, f/2).
NoiseVariances sample_params_from_suffstats(const SuffStats& st,
                                            RngStream& rng);

}  // namespace ape
