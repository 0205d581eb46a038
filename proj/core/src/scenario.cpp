#include "ape/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ape/errors.hpp"
#include "json.hpp"

namespace ape {

using nlohmann::json;

void ScenarioConfig::validate() const {
  if (horizon == 0) throw ConfigError("scenario: horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("scenario: dt must be > 0");
  if (omega_schedule.empty() || omega_schedule.front().start_step != 1) {
    throw ConfigError("scenario: omega schedule must start at step 1");
  }
  for (std::size_t k = 1; k < omega_schedule.size(); ++k) {
    if (omega_schedule[k].start_step <= omega_schedule[k - 1].start_step) {
      throw ConfigError("scenario: schedule start steps must increase strictly");
    }
  }
  if (omega_schedule.back().start_step > horizon) {
    throw ConfigError("scenario: last schedule entry starts after the horizon");
  }
  for (const auto& seg : omega_schedule) {
    if (!std::isfinite(seg.omega)) throw ConfigError("scenario: non-finite omega");
  }
  if (!(eta2_true >= 0.0 && sigma_r2_true > 0.0 && sigma_b2_true > 0.0)) {
    throw ConfigError("scenario: noise variances must be positive");
  }
  if (!s0.is_valid()) throw ConfigError("scenario: s0 must be positive");
  if (!(omega_prior_lo < omega_prior_hi)) {
    throw ConfigError("scenario: omega prior needs lo < hi");
  }
  if (!initial_state.is_finite()) {
    throw ConfigError("scenario: initial state must be finite");
  }
}

double ScenarioConfig::omega_at(std::size_t step) const {
  double w = omega_schedule.empty() ? 0.0 : omega_schedule.front().omega;
  for (const auto& seg : omega_schedule) {
    if (seg.start_step <= step) w = seg.omega;
  }
  return w;
}

ParamVector ScenarioConfig::true_params(std::size_t step) const {
  return {omega_at(step), eta2_true, sigma_r2_true, sigma_b2_true};
}

ScenarioConfig paper_scenario() {
  ScenarioConfig cfg;
  cfg.horizon = 400;
  cfg.dt = 1.0;
  cfg.initial_state = {30000.0, 300.0, 30000.0, 0.0};
  cfg.sensor = {55000.0, 55000.0};
  const std::size_t starts[] = {1, 60, 120, 150, 214, 240, 272, 300, 338, 360};
  const double omegas_deg[] = {0, 3, 0, 5.6, 0, 8.6, 0, -7.25, 0, 7.25};
  for (std::size_t k = 0; k < 10; ++k) {
    cfg.omega_schedule.push_back({starts[k], deg_to_rad(omegas_deg[k])});
  }
  cfg.eta2_true = 2.0;
  cfg.sigma_r2_true = 50.0 * 50.0;
  cfg.sigma_b2_true = deg_to_rad(1.0) * deg_to_rad(1.0);
  cfg.s0 = {9.0, 15.0, 4.0, 5000.0, 4.0, 0.0025};
  cfg.init_state_prior_cov =
      Eigen::Vector4d(100.0 * 100.0, 10.0 * 10.0, 100.0 * 100.0, 10.0 * 10.0)
          .asDiagonal();
  cfg.omega_prior_lo = -deg_to_rad(20.0);
  cfg.omega_prior_hi = deg_to_rad(20.0);
  return cfg;
}

GroundTruth simulate(const ScenarioConfig& cfg, RngStream& rng) {
  cfg.validate();
  const CtConfig ct = cfg.ct();
  GroundTruth gt;
  gt.initial_state = cfg.initial_state;
  gt.states.reserve(cfg.horizon);
  gt.observations.reserve(cfg.horizon);
  gt.omegas.reserve(cfg.horizon);
  for (std::size_t k = 1; k < cfg.omega_schedule.size(); ++k) {
    gt.changepoint_times.push_back(cfg.omega_schedule[k].start_step);
  }

  const double sr = std::sqrt(cfg.sigma_r2_true);
  const double sb = std::sqrt(cfg.sigma_b2_true);
  StateVector x = cfg.initial_state;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    ParamVector p = cfg.true_params(t);
    if (cfg.noiseless_truth) {
      x = predict_mean(x, p.omega, ct);
    } else if (p.eta2 > 0.0) {
      x = propagate(x, p, ct, rng);
    } else {
      x = predict_mean(x, p.omega, ct);
    }
    const Observation m = observe_mean(x, cfg.sensor);
    Observation y;
    y.range = m.range + sr * rng.standard_normal();
    y.bearing = wrap_angle(m.bearing + sb * rng.standard_normal());
    gt.states.push_back(x);
    gt.observations.push_back(y);
    gt.omegas.push_back(p.omega);
  }
  return gt;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  j["initial_state"] = {{"x", cfg.initial_state.x},
                        {"vx", cfg.initial_state.vx},
                        {"y", cfg.initial_state.y},
                        {"vy", cfg.initial_state.vy}};
  j["sensor"] = {{"sx", cfg.sensor.sx}, {"sy", cfg.sensor.sy}};
  json sched = json::array();
  for (const auto& seg : cfg.omega_schedule) {
    sched.push_back({{"start_step", seg.start_step},
                     {"omega_deg", rad_to_deg(seg.omega)}});
  }
  j["omega_schedule"] = sched;
  j["eta2_true"] = cfg.eta2_true;
  j["sigma_r2_true"] = cfg.sigma_r2_true;
  // Bearing variance in deg^2.
  j["sigma_b2_true_deg2"] = rad_to_deg(rad_to_deg(cfg.sigma_b2_true));
  j["s0"] = {{"a", cfg.s0.a}, {"b", cfg.s0.b}, {"c", cfg.s0.c},
             {"d", cfg.s0.d}, {"e", cfg.s0.e}, {"f", cfg.s0.f}};
  json cov = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(cfg.init_state_prior_cov(r, c));
    cov.push_back(row);
  }
  j["init_state_prior_cov"] = cov;
  j["omega_prior_deg"] = {rad_to_deg(cfg.omega_prior_lo),
                          rad_to_deg(cfg.omega_prior_hi)};
  j["noiseless_truth"] = cfg.noiseless_truth;
  return j.dump(2);
}

ScenarioConfig scenario_from_json(const std::string& text) {
  ScenarioConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.horizon = j.at("horizon").get<std::size_t>();
    cfg.dt = j.at("dt").get<double>();
    const auto& x0 = j.at("initial_state");
    cfg.initial_state = {x0.at("x").get<double>(), x0.at("vx").get<double>(),
                         x0.at("y").get<double>(), x0.at("vy").get<double>()};
    cfg.sensor = {j.at("sensor").at("sx").get<double>(),
                  j.at("sensor").at("sy").get<double>()};
    for (const auto& seg : j.at("omega_schedule")) {
      cfg.omega_schedule.push_back({seg.at("start_step").get<std::size_t>(),
                                    deg_to_rad(seg.at("omega_deg").get<double>())});
    }
    cfg.eta2_true = j.at("eta2_true").get<double>();
    cfg.sigma_r2_true = j.at("sigma_r2_true").get<double>();
    cfg.sigma_b2_true =
        deg_to_rad(deg_to_rad(j.at("sigma_b2_true_deg2").get<double>()));
    const auto& s0 = j.at("s0");
    cfg.s0 = {s0.at("a").get<double>(), s0.at("b").get<double>(),
              s0.at("c").get<double>(), s0.at("d").get<double>(),
              s0.at("e").get<double>(), s0.at("f").get<double>()};
    const auto& cov = j.at("init_state_prior_cov");
    if (cov.size() != 4) throw ConfigError("init_state_prior_cov must be 4x4");
    for (int r = 0; r < 4; ++r) {
      if (cov.at(r).size() != 4) throw ConfigError("init_state_prior_cov must be 4x4");
      for (int c = 0; c < 4; ++c) cfg.init_state_prior_cov(r, c) = cov.at(r).at(c).get<double>();
    }
    const auto& prior = j.at("omega_prior_deg");
    cfg.omega_prior_lo = deg_to_rad(prior.at(0).get<double>());
    cfg.omega_prior_hi = deg_to_rad(prior.at(1).get<double>());
    cfg.noiseless_truth = j.value("noiseless_truth", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file: " + path);
  out << scenario_to_json(cfg) << '\n';
}

}  // namespace ape
