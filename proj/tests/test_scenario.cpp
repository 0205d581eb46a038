#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "ape/errors.hpp"
#include "ape/scenario.hpp"
#include "stats_oracles.hpp"

using namespace ape;

TEST_CASE("built-in maneuvering scenario") {
  const auto sc = paper_scenario();
  CHECK_NOTHROW(sc.validate());
  CHECK(sc.horizon == 400);
  CHECK(sc.omega_schedule.size() == 10);
  CHECK(sc.omega_schedule[3].omega == doctest::Approx(0.09774).epsilon(1e-4));
  CHECK(sc.omega_schedule[7].omega == doctest::Approx(-deg_to_rad(7.25)));
  CHECK(sc.eta2_true == 2.0);
  CHECK(sc.sigma_r2_true == 2500.0);
  CHECK(sc.sigma_b2_true == doctest::Approx(std::pow(kPi / 180.0, 2)));
  CHECK(sc.s0 == SuffStats{9, 15, 4, 5000, 4, 0.0025});
  CHECK(sc.initial_state == StateVector{30000, 300, 30000, 0});
  // Average segment length 40 steps: one change per 40 steps.
  CHECK(static_cast<double>(sc.omega_schedule.size()) / sc.horizon == doctest::Approx(0.025));

  RngStream rng(61, 0);
  const auto gt = simulate(sc, rng);
  CHECK(gt.changepoint_times ==
        std::vector<std::size_t>{60, 120, 150, 214, 240, 272, 300, 338, 360});
  CHECK(gt.states.size() == 400);
  CHECK(gt.observations.size() == 400);
  CHECK(gt.omegas.size() == 400);
}

TEST_CASE("schedule semantics: a new turn rate governs its listed step") {
  const auto sc = paper_scenario();
  CHECK(sc.omega_at(1) == 0.0);
  CHECK(sc.omega_at(59) == 0.0);
  CHECK(sc.omega_at(60) == deg_to_rad(3.0));
  CHECK(sc.omega_at(119) == deg_to_rad(3.0));
  CHECK(sc.omega_at(120) == 0.0);
  CHECK(sc.omega_at(400) == deg_to_rad(7.25));
  RngStream rng(62, 0);
  const auto gt = simulate(sc, rng);
  for (std::size_t t = 1; t <= 400; ++t) CHECK(gt.omegas[t - 1] == sc.omega_at(t));
}

TEST_CASE("noiseless straight-line truth") {
  auto sc = paper_scenario();
  sc.eta2_true = 0.0;
  for (auto& seg : sc.omega_schedule) seg.omega = 0.0;
  RngStream rng(63, 0);
  const auto gt = simulate(sc, rng);
  for (std::size_t t = 1; t <= sc.horizon; ++t) {
    const auto& s = gt.states[t - 1];
    CHECK(s.x == doctest::Approx(30000.0 + 300.0 * t).epsilon(1e-14));
    CHECK(s.y == 30000.0);
    CHECK(s.vx == 300.0);
  }
}

TEST_CASE("speed is constant without process noise") {
  auto sc = paper_scenario();
  sc.eta2_true = 0.0;
  RngStream rng(64, 0);
  const auto gt = simulate(sc, rng);
  for (const auto& s : gt.states) {
    CHECK(std::hypot(s.vx, s.vy) == doctest::Approx(300.0).epsilon(1e-10));
  }
  auto toggled = paper_scenario();
  toggled.noiseless_truth = true;
  RngStream r2(64, 0);
  const auto gt2 = simulate(toggled, r2);
  CHECK(gt2.states.back() == gt.states.back());
}

TEST_CASE("same seed gives the same ground truth") {
  const auto sc = paper_scenario();
  RngStream a(65, 0), b(65, 0), c(66, 0);
  const auto ga = simulate(sc, a);
  const auto gb = simulate(sc, b);
  const auto gc = simulate(sc, c);
  CHECK(ga.states == gb.states);
  bool same_obs = true;
  for (std::size_t t = 0; t < ga.observations.size(); ++t) {
    same_obs = same_obs && ga.observations[t].range == gb.observations[t].range &&
               ga.observations[t].bearing == gb.observations[t].bearing;
  }
  CHECK(same_obs);
  CHECK(ga.states.back().x != gc.states.back().x);
}

TEST_CASE("range noise standard deviation") {
  auto sc = paper_scenario();
  sc.horizon = 100000;
  sc.eta2_true = 0.0;
  for (auto& seg : sc.omega_schedule) seg.omega = 0.0;
  sc.omega_schedule.resize(1);
  sc.initial_state = {0, 0, 0, 0};
  RngStream rng(67, 0);
  const auto gt = simulate(sc, rng);
  const double r0 = std::hypot(55000.0, 55000.0);
  std::vector<double> res, bres;
  for (const auto& y : gt.observations) {
    res.push_back(y.range - r0);
    bres.push_back(wrap_angle(y.bearing + 3.0 * kPi / 4.0));
  }
  CHECK(testing::sample_sd(res) == doctest::Approx(50.0).epsilon(0.01));
  CHECK(testing::sample_sd(bres) == doctest::Approx(kPi / 180.0).epsilon(0.01));
}

TEST_CASE("scenario validation") {
  auto bad = paper_scenario();
  bad.omega_schedule[0].start_step = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = paper_scenario();
  std::swap(bad.omega_schedule[2], bad.omega_schedule[3]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = paper_scenario();
  bad.horizon = 300;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = paper_scenario();
  bad.sigma_r2_true = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("scenario JSON round trip") {
  auto sc = paper_scenario();
  sc.init_state_prior_cov(0, 1) = sc.init_state_prior_cov(1, 0) = 3.5;
  const auto back = scenario_from_json(scenario_to_json(sc));
  CHECK(back.horizon == sc.horizon);
  CHECK(back.initial_state == sc.initial_state);
  REQUIRE(back.omega_schedule.size() == sc.omega_schedule.size());
  for (std::size_t k = 0; k < sc.omega_schedule.size(); ++k) {
    CHECK(back.omega_schedule[k].start_step == sc.omega_schedule[k].start_step);
    CHECK(back.omega_schedule[k].omega == doctest::Approx(sc.omega_schedule[k].omega).epsilon(1e-14));
  }
  CHECK(back.sigma_b2_true == doctest::Approx(sc.sigma_b2_true).epsilon(1e-14));
  CHECK(back.s0 == sc.s0);
  CHECK(back.init_state_prior_cov == sc.init_state_prior_cov);
  CHECK(back.omega_prior_hi == doctest::Approx(sc.omega_prior_hi).epsilon(1e-14));

  const auto text = scenario_to_json(sc);
  CHECK(text.find("omega_deg") != std::string::npos);
  CHECK(text.find("sigma_b2_true_deg2") != std::string::npos);

  const auto path = std::filesystem::temp_directory_path() / "ape_scenario_roundtrip.json";
  save_scenario(sc, path.string());
  const auto loaded = load_scenario(path.string());
  CHECK(loaded.sensor.sx == sc.sensor.sx);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(scenario_from_json("{\"horizon\": 3}"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}
