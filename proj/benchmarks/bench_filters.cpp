#include <benchmark/benchmark.h>

#include <vector>

#include "ape/imm_baseline.hpp"
#include "ape/scenario.hpp"
#include "ape/smc_filters.hpp"
#include "ape/stochastics.hpp"

namespace {

struct Fixture {
  ape::ScenarioConfig scenario = ape::paper_scenario();
  ape::GroundTruth truth;
  ape::FilterSetup setup;

  explicit Fixture(std::size_t n) {
    ape::RngStream rng(1, 0);
    truth = ape::simulate(scenario, rng);
    setup.ape.n_particles = n;
    setup.model.ct = scenario.ct();
    setup.model.sensor = scenario.sensor;
    setup.model.s0 = scenario.s0;
    setup.model.known = scenario.true_params(1);
    setup.model.learned = ape::VarianceMask::all();
    setup.init_mean = scenario.initial_state;
    setup.init_cov = scenario.init_state_prior_cov;
    setup.apf_params = scenario.true_params(1);
  }
};

void BM_SystematicResample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  ape::RngStream rng(3, 0);
  for (auto _ : state) {
    auto idx = ape::systematic_resample(w, n, rng);
    benchmark::DoNotOptimize(idx);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SystematicResample)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

template <ape::FilterKind Kind>
void BM_FilterStep(benchmark::State& state) {
  Fixture fx(static_cast<std::size_t>(state.range(0)));
  ape::RngStream rng(7, 1);
  auto cloud = ape::initial_cloud(Kind, fx.setup, rng);
  std::size_t t = 0;
  for (auto _ : state) {
    auto r = ape::filter_step(Kind, cloud, fx.truth.observations[t], fx.setup, rng);
    cloud = std::move(r.cloud);
    t = (t + 1) % 50;
    if (t == 0) cloud = ape::initial_cloud(Kind, fx.setup, rng);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_FilterStep, ape::FilterKind::Apf)->Arg(1000)->Arg(5000);
BENCHMARK_TEMPLATE(BM_FilterStep, ape::FilterKind::ParticleLearning)->Arg(1000)->Arg(5000);
BENCHMARK_TEMPLATE(BM_FilterStep, ape::FilterKind::LiuWest)->Arg(1000)->Arg(5000);
BENCHMARK_TEMPLATE(BM_FilterStep, ape::FilterKind::Ape)->Arg(1000)->Arg(5000);

void BM_ImmStep(benchmark::State& state) {
  Fixture fx(1);
  const auto bank = ape::build_model_bank(
      ape::BankSpec::turn_grid(static_cast<std::size_t>(state.range(0))));
  ape::GaussianBelief prior{fx.scenario.initial_state.to_eigen(),
                            fx.scenario.init_state_prior_cov};
  auto imm = ape::imm_initial_state(bank, prior);
  const auto ct = fx.scenario.ct();
  std::size_t t = 0;
  for (auto _ : state) {
    auto r = ape::imm_step(imm, bank, fx.truth.observations[t], ct, fx.scenario.sensor);
    imm = std::move(r.state);
    t = (t + 1) % 50;
    if (t == 0) imm = ape::imm_initial_state(bank, prior);
  }
}
BENCHMARK(BM_ImmStep)->Arg(20)->Arg(60);

}  // namespace

BENCHMARK_MAIN();
