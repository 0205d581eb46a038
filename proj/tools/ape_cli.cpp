// Command-line driver for the Monte Carlo tracking benchmarks.
//
//   ape run --filter ape --particles 1000 --runs 25 --out ape.csv
//   ape sweep-beta --betas 0.001,0.01,0.025,0.05,0.1 --out sweep.csv
//   ape scenario emit-paper --out scenario.json
//
// Exit codes: 0 success, 2 configuration error, 3 every run collapsed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ape/bench.hpp"
#include "ape/errors.hpp"
#include "ape/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCollapse = 3;

struct CommonOptions {
  std::string config;
  std::string filter = "ape";
  std::size_t particles = 5000;
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  double beta = 0.05;
  double h2 = 0.01;
  std::string out;
  std::string unknowns = "omega";
  std::string bank;
  std::string reference;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Scenario JSON (default: built-in scenario)");
  cmd->add_option("--particles", o.particles, "Particles per filter")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--runs", o.runs, "Independent Monte Carlo runs")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Base seed; run r uses seed + r");
  cmd->add_option("--h2", o.h2, "Kernel smoothing parameter");
  cmd->add_option("--out", o.out, "Output CSV path");
  cmd->add_option("--unknowns", o.unknowns,
                  "Unknown parameters: omega | omega,eta2 | omega,eta2,R");
  cmd->add_option("--threads", o.threads, "Worker threads (0: APE_THREADS or auto)");
}

ape::RunSpec to_spec(const CommonOptions& o) {
  ape::RunSpec spec;
  spec.filter = ape::parse_filter_choice(o.filter);
  spec.n_particles = o.particles;
  spec.n_runs = o.runs;
  spec.base_seed = o.seed;
  spec.beta = o.beta;
  spec.h2 = o.h2;
  spec.scenario_path = o.config;
  spec.output_path = o.out;
  spec.learned = ape::parse_unknowns(o.unknowns);
  spec.bank_path = o.bank;
  spec.threads = o.threads;
  spec.validate();
  return spec;
}

std::string summary_path(const std::string& raw) {
  std::filesystem::path p(raw);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + ".summary.csv")).string();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ape::ConfigError("not a number in list: " + item);
    }
  }
  if (out.empty()) throw ape::ConfigError("empty list");
  return out;
}

void print_result(const ape::MonteCarloResult& r) {
  std::printf("%-8s avg_rmse_pos=%.3f m  avg_rmse_omega=%.5f rad/s  "
              "collapsed=%.1f%%  wall=%.1f s\n",
              r.filter.c_str(), r.metrics.avg_rmse_pos, r.metrics.avg_rmse_omega,
              100.0 * r.collapse_rate(), r.wall_seconds);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ape::ConfigError("cannot write " + path);
  return f;
}

int cmd_run(const CommonOptions& o) {
  const ape::RunSpec spec = to_spec(o);
  const ape::ScenarioConfig scenario = ape::resolve_scenario(spec);
  ape::MonteCarloResult result = ape::run_monte_carlo(spec, scenario);

  if (!o.reference.empty()) {
    ape::RunSpec ref = spec;
    ref.filter = ape::parse_filter_choice(o.reference);
    const ape::MonteCarloResult ref_result = ape::run_monte_carlo(ref, scenario);
    print_result(ref_result);
    result.metrics = ape::with_reference(result.metrics, ref_result.metrics);
  }
  print_result(result);

  if (!spec.output_path.empty()) {
    auto raw = open_out(spec.output_path);
    ape::write_raw_csv(raw, result.records);
    auto summary = open_out(summary_path(spec.output_path));
    ape::write_summary_csv(summary, result.filter, result.metrics);
  }
  return result.all_collapsed() ? kExitCollapse : 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& betas_text) {
  ape::RunSpec spec = to_spec(o);
  const auto betas = parse_list(betas_text);
  const ape::ScenarioConfig scenario = ape::resolve_scenario(spec);
  const ape::BetaSweepResult sweep = ape::beta_sweep(spec, betas, scenario);
  bool all_collapsed = true;
  for (std::size_t k = 0; k < sweep.betas.size(); ++k) {
    std::printf("beta=%-8g ", sweep.betas[k]);
    print_result(sweep.results[k]);
    all_collapsed = all_collapsed && sweep.results[k].all_collapsed();
  }
  if (!spec.output_path.empty()) {
    auto out = open_out(spec.output_path);
    ape::write_sweep_csv(out, sweep);
  }
  return all_collapsed ? kExitCollapse : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive parameter estimation particle filter benchmarks"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "Monte Carlo comparison of one filter");
  add_common(run, run_opts);
  run->add_option("--filter", run_opts.filter,
                  "ape | lw | pl | apf | imm20 | imm60 | imm45 | custom");
  run->add_option("--beta", run_opts.beta, "Changepoint probability per step");
  run->add_option("--bank", run_opts.bank, "Custom IMM bank JSON (filter=custom)");
  run->add_option("--reference", run_opts.reference,
                  "Reference filter for the relative RMSE column");

  CommonOptions sweep_opts;
  std::string betas = "0.001,0.01,0.025,0.05,0.1";
  auto* sweep = app.add_subcommand("sweep-beta", "Turn-rate RMSE versus beta");
  add_common(sweep, sweep_opts);
  sweep->add_option("--betas", betas, "Comma-separated beta values");

  auto* scenario = app.add_subcommand("scenario", "Scenario file utilities");
  scenario->require_subcommand(1);
  std::string scenario_out = "scenario.json";
  auto* emit = scenario->add_subcommand("emit-paper",
                                        "Write the built-in maneuvering scenario");
  emit->add_option("--out", scenario_out, "Output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, betas);
    if (emit->parsed()) {
      ape::save_scenario(ape::paper_scenario(), scenario_out);
      std::printf("wrote %s\n", scenario_out.c_str());
      return 0;
    }
  } catch (const ape::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
