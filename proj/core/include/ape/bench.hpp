#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ape/imm_baseline.hpp"
#include "ape/scenario.hpp"
#include "ape/smc_filters.hpp"

namespace ape {

enum class FilterChoice { Ape, Lw, Pl, Apf, Imm20, Imm60, Imm45, CustomBank };

std::string to_string(FilterChoice choice);
// Accepts ape | lw | pl | apf | imm20 | imm60 | imm45 | custom.
FilterChoice parse_filter_choice(const std::string& name);

// Parses a comma list of unknown parameters beyond omega: "omega",
// "omega,eta2", "omega,eta2,R" (R covers both measurement variances).
VarianceMask parse_unknowns(const std::string& list);

struct RunSpec {
  FilterChoice filter = FilterChoice::Ape;
  std::size_t n_particles = 5000;
  std::size_t n_runs = 100;
  std::uint64_t base_seed = 1;
  double beta = 0.05;
  double h2 = 0.01;
  std::string scenario_path;  // empty: built-in scenario
  std::string output_path;    // empty: no files written
  // Noise variances learned by the particle filters; the rest are clamped to
  // the scenario truth. The turn rate is always unknown except for the APF.
  VarianceMask learned = VarianceMask::none();
  std::string bank_path;  // custom IMM bank (JSON)
  // 0: APE_THREADS environment variable, then hardware concurrency.
  std::size_t threads = 0;

  void validate() const;  // throws ConfigError
};

// Collapse: positional error above `error_threshold` metres for
// `consecutive` steps in a row, or a degenerate weight vector.
struct CollapseCriterion {
  double error_threshold = 5000.0;
  std::size_t consecutive = 10;
};

// 1-based step at which the first qualifying streak starts.
std::optional<std::size_t> detect_collapse(std::span<const double> pos_errors,
                                           const CollapseCriterion& crit = {});

struct Trajectory {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> omega;

  std::size_t size() const { return x.size(); }
};

struct MetricSeries {
  std::vector<double> rmse_pos;    // per step, metres
  std::vector<double> rmse_omega;  // per step, rad/s
  std::vector<double> rel_rmse;    // reference / subject; empty without one
  double avg_rmse_pos = 0.0;
  double avg_rmse_omega = 0.0;
};

// RMS over runs at every step: sqrt(mean_r (dx^2 + dy^2)). Estimate
// trajectories may stop early (degenerate runs); each step averages over the
// runs that reached it. Throws ContractViolation when run counts differ or an
// estimate runs past its truth.
MetricSeries positional_rmse(std::span<const Trajectory> estimates,
                             std::span<const Trajectory> truth);

// Fills rel_rmse = reference.rmse_pos / subject.rmse_pos.
MetricSeries with_reference(MetricSeries subject, const MetricSeries& reference);

struct RunRecord {
  std::size_t t = 0;
  std::size_t run = 0;
  std::string filter;
  double x_true = 0.0, y_true = 0.0;
  double x_est = 0.0, y_est = 0.0;
  double omega_true = 0.0, omega_est = 0.0;
  double eta2_est = 0.0, sigma_r2_est = 0.0, sigma_b2_est = 0.0;
  bool collapsed = false;
};

struct RunSummary {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::size_t steps_completed = 0;
  bool collapsed = false;
  std::optional<std::size_t> collapse_onset;
  bool degenerate = false;
  double rmse_pos = 0.0;  // sqrt(mean_t err^2) over completed steps
};

struct MonteCarloResult {
  std::string filter;
  std::vector<RunRecord> records;
  std::vector<RunSummary> runs;
  MetricSeries metrics;
  std::vector<Trajectory> truth;
  std::vector<Trajectory> estimates;
  double wall_seconds = 0.0;

  double collapse_rate() const;
  bool all_collapsed() const;
};

// Threads used for Monte Carlo runs: requested, else APE_THREADS, else
// hardware concurrency; never more than n_runs.
std::size_t resolve_thread_count(std::size_t requested, std::size_t n_runs);

// Run r uses seed base_seed + r: stream 0 simulates the truth, stream 1 drives
// the filter. Runs are independent; aggregation folds in run order.
MonteCarloResult run_monte_carlo(const RunSpec& spec,
                                 const ScenarioConfig& scenario,
                                 const CollapseCriterion& crit = {});

// Loads spec.scenario_path (or the built-in scenario).
ScenarioConfig resolve_scenario(const RunSpec& spec);

// Bank description for a custom IMM filter, from JSON:
// {"stay_probability": 0.95, "modes": [{"omega_deg", "eta2", "sigma_r2",
// "sigma_b2_deg2"}, ...]}.
BankSpec load_bank_spec(const std::string& path);
BankSpec bank_spec_from_json(const std::string& text);

void write_raw_csv(std::ostream& out, std::span<const RunRecord> records);
std::vector<RunRecord> read_raw_csv(std::istream& in);
// Rebuilds trajectories per run from raw records and recomputes metrics.
MetricSeries metrics_from_records(std::span<const RunRecord> records);
void write_summary_csv(std::ostream& out, const std::string& filter,
                       const MetricSeries& metrics);

struct BetaSweepResult {
  std::vector<double> betas;
  std::vector<MonteCarloResult> results;
};

BetaSweepResult beta_sweep(const RunSpec& spec, std::span<const double> betas,
                           const ScenarioConfig& scenario);
// Rows: t, beta, rmse_omega, rmse_pos; |betas| x horizon rows.
void write_sweep_csv(std::ostream& out, const BetaSweepResult& sweep);

}  // namespace ape
