#include "ape/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "ape/errors.hpp"
#include "json.hpp"

namespace ape {

std::string to_string(FilterChoice choice) {
  switch (choice) {
    case FilterChoice::Ape: return "ape";
    case FilterChoice::Lw: return "lw";
    case FilterChoice::Pl: return "pl";
    case FilterChoice::Apf: return "apf";
    case FilterChoice::Imm20: return "imm20";
    case FilterChoice::Imm60: return "imm60";
    case FilterChoice::Imm45: return "imm45";
    case FilterChoice::CustomBank: return "custom";
  }
  return "unknown";
}

FilterChoice parse_filter_choice(const std::string& name) {
  static const std::pair<const char*, FilterChoice> kNames[] = {
      {"ape", FilterChoice::Ape},     {"lw", FilterChoice::Lw},
      {"pl", FilterChoice::Pl},       {"apf", FilterChoice::Apf},
      {"imm20", FilterChoice::Imm20}, {"imm60", FilterChoice::Imm60},
      {"imm45", FilterChoice::Imm45}, {"custom", FilterChoice::CustomBank}};
  for (const auto& [key, value] : kNames) {
    if (name == key) return value;
  }
  throw ConfigError("unknown filter kind: " + name);
}

VarianceMask parse_unknowns(const std::string& list) {
  VarianceMask mask;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.empty() || item == "omega") continue;
    if (item == "eta2") {
      mask.eta2 = true;
    } else if (item == "R") {
      mask.sigma_r2 = true;
      mask.sigma_b2 = true;
    } else if (item == "sigma_r2") {
      mask.sigma_r2 = true;
    } else if (item == "sigma_b2") {
      mask.sigma_b2 = true;
    } else {
      throw ConfigError("unknown parameter in --unknowns: " + item);
    }
  }
  return mask;
}

void RunSpec::validate() const {
  if (n_runs == 0) throw ConfigError("n_runs must be >= 1");
  if (n_particles == 0) throw ConfigError("n_particles must be >= 1");
  if (filter == FilterChoice::Ape && !(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("beta must lie in (0, 1)");
  }
  if (!(h2 > 0.0 && h2 < 1.0)) throw ConfigError("h2 must lie in (0, 1)");
  if (filter == FilterChoice::CustomBank && bank_path.empty()) {
    throw ConfigError("custom filter requires a bank file");
  }
}

std::optional<std::size_t> detect_collapse(std::span<const double> pos_errors,
                                           const CollapseCriterion& crit) {
  std::size_t streak = 0;
  for (std::size_t t = 0; t < pos_errors.size(); ++t) {
    if (pos_errors[t] > crit.error_threshold || !std::isfinite(pos_errors[t])) {
      ++streak;
      if (streak >= crit.consecutive) return t + 2 - streak;
    } else {
      streak = 0;
    }
  }
  return std::nullopt;
}

MetricSeries positional_rmse(std::span<const Trajectory> estimates,
                             std::span<const Trajectory> truth) {
  if (estimates.size() != truth.size() || truth.empty()) {
    throw ContractViolation("positional_rmse: run counts differ or are zero");
  }
  std::size_t horizon = 0;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    const auto& tr = truth[r];
    const auto& es = estimates[r];
    if (tr.y.size() != tr.size() || tr.omega.size() != tr.size()) {
      throw ContractViolation("positional_rmse: ragged truth trajectory");
    }
    if (es.size() > tr.size() || es.y.size() != es.size() ||
        es.omega.size() != es.size()) {
      throw ContractViolation("positional_rmse: estimate longer than truth");
    }
    horizon = std::max(horizon, tr.size());
  }

  MetricSeries m;
  m.rmse_pos.assign(horizon, 0.0);
  m.rmse_omega.assign(horizon, 0.0);
  std::size_t counted = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    double pos = 0.0, om = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < truth.size(); ++r) {
      if (t >= estimates[r].size()) continue;
      const double dx = estimates[r].x[t] - truth[r].x[t];
      const double dy = estimates[r].y[t] - truth[r].y[t];
      const double dw = estimates[r].omega[t] - truth[r].omega[t];
      pos += dx * dx + dy * dy;
      om += dw * dw;
      ++n;
    }
    if (n == 0) {
      m.rmse_pos[t] = std::nan("");
      m.rmse_omega[t] = std::nan("");
      continue;
    }
    m.rmse_pos[t] = std::sqrt(pos / static_cast<double>(n));
    m.rmse_omega[t] = std::sqrt(om / static_cast<double>(n));
    m.avg_rmse_pos += m.rmse_pos[t];
    m.avg_rmse_omega += m.rmse_omega[t];
    ++counted;
  }
  if (counted > 0) {
    m.avg_rmse_pos /= static_cast<double>(counted);
    m.avg_rmse_omega /= static_cast<double>(counted);
  }
  return m;
}

MetricSeries with_reference(MetricSeries subject, const MetricSeries& reference) {
  if (reference.rmse_pos.size() != subject.rmse_pos.size()) {
    throw ContractViolation("with_reference: horizons differ");
  }
  subject.rel_rmse.resize(subject.rmse_pos.size());
  for (std::size_t t = 0; t < subject.rmse_pos.size(); ++t) {
    const double den = subject.rmse_pos[t];
    const double num = reference.rmse_pos[t];
    if (den == 0.0 && num == 0.0) {
      subject.rel_rmse[t] = 1.0;
    } else {
      subject.rel_rmse[t] = num / den;
    }
  }
  return subject;
}

double MonteCarloResult::collapse_rate() const {
  if (runs.empty()) return 0.0;
  const auto n = std::count_if(runs.begin(), runs.end(),
                               [](const RunSummary& r) { return r.collapsed; });
  return static_cast<double>(n) / static_cast<double>(runs.size());
}

bool MonteCarloResult::all_collapsed() const {
  return !runs.empty() && std::all_of(runs.begin(), runs.end(),
                                      [](const RunSummary& r) { return r.collapsed; });
}

std::size_t resolve_thread_count(std::size_t requested, std::size_t n_runs) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("APE_THREADS")) {
      n = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, n_runs));
}

namespace {

bool is_imm(FilterChoice c) {
  return c == FilterChoice::Imm20 || c == FilterChoice::Imm60 ||
         c == FilterChoice::Imm45 || c == FilterChoice::CustomBank;
}

FilterKind particle_kind(FilterChoice c) {
  switch (c) {
    case FilterChoice::Ape: return FilterKind::Ape;
    case FilterChoice::Lw: return FilterKind::LiuWest;
    case FilterChoice::Pl: return FilterKind::ParticleLearning;
    case FilterChoice::Apf: return FilterKind::Apf;
    default: break;
  }
  throw ConfigError("not a particle filter: " + to_string(c));
}

ImmModelBank bank_for(const RunSpec& spec, const ScenarioConfig& scenario) {
  BankSpec bs;
  switch (spec.filter) {
    case FilterChoice::Imm20: bs = BankSpec::turn_grid(20); break;
    case FilterChoice::Imm60: bs = BankSpec::turn_grid(60); break;
    case FilterChoice::Imm45: bs = BankSpec::product45(); break;
    case FilterChoice::CustomBank: bs = load_bank_spec(spec.bank_path); break;
    default: throw ConfigError("not an IMM filter");
  }
  bs.sigma_r2 = scenario.sigma_r2_true;
  bs.sigma_b2 = scenario.sigma_b2_true;
  return build_model_bank(bs);
}

FilterSetup particle_setup(const RunSpec& spec, const ScenarioConfig& scenario) {
  FilterSetup setup;
  setup.ape.beta = spec.beta;
  setup.ape.h2 = spec.h2;
  setup.ape.n_particles = spec.n_particles;
  setup.model.ct = scenario.ct();
  setup.model.sensor = scenario.sensor;
  setup.model.s0 = scenario.s0;
  setup.model.known = scenario.true_params(1);
  setup.model.learned = spec.learned;
  setup.model.omega_lo = scenario.omega_prior_lo;
  setup.model.omega_hi = scenario.omega_prior_hi;
  setup.init_mean = scenario.initial_state;
  setup.init_cov = scenario.init_state_prior_cov;
  setup.apf_params = scenario.true_params(1);
  for (std::size_t t = 1; t <= scenario.horizon; ++t) {
    setup.apf_schedule.push_back(scenario.true_params(t));
  }
  return setup;
}

struct SingleRun {
  Trajectory truth;
  Trajectory estimate;
  std::vector<StepEstimate> steps;
  RunSummary summary;
};

SingleRun run_once(const RunSpec& spec, const ScenarioConfig& scenario,
                   const FilterSetup* setup, const ImmModelBank* bank,
                   std::size_t run, const CollapseCriterion& crit) {
  SingleRun out;
  out.summary.run = run;
  out.summary.seed = spec.base_seed + run;
  RngStream truth_rng(out.summary.seed, 0);
  RngStream filter_rng(out.summary.seed, 1);
  const GroundTruth gt = simulate(scenario, truth_rng);

  for (std::size_t t = 0; t < gt.states.size(); ++t) {
    out.truth.x.push_back(gt.states[t].x);
    out.truth.y.push_back(gt.states[t].y);
    out.truth.omega.push_back(gt.omegas[t]);
  }

  if (bank != nullptr) {
    GaussianBelief prior{scenario.initial_state.to_eigen(),
                         scenario.init_state_prior_cov};
    ImmState state = imm_initial_state(*bank, prior);
    const CtConfig ct = scenario.ct();
    for (std::size_t t = 0; t < gt.observations.size(); ++t) {
      try {
        ImmStepResult r = imm_step(state, *bank, gt.observations[t], ct,
                                   scenario.sensor);
        StepEstimate e;
        e.state = StateVector::from_eigen(r.fused.mean);
        e.params = {r.param_estimate.omega, r.param_estimate.eta2,
                    r.param_estimate.sigma_r2, r.param_estimate.sigma_b2};
        out.steps.push_back(e);
        state = std::move(r.state);
      } catch (const DegenerateWeights&) {
        out.summary.degenerate = true;
        break;
      } catch (const NumericalBreakdown&) {
        out.summary.degenerate = true;
        break;
      }
    }
  } else {
    FilterTrace trace = trace_filter(particle_kind(spec.filter), gt.observations,
                                     *setup, filter_rng);
    out.steps = std::move(trace.estimates);
    out.summary.degenerate = trace.failed_step.has_value();
  }

  std::vector<double> errors;
  double sq = 0.0;
  for (std::size_t t = 0; t < out.steps.size(); ++t) {
    const auto& s = out.steps[t].state;
    out.estimate.x.push_back(s.x);
    out.estimate.y.push_back(s.y);
    out.estimate.omega.push_back(out.steps[t].params.omega);
    const double e = std::hypot(s.x - gt.states[t].x, s.y - gt.states[t].y);
    errors.push_back(e);
    sq += e * e;
  }
  out.summary.steps_completed = out.steps.size();
  out.summary.rmse_pos =
      out.steps.empty() ? std::nan("") : std::sqrt(sq / static_cast<double>(out.steps.size()));
  out.summary.collapse_onset = detect_collapse(errors, crit);
  if (out.summary.degenerate && !out.summary.collapse_onset) {
    out.summary.collapse_onset = out.steps.size() + 1;
  }
  out.summary.collapsed = out.summary.collapse_onset.has_value();
  return out;
}

}  // namespace

ScenarioConfig resolve_scenario(const RunSpec& spec) {
  if (spec.scenario_path.empty()) return paper_scenario();
  return load_scenario(spec.scenario_path);
}

MonteCarloResult run_monte_carlo(const RunSpec& spec,
                                 const ScenarioConfig& scenario,
                                 const CollapseCriterion& crit) {
  spec.validate();
  scenario.validate();
  const auto start = std::chrono::steady_clock::now();

  std::optional<ImmModelBank> bank;
  std::optional<FilterSetup> setup;
  if (is_imm(spec.filter)) {
    bank = bank_for(spec, scenario);
  } else {
    setup = particle_setup(spec, scenario);
  }

  std::vector<SingleRun> runs(spec.n_runs);
  const std::size_t workers = resolve_thread_count(spec.threads, spec.n_runs);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < spec.n_runs; r = next++) {
      runs[r] = run_once(spec, scenario, setup ? &*setup : nullptr,
                         bank ? &*bank : nullptr, r, crit);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
  }

  MonteCarloResult result;
  result.filter = to_string(spec.filter);
  for (auto& run : runs) {
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
      const auto& e = run.steps[t];
      RunRecord rec;
      rec.t = t + 1;
      rec.run = run.summary.run;
      rec.filter = result.filter;
      rec.x_true = run.truth.x[t];
      rec.y_true = run.truth.y[t];
      rec.x_est = e.state.x;
      rec.y_est = e.state.y;
      rec.omega_true = run.truth.omega[t];
      rec.omega_est = e.params.omega;
      rec.eta2_est = e.params.eta2;
      rec.sigma_r2_est = e.params.sigma_r2;
      rec.sigma_b2_est = e.params.sigma_b2;
      rec.collapsed = run.summary.collapsed;
      result.records.push_back(std::move(rec));
    }
    result.runs.push_back(run.summary);
    result.truth.push_back(std::move(run.truth));
    result.estimates.push_back(std::move(run.estimate));
  }
  result.metrics = positional_rmse(result.estimates, result.truth);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

BankSpec bank_spec_from_json(const std::string& text) {
  BankSpec spec;
  spec.layout = BankSpec::Layout::Custom;
  try {
    const auto j = nlohmann::json::parse(text);
    spec.stay_probability = j.value("stay_probability", 0.95);
    for (const auto& m : j.at("modes")) {
      ImmMode mode;
      mode.omega = deg_to_rad(m.at("omega_deg").get<double>());
      mode.eta2 = m.at("eta2").get<double>();
      mode.sigma_r2 = m.at("sigma_r2").get<double>();
      mode.sigma_b2 = deg_to_rad(deg_to_rad(m.at("sigma_b2_deg2").get<double>()));
      spec.custom_modes.push_back(mode);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bank JSON: ") + e.what());
  }
  return spec;
}

BankSpec load_bank_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bank file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return bank_spec_from_json(buf.str());
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kRawHeader =
    "t,run,filter,x_true,y_true,x_est,y_est,omega_true,omega_est,eta2_est,"
    "sigma_r2_est,sigma_b2_est,collapsed";

}  // namespace

void write_raw_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << kRawHeader << '\n';
  for (const auto& r : records) {
    out << r.t << ',' << r.run << ',' << r.filter << ',' << fmt_double(r.x_true)
        << ',' << fmt_double(r.y_true) << ',' << fmt_double(r.x_est) << ','
        << fmt_double(r.y_est) << ',' << fmt_double(r.omega_true) << ','
        << fmt_double(r.omega_est) << ',' << fmt_double(r.eta2_est) << ','
        << fmt_double(r.sigma_r2_est) << ',' << fmt_double(r.sigma_b2_est) << ','
        << (r.collapsed ? 1 : 0) << '\n';
  }
}

std::vector<RunRecord> read_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRawHeader) {
    throw ConfigError("raw CSV: missing or unexpected header");
  }
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw ConfigError("raw CSV: expected 13 columns: " + line);
    RunRecord r;
    r.t = std::stoull(f[0]);
    r.run = std::stoull(f[1]);
    r.filter = f[2];
    r.x_true = std::stod(f[3]);
    r.y_true = std::stod(f[4]);
    r.x_est = std::stod(f[5]);
    r.y_est = std::stod(f[6]);
    r.omega_true = std::stod(f[7]);
    r.omega_est = std::stod(f[8]);
    r.eta2_est = std::stod(f[9]);
    r.sigma_r2_est = std::stod(f[10]);
    r.sigma_b2_est = std::stod(f[11]);
    r.collapsed = f[12] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

MetricSeries metrics_from_records(std::span<const RunRecord> records) {
  std::map<std::size_t, std::vector<const RunRecord*>> by_run;
  for (const auto& r : records) by_run[r.run].push_back(&r);
  std::vector<Trajectory> est, truth;
  for (auto& [run, rows] : by_run) {
    std::sort(rows.begin(), rows.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->t < b->t; });
    Trajectory e, tr;
    for (const auto* r : rows) {
      e.x.push_back(r->x_est);
      e.y.push_back(r->y_est);
      e.omega.push_back(r->omega_est);
      tr.x.push_back(r->x_true);
      tr.y.push_back(r->y_true);
      tr.omega.push_back(r->omega_true);
    }
    est.push_back(std::move(e));
    truth.push_back(std::move(tr));
  }
  return positional_rmse(est, truth);
}

void write_summary_csv(std::ostream& out, const std::string& filter,
                       const MetricSeries& metrics) {
  out << "t,filter,rmse_pos,rmse_omega,rel_rmse\n";
  for (std::size_t t = 0; t < metrics.rmse_pos.size(); ++t) {
    out << t + 1 << ',' << filter << ',' << fmt_double(metrics.rmse_pos[t]) << ','
        << fmt_double(metrics.rmse_omega[t]) << ','
        << (metrics.rel_rmse.empty() ? std::string("nan")
                                     : fmt_double(metrics.rel_rmse[t]))
        << '\n';
  }
}

BetaSweepResult beta_sweep(const RunSpec& spec, std::span<const double> betas,
                           const ScenarioConfig& scenario) {
  if (betas.empty()) throw ConfigError("beta sweep needs at least one beta");
  BetaSweepResult out;
  for (double b : betas) {
    RunSpec s = spec;
    s.filter = FilterChoice::Ape;
    s.beta = b;
    out.betas.push_back(b);
    out.results.push_back(run_monte_carlo(s, scenario));
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const BetaSweepResult& sweep) {
  out << "t,beta,rmse_omega,rmse_pos\n";
  for (std::size_t k = 0; k < sweep.betas.size(); ++k) {
    const auto& m = sweep.results[k].metrics;
    for (std::size_t t = 0; t < m.rmse_omega.size(); ++t) {
      out << t + 1 << ',' << fmt_double(sweep.betas[k]) << ','
          << fmt_double(m.rmse_omega[t]) << ',' << fmt_double(m.rmse_pos[t]) << '\n';
    }
  }
}

}  // namespace ape
