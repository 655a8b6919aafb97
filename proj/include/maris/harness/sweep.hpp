#pragma once

// Paired-trial parameter sweeps and their CSV / JSON emission.

#include "maris/harness/scenario.hpp"
#include "maris/harness/schemes.hpp"
#include "maris/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <iterator>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace maris {

enum class SweepParam { Power, N, L, RegionIrs, MinRate, AngleError, GainError };

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Power: return "power_dbm";
    case SweepParam::N: return "N";
    case SweepParam::L: return "L";
    case SweepParam::RegionIrs: return "region_irs_wl";
    case SweepParam::MinRate: return "min_rate";
    case SweepParam::AngleError: return "mu";
    case SweepParam::GainError: return "nu";
  }
  return "unknown";
}

inline SweepParam parse_sweep_param(const std::string& s) {
  for (auto p : {SweepParam::Power, SweepParam::N, SweepParam::L, SweepParam::RegionIrs,
                 SweepParam::MinRate, SweepParam::AngleError, SweepParam::GainError}) {
    if (s == to_string(p)) return p;
  }
  if (s == "P_t" || s == "power") return SweepParam::Power;
  if (s == "A_I" || s == "region_irs") return SweepParam::RegionIrs;
  if (s == "Gamma" || s == "gamma") return SweepParam::MinRate;
  throw InvalidInput("unknown sweep parameter: " + s);
}

struct SweepConfig {
  SweepParam param = SweepParam::Power;
  std::vector<double> values{30.0};
  int trials = 1;
  ScenarioParams base;
  SolverConfig solver;
  std::vector<std::string> schemes{"proposed-OPS"};
  std::uint64_t seed = 1;
  int kappa = 16;
  double mu = 0.0;  // FRI angle error, used unless swept
  double nu = 0.0;  // FRI gain error variance, used unless swept
  int threads = 1;
  bool record_wall_time = false;

  void validate() const {
    if (values.empty()) throw InvalidInput("SweepConfig: value grid is empty");
    if (trials < 1) throw InvalidInput("SweepConfig: trials must be >= 1");
    if (schemes.empty()) throw InvalidInput("SweepConfig: no schemes");
    if (threads < 1) throw InvalidInput("SweepConfig: threads must be >= 1");
    for (const auto& s : schemes) parse_scheme(s, kappa);
    base.validate();
    solver.validate();
  }
};

struct SweepRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  int trial = 0;
  std::string scheme;
  double sum_rate = std::numeric_limits<double>::quiet_NaN();
  double min_user_rate = std::numeric_limits<double>::quiet_NaN();
  double max_violation = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  int outer_iters = 0;
  int inner_iters_total = 0;
  double final_rho = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // non-empty when the cell failed
};

/// Point parameters and FRI error for one grid value.
struct GridPoint {
  ScenarioParams params;
  double mu = 0.0;
  double nu = 0.0;
};

inline GridPoint apply_sweep_value(const SweepConfig& cfg, double v) {
  GridPoint g{cfg.base, cfg.mu, cfg.nu};
  switch (cfg.param) {
    case SweepParam::Power: g.params.power_dbm = v; break;
    case SweepParam::N: g.params.N = static_cast<int>(std::lround(v)); break;
    case SweepParam::L: g.params.L = static_cast<int>(std::lround(v)); break;
    case SweepParam::RegionIrs: g.params.region_irs_wl = v; break;
    case SweepParam::MinRate: g.params.min_rate = v; break;
    case SweepParam::AngleError: g.mu = v; break;
    case SweepParam::GainError: g.nu = v; break;
  }
  return g;
}

/// Seeds of one trial. Every grid value and scheme of a trial shares them.
struct TrialSeeds {
  std::uint64_t scenario;
  std::uint64_t perturbation;
  std::uint64_t phases;
};

inline TrialSeeds trial_seeds(std::uint64_t master, int trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  return {mix_seed(master, t, 1), mix_seed(master, t, 2), mix_seed(master, t, 3)};
}

/// Runs every scheme of one (grid value, trial) cell on the same scenario.
inline std::vector<SweepRow> run_cell(const SweepConfig& cfg, std::size_t value_index, int trial) {
  const double v = cfg.values[value_index];
  const GridPoint gp = apply_sweep_value(cfg, v);
  const TrialSeeds seeds = trial_seeds(cfg.seed, trial);
  std::vector<SweepRow> rows;
  const auto blank = [&](const std::string& scheme) {
    SweepRow r;
    r.sweep_param = to_string(cfg.param);
    r.sweep_value = v;
    r.trial = trial;
    r.scheme = scheme;
    r.seed = seeds.scenario;
    return r;
  };

  Scenario sc;
  RunOptions opts;
  opts.phase_seed = seeds.phases;
  try {
    sc = generate_scenario(seeds.scenario, gp.params);
    if (gp.mu > 0.0 || gp.nu > 0.0) opts.estimated = perturb_fri(sc.fri, gp.mu, gp.nu, seeds.perturbation);
  } catch (const std::exception& e) {
    for (const auto& s : cfg.schemes) {
      rows.push_back(blank(s));
      rows.back().error = e.what();
    }
    return rows;
  }

  for (const auto& name : cfg.schemes) {
    SweepRow r = blank(name);
    try {
      const SchemeSpec spec = parse_scheme(name, cfg.kappa);
      r.scheme = spec.label();
      const SchemeResult res = run_scheme(sc, spec, cfg.solver, opts);
      r.sum_rate = res.sum_rate;
      r.min_user_rate = res.min_user_rate;
      r.max_violation = res.max_violation;
      r.feasible = res.feasible;
      r.outer_iters = res.outer_iters;
      r.inner_iters_total = res.inner_iters_total;
      r.final_rho = res.final_rho;
      r.wall_ms = cfg.record_wall_time ? res.wall_ms : 0.0;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Full sweep. Rows come back sorted by (value index, trial, scheme order).
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t cells = cfg.values.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<SweepRow>> out(cells);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      out[c] = run_cell(cfg, c / static_cast<std::size_t>(cfg.trials),
                        static_cast<int>(c % static_cast<std::size_t>(cfg.trials)));
    }
  };
  const int n = std::min<int>(cfg.threads, static_cast<int>(cells));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<SweepRow> rows;
  for (auto& block : out) {
    for (auto& r : block) rows.push_back(std::move(r));
  }
  return rows;
}

struct CellSummary {
  double sweep_value = 0.0;
  std::string scheme;
  int count = 0;     // rows with a finite sum rate
  int failed = 0;
  int feasible = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and standard error of the sum rate per (value, scheme), grid order.
inline std::vector<CellSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<CellSummary> cells;
  std::map<std::pair<double, std::string>, std::vector<double>> samples;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.sweep_value, r.scheme);
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& c) {
      return c.sweep_value == r.sweep_value && c.scheme == r.scheme;
    });
    if (it == cells.end()) {
      cells.push_back({r.sweep_value, r.scheme});
      it = std::prev(cells.end());
    }
    if (std::isfinite(r.sum_rate)) {
      samples[key].push_back(r.sum_rate);
    } else {
      ++it->failed;
    }
    if (r.feasible) ++it->feasible;
  }
  for (auto& c : cells) {
    const auto& xs = samples[{c.sweep_value, c.scheme}];
    c.count = static_cast<int>(xs.size());
    if (xs.empty()) continue;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    c.mean = mean;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      c.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
  }
  return cells;
}

inline const char* kCsvHeader =
    "sweep_param,sweep_value,trial,scheme,sum_rate_bpshz,min_user_rate,max_constraint_violation,"
    "feasible,outer_iters,inner_iters_total,final_rho,wall_ms,seed";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.sweep_param << ',' << format_number(r.sweep_value) << ',' << r.trial << ',' << r.scheme
       << ',' << format_number(r.sum_rate) << ',' << format_number(r.min_user_rate) << ','
       << format_number(r.max_violation) << ',' << (r.feasible ? 1 : 0) << ',' << r.outer_iters
       << ',' << r.inner_iters_total << ',' << format_number(r.final_rho) << ','
       << format_number(r.wall_ms) << ',' << r.seed << '\n';
  }
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::object();
  auto& arr = out["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"sweep_param", r.sweep_param},
                        {"sweep_value", r.sweep_value},
                        {"trial", r.trial},
                        {"scheme", r.scheme},
                        {"sum_rate_bpshz", json_number(r.sum_rate)},
                        {"min_user_rate", json_number(r.min_user_rate)},
                        {"max_constraint_violation", json_number(r.max_violation)},
                        {"feasible", r.feasible},
                        {"outer_iters", r.outer_iters},
                        {"inner_iters_total", r.inner_iters_total},
                        {"final_rho", json_number(r.final_rho)},
                        {"wall_ms", r.wall_ms},
                        {"seed", r.seed}};
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  auto& sum = out["summary"] = nlohmann::json::array();
  for (const auto& c : summarize(rows)) {
    sum.push_back({{"sweep_value", c.sweep_value},
                   {"scheme", c.scheme},
                   {"count", c.count},
                   {"failed", c.failed},
                   {"feasible", c.feasible},
                   {"mean_sum_rate", json_number(c.mean)},
                   {"stderr_sum_rate", json_number(c.stderr_)}});
  }
  return out;
}

}  // namespace maris
