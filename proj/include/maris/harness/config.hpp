#pragma once

// JSON mapping for ScenarioParams, SolverConfig and SweepConfig.
//
// {
//   "scenario": {"M": 4, "N": 8, ...},
//   "solver":   {"memory_size": 10, "rho0": 10, ...},
//   "sweep":    {"param": "power_dbm", "values": [20, 30], "trials": 20, ...}
// }
// Every key is optional; missing keys keep their defaults.

#include "maris/harness/scenario.hpp"
#include "maris/harness/sweep.hpp"
#include "maris/solver.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace maris {

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw InvalidInput("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline void read_scenario(const nlohmann::json& j, ScenarioParams& p) {
  detail::reject_unknown(j, {"M", "N", "K", "L", "power_dbm", "noise_dbm", "region_bs_wl",
                             "region_irs_wl", "min_rate", "carrier_hz", "ue_square"},
                         "scenario");
  detail::read_key(j, "M", p.M);
  detail::read_key(j, "N", p.N);
  detail::read_key(j, "K", p.K);
  detail::read_key(j, "L", p.L);
  detail::read_key(j, "power_dbm", p.power_dbm);
  detail::read_key(j, "noise_dbm", p.noise_dbm);
  detail::read_key(j, "region_bs_wl", p.region_bs_wl);
  detail::read_key(j, "region_irs_wl", p.region_irs_wl);
  detail::read_key(j, "min_rate", p.min_rate);
  detail::read_key(j, "carrier_hz", p.carrier_hz);
  detail::read_key(j, "ue_square", p.ue_square);
}

inline void read_solver(const nlohmann::json& j, SolverConfig& c) {
  detail::reject_unknown(j, {"memory_size", "sigma", "gamma", "initial_step", "max_backtracks",
                             "max_inner_iters", "rho0", "theta_rho", "u0", "theta_u", "u_min", "eps0",
                             "theta_eps", "eps_min", "tau_outer", "max_outer_iters",
                             "feasibility_tol"},
                         "solver");
  detail::read_key(j, "memory_size", c.memory_size);
  detail::read_key(j, "sigma", c.line_search.sigma);
  detail::read_key(j, "gamma", c.line_search.gamma);
  detail::read_key(j, "initial_step", c.line_search.initial_step);
  detail::read_key(j, "max_backtracks", c.line_search.max_backtracks);
  detail::read_key(j, "max_inner_iters", c.max_inner_iters);
  detail::read_key(j, "rho0", c.rho0);
  detail::read_key(j, "theta_rho", c.theta_rho);
  detail::read_key(j, "u0", c.u0);
  detail::read_key(j, "theta_u", c.theta_u);
  detail::read_key(j, "u_min", c.u_min);
  detail::read_key(j, "eps0", c.eps0);
  detail::read_key(j, "theta_eps", c.theta_eps);
  detail::read_key(j, "eps_min", c.eps_min);
  detail::read_key(j, "tau_outer", c.tau_outer);
  detail::read_key(j, "max_outer_iters", c.max_outer_iters);
  detail::read_key(j, "feasibility_tol", c.feasibility_tol);
}

inline void read_sweep(const nlohmann::json& j, SweepConfig& c) {
  detail::reject_unknown(j, {"param", "values", "trials", "schemes", "seed", "kappa", "mu", "nu",
                             "threads", "record_wall_time"},
                         "sweep");
  if (auto it = j.find("param"); it != j.end()) c.param = parse_sweep_param(it->get<std::string>());
  detail::read_key(j, "values", c.values);
  detail::read_key(j, "trials", c.trials);
  detail::read_key(j, "schemes", c.schemes);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "kappa", c.kappa);
  detail::read_key(j, "mu", c.mu);
  detail::read_key(j, "nu", c.nu);
  detail::read_key(j, "threads", c.threads);
  detail::read_key(j, "record_wall_time", c.record_wall_time);
}

inline void read_config(const nlohmann::json& j, SweepConfig& c) {
  detail::reject_unknown(j, {"scenario", "solver", "sweep"}, "top level");
  if (auto it = j.find("scenario"); it != j.end()) read_scenario(*it, c.base);
  if (auto it = j.find("solver"); it != j.end()) read_solver(*it, c.solver);
  if (auto it = j.find("sweep"); it != j.end()) read_sweep(*it, c);
}

inline SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open " + path);
  SweepConfig c;
  read_config(nlohmann::json::parse(in, nullptr, true, true), c);
  return c;
}

inline nlohmann::json config_to_json(const SweepConfig& c) {
  const auto& p = c.base;
  const auto& s = c.solver;
  return {{"scenario",
           {{"M", p.M},
            {"N", p.N},
            {"K", p.K},
            {"L", p.L},
            {"power_dbm", p.power_dbm},
            {"noise_dbm", p.noise_dbm},
            {"region_bs_wl", p.region_bs_wl},
            {"region_irs_wl", p.region_irs_wl},
            {"min_rate", p.min_rate},
            {"carrier_hz", p.carrier_hz},
            {"ue_square", p.ue_square}}},
          {"solver",
           {{"memory_size", s.memory_size},
            {"sigma", s.line_search.sigma},
            {"gamma", s.line_search.gamma},
            {"initial_step", s.line_search.initial_step},
            {"max_backtracks", s.line_search.max_backtracks},
            {"max_inner_iters", s.max_inner_iters},
            {"rho0", s.rho0},
            {"theta_rho", s.theta_rho},
            {"u0", s.u0},
            {"theta_u", s.theta_u},
            {"u_min", s.u_min},
            {"eps0", s.eps0},
            {"theta_eps", s.theta_eps},
            {"eps_min", s.eps_min},
            {"tau_outer", s.tau_outer},
            {"max_outer_iters", s.max_outer_iters},
            {"feasibility_tol", s.feasibility_tol}}},
          {"sweep",
           {{"param", to_string(c.param)},
            {"values", c.values},
            {"trials", c.trials},
            {"schemes", c.schemes},
            {"seed", c.seed},
            {"kappa", c.kappa},
            {"mu", c.mu},
            {"nu", c.nu},
            {"threads", c.threads},
            {"record_wall_time", c.record_wall_time}}}};
}

}  // namespace maris
