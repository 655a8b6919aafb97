// maris: sweeps, single runs, gradient checks and gain landscapes.

#include "maris/maris.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace {

using maris::SweepConfig;

/// Options bound to a SweepConfig field. Values given on the command line are
/// applied on top of the config file (or the defaults) after parsing.
class Bindings {
 public:
  explicit Bindings(CLI::App* app) : app_(app) {}

  template <class T>
  void add(const std::string& name, const std::string& desc, std::function<T&(SweepConfig&)> field) {
    SweepConfig defaults;
    auto slot = std::make_shared<T>(field(defaults));
    CLI::Option* opt = app_->add_option(name, *slot, desc)->capture_default_str();
    apply_.push_back([opt, slot, field](SweepConfig& c) {
      if (opt->count() > 0) field(c) = *slot;
    });
  }

  void apply(SweepConfig& c) const {
    for (const auto& f : apply_) f(c);
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(SweepConfig&)>> apply_;
};

struct Common {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::string param;
  bool wall_time = false;
};

void add_scenario_flags(Bindings& b) {
  b.add<int>("-M,--bs-antennas", "BS antennas M", [](SweepConfig& c) -> int& { return c.base.M; });
  b.add<int>("-N,--irs-elements", "IRS elements N", [](SweepConfig& c) -> int& { return c.base.N; });
  b.add<int>("-K,--users", "users K", [](SweepConfig& c) -> int& { return c.base.K; });
  b.add<int>("-L,--paths", "paths L", [](SweepConfig& c) -> int& { return c.base.L; });
  b.add<double>("--power-dbm", "transmit power P_t [dBm]",
                [](SweepConfig& c) -> double& { return c.base.power_dbm; });
  b.add<double>("--noise-dbm", "noise power [dBm]",
                [](SweepConfig& c) -> double& { return c.base.noise_dbm; });
  b.add<double>("--region-bs", "BS region A_B / lambda",
                [](SweepConfig& c) -> double& { return c.base.region_bs_wl; });
  b.add<double>("--region-irs", "IRS region A_I / lambda",
                [](SweepConfig& c) -> double& { return c.base.region_irs_wl; });
  b.add<double>("--min-rate", "rate threshold Gamma [bps/Hz]",
                [](SweepConfig& c) -> double& { return c.base.min_rate; });
  b.add<double>("--carrier-hz", "carrier frequency",
                [](SweepConfig& c) -> double& { return c.base.carrier_hz; });
  b.add<double>("--ue-square", "edge of the UE square [m]",
                [](SweepConfig& c) -> double& { return c.base.ue_square; });
}

void add_solver_flags(Bindings& b) {
  b.add<int>("--memory-size", "RBFGS memory M_m", [](SweepConfig& c) -> int& { return c.solver.memory_size; });
  b.add<double>("--ls-sigma", "Armijo sigma",
                [](SweepConfig& c) -> double& { return c.solver.line_search.sigma; });
  b.add<double>("--ls-gamma", "Armijo backtracking factor",
                [](SweepConfig& c) -> double& { return c.solver.line_search.gamma; });
  b.add<double>("--ls-initial-step", "Armijo initial step tau_l",
                [](SweepConfig& c) -> double& { return c.solver.line_search.initial_step; });
  b.add<int>("--ls-max-backtracks", "backtracking cap",
             [](SweepConfig& c) -> int& { return c.solver.line_search.max_backtracks; });
  b.add<int>("--max-inner", "inner iteration cap",
             [](SweepConfig& c) -> int& { return c.solver.max_inner_iters; });
  b.add<int>("--max-outer", "outer iteration cap",
             [](SweepConfig& c) -> int& { return c.solver.max_outer_iters; });
  b.add<double>("--rho0", "initial penalty weight", [](SweepConfig& c) -> double& { return c.solver.rho0; });
  b.add<double>("--theta-rho", "penalty growth", [](SweepConfig& c) -> double& { return c.solver.theta_rho; });
  b.add<double>("--u0", "initial smoothing", [](SweepConfig& c) -> double& { return c.solver.u0; });
  b.add<double>("--theta-u", "smoothing decay", [](SweepConfig& c) -> double& { return c.solver.theta_u; });
  b.add<double>("--u-min", "smoothing floor", [](SweepConfig& c) -> double& { return c.solver.u_min; });
  b.add<double>("--eps0", "initial inner threshold", [](SweepConfig& c) -> double& { return c.solver.eps0; });
  b.add<double>("--theta-eps", "inner threshold decay",
                [](SweepConfig& c) -> double& { return c.solver.theta_eps; });
  b.add<double>("--eps-min", "inner threshold floor",
                [](SweepConfig& c) -> double& { return c.solver.eps_min; });
  b.add<double>("--tau", "outer step threshold", [](SweepConfig& c) -> double& { return c.solver.tau_outer; });
  b.add<double>("--feasibility-tol", "max h_i counted as feasible",
                [](SweepConfig& c) -> double& { return c.solver.feasibility_tol; });
}

void add_run_flags(Bindings& b) {
  b.add<std::vector<std::string>>("--schemes", "schemes, optionally suffixed +DPS",
                                  [](SweepConfig& c) -> std::vector<std::string>& { return c.schemes; });
  b.add<std::uint64_t>("--seed", "master seed", [](SweepConfig& c) -> std::uint64_t& { return c.seed; });
  b.add<int>("--kappa", "DPS levels", [](SweepConfig& c) -> int& { return c.kappa; });
  b.add<double>("--mu", "max FRI angle error", [](SweepConfig& c) -> double& { return c.mu; });
  b.add<double>("--nu", "FRI gain error variance", [](SweepConfig& c) -> double& { return c.nu; });
  b.add<int>("--threads", "worker threads", [](SweepConfig& c) -> int& { return c.threads; });
}

void add_io_flags(CLI::App* app, Common& io) {
  app->add_option("--config", io.config, "JSON config file; flags override it");
  app->add_option("--out", io.out, "output path (default stdout)");
  app->add_option("--format", io.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

SweepConfig resolve(const Common& io, const Bindings& b) {
  SweepConfig cfg = io.config.empty() ? SweepConfig{} : maris::load_config(io.config);
  b.apply(cfg);
  return cfg;
}

/// Runs `write` on the --out file or stdout.
void emit(const Common& io, const std::function<void(std::ostream&)>& write) {
  if (io.out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(io.out);
  if (!f) throw maris::InvalidInput("cannot open " + io.out);
  write(f);
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json history_json(const std::vector<maris::OuterRecord>& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : h) {
    arr.push_back({{"iteration", r.iteration},
                   {"objective", r.objective},
                   {"sum_rate", r.sum_rate},
                   {"max_violation", r.max_violation},
                   {"rho", r.rho},
                   {"smoothing", r.smoothing},
                   {"eps", r.eps},
                   {"move", r.move},
                   {"inner_iters", r.inner_iters},
                   {"reverted", r.reverted}});
  }
  return arr;
}

int run_single(const SweepConfig& cfg, const Common& io) {
  cfg.validate();
  const auto seeds = maris::trial_seeds(cfg.seed, 0);
  const maris::Scenario sc = maris::generate_scenario(seeds.scenario, cfg.base);
  maris::RunOptions opts;
  opts.phase_seed = seeds.phases;
  if (cfg.mu > 0.0 || cfg.nu > 0.0) opts.estimated = maris::perturb_fri(sc.fri, cfg.mu, cfg.nu, seeds.perturbation);

  std::vector<maris::SweepRow> rows;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& name : cfg.schemes) {
    const auto spec = maris::parse_scheme(name, cfg.kappa);
    const auto res = maris::run_scheme(sc, spec, cfg.solver, opts);
    maris::SweepRow r;
    r.sweep_param = "none";
    r.scheme = res.scheme;
    r.sum_rate = res.sum_rate;
    r.min_user_rate = res.min_user_rate;
    r.max_violation = res.max_violation;
    r.feasible = res.feasible;
    r.outer_iters = res.outer_iters;
    r.inner_iters_total = res.inner_iters_total;
    r.final_rho = res.final_rho;
    r.wall_ms = cfg.record_wall_time ? res.wall_ms : 0.0;
    r.seed = seeds.scenario;
    rows.push_back(r);
    runs.push_back({{"scheme", res.scheme},
                    {"status", maris::to_string(res.status)},
                    {"sum_rate_bpshz", res.sum_rate},
                    {"user_rates", res.rates},
                    {"max_constraint_violation", res.max_violation},
                    {"feasible", res.feasible},
                    {"bs_positions_m", vector_json(res.t)},
                    {"irs_positions_m", vector_json(res.u)},
                    {"history", history_json(res.history)}});
  }
  emit(io, [&](std::ostream& os) {
    if (io.format == "json") {
      os << nlohmann::json{{"config", maris::config_to_json(cfg)}, {"runs", runs}}.dump(2) << '\n';
    } else {
      maris::write_csv(os, rows);
    }
  });
  return 0;
}

int run_gradcheck(const SweepConfig& cfg, const Common& io, int instances, double step) {
  nlohmann::json out = nlohmann::json::array();
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t seed = maris::mix_seed(cfg.seed, static_cast<std::uint64_t>(i), 7);
    const maris::Scenario sc = maris::generate_scenario(seed, cfg.base);
    const maris::ConstraintSet cs = maris::make_constraint_set(sc);
    std::mt19937_64 rng(seed);
    const maris::OptimizationPoint x = maris::random_point(sc, rng);
    const maris::PenaltyState pen{cfg.solver.rho0, cfg.solver.u0, cfg.solver.eps0};
    const auto analytic = maris::riemannian_gradient(x, sc, pen, cs);
    const auto numeric = maris::finite_difference_gradient(x, sc, pen, cs, step);
    const double err = maris::norm(analytic - numeric) / std::max(maris::norm(numeric), 1e-300);
    worst = std::max(worst, err);
    out.push_back({{"instance", i}, {"seed", seed}, {"grad_norm", maris::norm(analytic)}, {"relative_error", err}});
  }
  emit(io, [&](std::ostream& os) {
    if (io.format == "json") {
      os << nlohmann::json{{"instances", out}, {"max_relative_error", worst}}.dump(2) << '\n';
    } else {
      os << "instance,seed,grad_norm,relative_error\n";
      for (const auto& r : out) {
        os << r["instance"].get<int>() << ',' << r["seed"].get<std::uint64_t>() << ','
           << maris::format_number(r["grad_norm"].get<double>()) << ','
           << maris::format_number(r["relative_error"].get<double>()) << '\n';
      }
    }
  });
  std::cerr << "max relative error " << worst << '\n';
  return 0;
}

int run_landscape(const SweepConfig& cfg, const Common& io, const std::string& scheme, int user,
                  int element, int resolution, bool optimize) {
  const auto seeds = maris::trial_seeds(cfg.seed, 0);
  const maris::Scenario sc = maris::generate_scenario(seeds.scenario, cfg.base);
  const auto spec = maris::parse_scheme(scheme, cfg.kappa);
  const maris::Scenario ssc = maris::scheme_scenario(sc, spec);
  maris::OptimizationPoint x = maris::initialize_variables(ssc, spec, seeds.phases);
  if (optimize) x = maris::run_scheme(sc, spec, cfg.solver, {std::nullopt, seeds.phases}).x;
  const auto m = maris::gain_landscape(ssc, x, user, element, resolution);
  emit(io, [&](std::ostream& os) { maris::write_landscape(os, m, ssc.region_irs()); });
  std::cerr << "local maxima " << maris::count_local_maxima(m) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint beamforming and antenna position optimization for movable-antenna IRS links"};
  app.require_subcommand(1);

  Common sweep_io;
  CLI::App* sweep = app.add_subcommand("sweep", "paired-trial parameter sweep");
  Bindings sweep_b(sweep);
  add_io_flags(sweep, sweep_io);
  add_scenario_flags(sweep_b);
  add_solver_flags(sweep_b);
  add_run_flags(sweep_b);
  sweep_b.add<std::vector<double>>("--values", "grid of the swept parameter",
                                   [](SweepConfig& c) -> std::vector<double>& { return c.values; });
  sweep_b.add<int>("--trials", "trials per grid value", [](SweepConfig& c) -> int& { return c.trials; });
  sweep->add_option("--param", sweep_io.param,
                    "swept parameter: power_dbm, N, L, region_irs_wl, min_rate, mu, nu");
  sweep->add_flag("--wall-time", sweep_io.wall_time, "record wall-clock time per run");

  Common single_io;
  CLI::App* single = app.add_subcommand("single", "one scenario, every requested scheme");
  Bindings single_b(single);
  add_io_flags(single, single_io);
  add_scenario_flags(single_b);
  add_solver_flags(single_b);
  add_run_flags(single_b);
  single->add_flag("--wall-time", single_io.wall_time, "record wall-clock time per run");

  Common grad_io;
  int instances = 20;
  double step = 1e-6;
  CLI::App* grad = app.add_subcommand("gradcheck", "analytic vs finite-difference gradient");
  Bindings grad_b(grad);
  add_io_flags(grad, grad_io);
  add_scenario_flags(grad_b);
  add_solver_flags(grad_b);
  grad_b.add<std::uint64_t>("--seed", "master seed", [](SweepConfig& c) -> std::uint64_t& { return c.seed; });
  grad->add_option("--instances", instances, "random instances")->capture_default_str();
  grad->add_option("--step", step, "central difference step")->capture_default_str();

  Common land_io;
  std::string scheme = "proposed-OPS";
  int user = 0;
  int element = 0;
  int resolution = 101;
  bool optimize = false;
  CLI::App* land = app.add_subcommand("landscape", "channel power gain over one element's positions");
  Bindings land_b(land);
  add_io_flags(land, land_io);
  add_scenario_flags(land_b);
  add_solver_flags(land_b);
  land_b.add<std::uint64_t>("--seed", "master seed", [](SweepConfig& c) -> std::uint64_t& { return c.seed; });
  land_b.add<int>("--kappa", "DPS levels", [](SweepConfig& c) -> int& { return c.kappa; });
  land->add_option("--scheme", scheme, "scheme that sets the other variables")->capture_default_str();
  land->add_option("--user", user, "user index k")->capture_default_str();
  land->add_option("--element", element, "moving IRS element")->capture_default_str();
  land->add_option("--resolution", resolution, "grid points per axis")->capture_default_str();
  land->add_flag("--optimize", optimize, "optimize the scheme first");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      SweepConfig cfg = resolve(sweep_io, sweep_b);
      if (!sweep_io.param.empty()) cfg.param = maris::parse_sweep_param(sweep_io.param);
      if (sweep_io.wall_time) cfg.record_wall_time = true;
      const auto rows = maris::run_sweep(cfg);
      emit(sweep_io, [&](std::ostream& os) {
        if (sweep_io.format == "json") {
          auto j = maris::to_json(rows);
          j["config"] = maris::config_to_json(cfg);
          os << j.dump(2) << '\n';
        } else {
          maris::write_csv(os, rows);
        }
      });
      return 0;
    }
    if (*single) {
      SweepConfig cfg = resolve(single_io, single_b);
      if (single_io.wall_time) cfg.record_wall_time = true;
      return run_single(cfg, single_io);
    }
    if (*grad) return run_gradcheck(resolve(grad_io, grad_b), grad_io, instances, step);
    if (*land) {
      return run_landscape(resolve(land_io, land_b), land_io, scheme, user, element, resolution, optimize);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
