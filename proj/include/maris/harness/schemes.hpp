#pragma once

// Proposed and baseline schemes, discrete phase projection, and the
// single-scenario driver used by sweeps and the CLI.

#include "maris/channel.hpp"
#include "maris/harness/init.hpp"
#include "maris/harness/scenario.hpp"
#include "maris/manifold.hpp"
#include "maris/objective.hpp"
#include "maris/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace maris {

enum class PhaseMode { Continuous, Fixed, Random };
enum class BsMode { Movable, Fixed };
enum class IrsMode { Movable, Fixed, DenseGrid };

struct SchemeSpec {
  std::string name;  // base label, without the DPS suffix
  PhaseMode phase = PhaseMode::Continuous;
  BsMode bs = BsMode::Movable;
  IrsMode irs = IrsMode::Movable;
  int kappa = 0;  // > 0: phases projected onto kappa levels after optimization

  bool discrete() const { return kappa > 0; }
  std::string label() const { return discrete() ? name + "+DPS" : name; }

  FactorMask mask() const {
    FactorMask m;
    m.W = true;
    m.phi = phase == PhaseMode::Continuous;
    m.o = bs == BsMode::Movable;
    m.p = irs == IrsMode::Movable;
    return m;
  }

  void validate() const {
    if (irs == IrsMode::DenseGrid && phase == PhaseMode::Fixed) {
      throw InvalidInput("SchemeSpec: a dense grid needs optimized or random phases");
    }
    if (kappa < 0 || kappa == 1) throw InvalidInput("SchemeSpec: kappa must be 0 or >= 2");
  }
};

inline const std::vector<std::string>& scheme_names() {
  static const std::vector<std::string> names = {"proposed-OPS", "proposed-FPS", "FPA",
                                                 "FPA-MA-OPS",   "FPA-MA-FPS",   "MA-FPA",
                                                 "RPS",          "URA"};
  return names;
}

/// Accepts the names above, optionally followed by "+DPS" (kappa levels).
inline SchemeSpec parse_scheme(std::string_view label, int kappa = 16) {
  SchemeSpec s;
  std::string_view base = label;
  constexpr std::string_view kSuffix = "+DPS";
  if (base.size() > kSuffix.size() && base.substr(base.size() - kSuffix.size()) == kSuffix) {
    base.remove_suffix(kSuffix.size());
    s.kappa = kappa;
  }
  s.name = std::string(base);
  if (base == "proposed-OPS") {
  } else if (base == "proposed-FPS") {
    s.phase = PhaseMode::Fixed;
  } else if (base == "FPA") {
    s.bs = BsMode::Fixed;
    s.irs = IrsMode::Fixed;
  } else if (base == "FPA-MA-OPS") {
    s.bs = BsMode::Fixed;
  } else if (base == "FPA-MA-FPS") {
    s.bs = BsMode::Fixed;
    s.phase = PhaseMode::Fixed;
  } else if (base == "MA-FPA") {
    s.irs = IrsMode::Fixed;
  } else if (base == "RPS") {
    s.phase = PhaseMode::Random;
    s.bs = BsMode::Fixed;
    s.irs = IrsMode::Fixed;
  } else if (base == "URA") {
    s.irs = IrsMode::DenseGrid;
  } else {
    throw InvalidInput("unknown scheme: " + std::string(label));
  }
  s.validate();
  return s;
}

/// Nearest point of {0, 2pi/kappa, ..., 2pi(kappa-1)/kappa} on the circle;
/// exact midpoints go to the lower level.
inline CVector quantize_phases(const CVector& phi, int kappa) {
  if (kappa < 2) throw InvalidInput("quantize_phases: kappa must be >= 2");
  const double step = 2.0 * std::numbers::pi / kappa;
  CVector out(phi.size());
  for (Eigen::Index n = 0; n < phi.size(); ++n) {
    double a = std::arg(phi[n]);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    const double pos = a / step;
    double level = std::floor(pos);
    if (pos - level > 0.5 + 1e-12) level += 1.0;  // ties within rounding stay low
    out[n] = std::polar(1.0, step * std::fmod(level, static_cast<double>(kappa)));
  }
  return out;
}

/// Scenario actually optimized by a scheme: the dense grid replaces N.
inline Scenario scheme_scenario(const Scenario& sc, const SchemeSpec& spec) {
  Scenario out = sc;
  if (spec.irs == IrsMode::DenseGrid) out.N = dense_grid_size(sc.region_irs_wl);
  return out;
}

/// Constraint set used while optimizing: pairs of frozen elements are dropped,
/// they cannot move and contribute only a constant.
inline ConstraintSet optimization_constraints(const Scenario& sc, const SchemeSpec& spec) {
  ConstraintSet cs = make_constraint_set(sc);
  const FactorMask m = spec.mask();
  if (!m.o) cs.bs_pairs.clear();
  if (!m.p) cs.irs_pairs.clear();
  return cs;
}

inline RVector initial_bs_positions(const Scenario& sc) {
  return centered_line(sc.M, sc.wavelength() / 2.0);
}

inline RVector initial_irs_positions(const Scenario& sc, const SchemeSpec& spec) {
  if (spec.irs == IrsMode::DenseGrid) return dense_grid_positions(sc.region_irs(), sc.wavelength());
  return irs_initial_positions(sc.N, sc.region_irs(), sc.wavelength() / 2.0);
}

/// Starting point for a scheme. `sc` must already be the scheme scenario.
inline OptimizationPoint initialize_variables(const Scenario& sc, const SchemeSpec& spec,
                                              std::uint64_t phase_seed = 0) {
  const RVector t = initial_bs_positions(sc);
  const RVector u = initial_irs_positions(sc, spec);
  if (u.size() != 2 * sc.N) throw InvalidInput("initialize_variables: N does not match the layout");
  OptimizationPoint x;
  x.o = inverse_position_projection(t, sc.region_bs());
  x.p = inverse_position_projection(u, sc.region_irs());
  x.phi = CVector::Ones(sc.N);
  if (spec.phase == PhaseMode::Random) {
    std::mt19937_64 rng(phase_seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index n = 0; n < x.phi.size(); ++n) x.phi[n] = std::polar(1.0, angle(rng));
  }
  // ZF at the channel seen from the stored pre-images (clipping may shift them slightly)
  const Channels ch = evaluate_channels(position_projection(x.o, sc.region_bs()),
                                        position_projection(x.p, sc.region_irs()), x.phi, sc.fri);
  x.W = zero_forcing_precoder(ch.H, sc.power);
  return x;
}

struct SchemeResult {
  std::string scheme;
  double sum_rate = 0.0;
  double min_user_rate = 0.0;
  std::vector<double> rates;
  double max_violation = 0.0;
  bool feasible = false;
  OuterStatus status = OuterStatus::InfeasibleAtCap;
  int outer_iters = 0;
  int inner_iters_total = 0;
  double final_rho = 0.0;
  double wall_ms = 0.0;
  OptimizationPoint x;  // reported point (phases quantized for DPS)
  RVector t;
  RVector u;
  std::vector<OuterRecord> history;
};

struct RunOptions {
  std::optional<FieldResponseInfo> estimated;  // optimize on this FRI when set
  std::uint64_t phase_seed = 0;                // RPS draw
  double feasibility_tol = 1e-9;
  OuterObserver observer;
};

/// Optimizes a scheme on the estimated FRI (or the true one) and reports
/// rates and constraints on the true FRI.
inline SchemeResult run_scheme(const Scenario& truth, const SchemeSpec& spec, const SolverConfig& cfg,
                               const RunOptions& opts = {}) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc_true = scheme_scenario(truth, spec);
  Scenario sc_opt = sc_true;
  if (opts.estimated) sc_opt.fri = *opts.estimated;
  sc_opt.validate();

  const ConstraintSet cs_opt = optimization_constraints(sc_opt, spec);
  const OptimizationPoint x0 = initialize_variables(sc_opt, spec, opts.phase_seed);
  OuterResult out = rep_outer_solve(x0, sc_opt, cs_opt, cfg, spec.mask(), opts.observer);

  SchemeResult res;
  res.scheme = spec.label();
  res.status = out.status;
  res.outer_iters = out.outer_iters;
  res.inner_iters_total = out.inner_iters_total;
  res.final_rho = out.final_rho;
  res.history = std::move(out.history);
  res.x = std::move(out.x);
  if (spec.discrete()) res.x.phi = quantize_phases(res.x.phi, spec.kappa);

  const ConstraintSet cs_full = make_constraint_set(sc_true);
  const Evaluation ev = evaluate(res.x, sc_true, cs_full);
  res.t = ev.t;
  res.u = ev.u;
  res.rates = ev.rates.rate;
  res.sum_rate = ev.rates.sum;
  res.min_user_rate = ev.rates.min();
  res.max_violation = ev.max_violation();
  res.feasible = res.max_violation <= opts.feasibility_tol;
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace maris
