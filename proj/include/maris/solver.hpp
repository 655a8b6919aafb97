#pragma once

// Limited-memory Riemannian BFGS with Armijo backtracking and a cautious
// memory update, plus the exact-penalty outer loop that drives the penalty
// weight up and the smoothing parameter down until all constraints hold.

#include "maris/manifold.hpp"
#include "maris/objective.hpp"

#include <cmath>
#include <concepts>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace maris {

class SolverAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
struct MemoryEntry {
  T s;
  T y;
  double delta = 0.0;  // 1 / <s, y>
};

struct LineSearchConfig {
  double sigma = 1e-4;
  double gamma = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 60;
};

struct SolverConfig {
  int memory_size = 10;
  LineSearchConfig line_search;
  int max_inner_iters = 5000;

  double rho0 = 10.0;
  double theta_rho = 10.0;
  double u0 = 1.0;
  double theta_u = 0.5;
  double u_min = 1e-6;
  double eps0 = 1e-3;
  double theta_eps = 0.5;
  double eps_min = 1e-8;
  double tau_outer = 1e-6;
  int max_outer_iters = 30;
  double feasibility_tol = 1e-9;

  void validate() const {
    const auto fail = [](const char* what) { throw InvalidInput(std::string("SolverConfig: ") + what); };
    if (memory_size < 1) fail("memory_size must be positive");
    if (!(line_search.sigma > 0.0 && line_search.sigma < 1.0)) fail("sigma must be in (0,1)");
    if (!(line_search.gamma > 0.0 && line_search.gamma < 1.0)) fail("gamma must be in (0,1)");
    if (!(line_search.initial_step > 0.0)) fail("initial step must be positive");
    if (line_search.max_backtracks < 0) fail("max_backtracks must be >= 0");
    if (max_inner_iters < 1 || max_outer_iters < 1) fail("iteration caps must be positive");
    if (!(theta_rho > 1.0)) fail("theta_rho must exceed 1");
    if (!(theta_u > 0.0 && theta_u < 1.0)) fail("theta_u must be in (0,1)");
    if (!(theta_eps > 0.0 && theta_eps < 1.0)) fail("theta_eps must be in (0,1)");
    if (!(u_min > 0.0 && eps_min > 0.0 && tau_outer > 0.0)) fail("lower bounds must be positive");
    if (!(rho0 >= 0.0 && u0 > 0.0 && eps0 > 0.0)) fail("invalid initial penalty state");
  }
};

/// Direction -H grad from the limited-memory recursion. `memory` is ordered
/// oldest first and must already live in the tangent space of grad.
template <class T, class Inner>
T two_loop_direction(const T& grad, std::span<const MemoryEntry<T>> memory, Inner&& inner) {
  T d = grad;
  std::vector<double> varrho(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    varrho[i] = memory[i].delta * inner(memory[i].s, d);
    d -= varrho[i] * memory[i].y;
  }
  if (!memory.empty()) {
    const auto& last = memory.back();
    const double yy = inner(last.y, last.y);
    const double scale = inner(last.s, last.y) / yy;
    if (!std::isfinite(scale)) throw SolverAbort("two_loop_direction: non-finite scaling");
    d *= scale;
  }
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double beta = memory[i].delta * inner(memory[i].y, d);
    d += (varrho[i] - beta) * memory[i].s;
  }
  const double check = inner(d, d);
  if (!std::isfinite(check)) throw SolverAbort("two_loop_direction: non-finite direction");
  d *= -1.0;
  return d;
}

template <class Point>
struct LineSearchResult {
  double alpha = 0.0;
  Point x;
  double value = 0.0;
  int backtracks = 0;
  bool stagnated = false;
};

/// Backtracking on g(R_x(gamma^n tau d)) <= g(x) + sigma gamma^n tau <grad, d>.
/// A trial whose retraction degenerates or whose value is not finite counts as
/// rejected. When the cap is exceeded the result is a zero step flagged
/// `stagnated`.
template <class Point, class Dir, class Value, class Retract>
LineSearchResult<Point> armijo_search(const Point& x, const Dir& d, double g_at_x, double slope,
                                      Value&& value, Retract&& retract_fn,
                                      const LineSearchConfig& cfg) {
  double alpha = cfg.initial_step;
  for (int n = 0; n <= cfg.max_backtracks; ++n, alpha *= cfg.gamma) {
    try {
      Point trial = retract_fn(x, d, alpha);
      const double g = value(trial);
      if (std::isfinite(g) && g <= g_at_x + cfg.sigma * alpha * slope) {
        return {alpha, std::move(trial), g, n, false};
      }
    } catch (const DegenerateRetraction&) {
    }
  }
  return {0.0, x, g_at_x, cfg.max_backtracks + 1, true};
}

template <class P>
concept ManifoldProblem = requires(const P& prob, const typename P::Point& x,
                                   const typename P::Tangent& v, double a) {
  { prob.value(x) } -> std::convertible_to<double>;
  { prob.gradient(x) } -> std::convertible_to<typename P::Tangent>;
  { prob.retract(x, v, a) } -> std::convertible_to<typename P::Point>;
  { prob.transport(x, v) } -> std::convertible_to<typename P::Tangent>;
  { prob.inner(v, v) } -> std::convertible_to<double>;
  { prob.distance(x, x) } -> std::convertible_to<double>;
};

enum class InnerStop { StepBelowThreshold, LineSearchStagnated, IterationCap };

struct InnerIterate {
  int iteration = 0;
  double previous = 0.0;  // g before the step
  double value = 0.0;  // g after the step
  double step = 0.0;   // accepted alpha
  double move = 0.0;   // prob.distance between consecutive iterates
  double grad_norm = 0.0;  // at the start of the iteration
  bool stored = false;     // cautious update accepted
  bool reset = false;      // non-descent fallback used
  int memory = 0;          // entries after the update
};

template <class P>
struct InnerResult {
  typename P::Point x;
  double value = 0.0;
  int iterations = 0;
  InnerStop stop = InnerStop::IterationCap;
  std::vector<InnerIterate> trace;
};

/// Read-only view handed to an observer after every accepted iterate.
template <class P>
struct InnerView {
  const InnerIterate& iterate;
  const typename P::Point& x;
  std::span<const MemoryEntry<typename P::Tangent>> memory;
};

/// Limited-memory RBFGS for min g over the manifold with fixed penalty state.
/// Stops when the iterate moves by at most `eps`.
template <ManifoldProblem P>
InnerResult<P> rbfgs_inner_solve(const P& prob, const typename P::Point& x0, double eps,
                                 const SolverConfig& cfg,
                                 const std::function<void(const InnerView<P>&)>& observer = {}) {
  using Tangent = typename P::Tangent;
  const auto inner = [&](const Tangent& a, const Tangent& b) { return prob.inner(a, b); };
  const auto value = [&](const typename P::Point& x) { return prob.value(x); };
  const auto retract_fn = [&](const typename P::Point& x, const Tangent& d, double a) {
    return prob.retract(x, d, a);
  };

  InnerResult<P> res;
  res.x = x0;
  res.value = prob.value(x0);
  Tangent grad = prob.gradient(x0);
  double grad_norm = std::sqrt(inner(grad, grad));
  if (!std::isfinite(res.value) || !std::isfinite(grad_norm)) {
    std::ostringstream msg;
    msg << "rbfgs_inner_solve: non-finite objective at start (g=" << res.value
        << ", |grad|=" << grad_norm << ")";
    throw SolverAbort(msg.str());
  }

  std::deque<MemoryEntry<Tangent>> memory;
  std::vector<MemoryEntry<Tangent>> contiguous;
  for (int l = 0; l < cfg.max_inner_iters; ++l) {
    InnerIterate it;
    it.iteration = l + 1;
    it.grad_norm = grad_norm;
    it.previous = res.value;

    contiguous.assign(memory.begin(), memory.end());
    Tangent d = two_loop_direction<Tangent>(
        grad, std::span<const MemoryEntry<Tangent>>(contiguous), inner);
    double slope = inner(grad, d);
    if (!(slope < 0.0)) {
      memory.clear();
      d = -1.0 * grad;
      slope = -grad_norm * grad_norm;
      it.reset = true;
    }

    // without curvature pairs the trial step is capped at unit length
    LineSearchConfig ls_cfg = cfg.line_search;
    if (memory.empty() && grad_norm > 1.0) ls_cfg.initial_step /= grad_norm;
    auto ls = armijo_search(res.x, d, res.value, slope, value, retract_fn, ls_cfg);
    it.step = ls.alpha;
    it.value = ls.value;
    res.iterations = l + 1;
    if (ls.stagnated) {
      it.memory = static_cast<int>(memory.size());
      res.trace.push_back(it);
      res.stop = InnerStop::LineSearchStagnated;
      if (observer) observer({res.trace.back(), res.x, {}});
      return res;
    }
    it.move = prob.distance(ls.x, res.x);
    if (it.move <= eps) {
      res.x = std::move(ls.x);
      res.value = ls.value;
      it.memory = static_cast<int>(memory.size());
      res.trace.push_back(it);
      res.stop = InnerStop::StepBelowThreshold;
      if (observer) observer({res.trace.back(), res.x, {}});
      return res;
    }

    Tangent grad_next = prob.gradient(ls.x);
    const double grad_next_norm = std::sqrt(inner(grad_next, grad_next));
    if (!std::isfinite(ls.value) || !std::isfinite(grad_next_norm)) {
      throw SolverAbort("rbfgs_inner_solve: non-finite objective or gradient after a step");
    }

    Tangent s = prob.transport(ls.x, ls.alpha * d);
    Tangent y = grad_next - prob.transport(ls.x, grad);
    const double s_norm = std::sqrt(inner(s, s));
    for (auto& m : memory) {
      m.s = prob.transport(ls.x, m.s);
      m.y = prob.transport(ls.x, m.y);
    }
    if (s_norm > 0.0) {
      s *= 1.0 / s_norm;
      y *= 1.0 / s_norm;
      const double sy = inner(s, y);
      // <s,s> = 1 after normalization
      if (sy > 0.0 && sy >= 1e-4 * grad_norm) {
        memory.push_back({std::move(s), std::move(y), 1.0 / sy});
        if (static_cast<int>(memory.size()) > cfg.memory_size) memory.pop_front();
        it.stored = true;
      }
    }

    res.x = std::move(ls.x);
    res.value = ls.value;
    grad = std::move(grad_next);
    grad_norm = grad_next_norm;
    it.memory = static_cast<int>(memory.size());
    res.trace.push_back(it);
    if (observer) {
      contiguous.assign(memory.begin(), memory.end());
      observer({res.trace.back(), res.x, std::span<const MemoryEntry<Tangent>>(contiguous)});
    }
  }
  res.stop = InnerStop::IterationCap;
  return res;
}

enum class OuterStatus { Converged, FeasibleAtCap, InfeasibleAtCap };

inline const char* to_string(OuterStatus s) {
  switch (s) {
    case OuterStatus::Converged: return "converged";
    case OuterStatus::FeasibleAtCap: return "feasible_at_cap";
    case OuterStatus::InfeasibleAtCap: return "infeasible_at_cap";
  }
  return "unknown";
}

/// One outer pass of the exact-penalty loop.
struct OuterRecord {
  int iteration = 0;
  double objective = 0.0;  // g at the kept point, with the penalty state used in this pass
  double sum_rate = 0.0;
  double max_violation = 0.0;
  double rho = 0.0;        // penalty weight used in this pass
  double smoothing = 0.0;  // smoothing used in this pass
  double eps = 0.0;        // inner threshold used in this pass
  double move = 0.0;       // solution_distance(X^{l+1}, X^l) after a possible revert
  int inner_iters = 0;
  bool reverted = false;
};

struct OuterResult {
  OptimizationPoint x;
  RVector t;  // BS positions
  RVector u;  // IRS positions
  OuterStatus status = OuterStatus::InfeasibleAtCap;
  std::vector<OuterRecord> history;
  int outer_iters = 0;
  int inner_iters_total = 0;
  PenaltyState last_penalty;  // state used by the final inner solve
  double final_rho = 0.0;     // after the final update
  double max_violation = 0.0;

  bool feasible() const { return status != OuterStatus::InfeasibleAtCap; }
};

struct OuterObserver {
  std::function<void(const InnerView<PenalizedObjective>&, const PenaltyState&)> inner;
  std::function<void(const OuterRecord&)> outer;
};

/// Exact-penalty outer loop around rbfgs_inner_solve.
inline OuterResult rep_outer_solve(const OptimizationPoint& x0, const Scenario& sc,
                                   const ConstraintSet& cs, const SolverConfig& cfg,
                                   const FactorMask& mask = {},
                                   const OuterObserver& observer = {}) {
  cfg.validate();
  OuterResult res;
  PenaltyState pen{cfg.rho0, cfg.u0, cfg.eps0};
  OptimizationPoint x = x0;

  for (int l = 1; l <= cfg.max_outer_iters; ++l) {
    const PenalizedObjective prob(sc, cs, pen, mask);
    std::function<void(const InnerView<PenalizedObjective>&)> hook;
    if (observer.inner) {
      hook = [&](const InnerView<PenalizedObjective>& v) { observer.inner(v, pen); };
    }
    auto inner_res = rbfgs_inner_solve(prob, x, pen.eps, cfg, hook);
    res.inner_iters_total += inner_res.iterations;

    OuterRecord rec;
    rec.iteration = l;
    rec.rho = pen.rho;
    rec.smoothing = pen.smoothing;
    rec.eps = pen.eps;
    rec.inner_iters = inner_res.iterations;

    OptimizationPoint next = std::move(inner_res.x);
    Evaluation ev = evaluate(next, sc, cs);
    const PenaltyState used = pen;
    if (ev.max_violation() > cfg.feasibility_tol) {
      pen.rho *= cfg.theta_rho;
      next = x;
      ev = evaluate(next, sc, cs);
      rec.reverted = true;
    }
    pen.smoothing = std::max(cfg.u_min, cfg.theta_u * pen.smoothing);
    pen.eps = std::max(cfg.eps_min, cfg.theta_eps * pen.eps);

    rec.move = solution_distance(next, x, sc);
    rec.objective = smoothed_objective(ev, used);
    rec.sum_rate = ev.rates.sum;
    rec.max_violation = ev.max_violation();
    res.history.push_back(rec);
    if (observer.outer) observer.outer(rec);

    x = std::move(next);
    res.outer_iters = l;
    res.last_penalty = used;
    res.final_rho = pen.rho;
    res.max_violation = rec.max_violation;

    const bool feasible = rec.max_violation <= cfg.feasibility_tol;
    if (rec.move < cfg.tau_outer && feasible && pen.smoothing <= cfg.u_min &&
        used.eps <= cfg.eps_min) {
      res.status = OuterStatus::Converged;
      break;
    }
    res.status = feasible ? OuterStatus::FeasibleAtCap : OuterStatus::InfeasibleAtCap;
  }

  res.t = position_projection(x.o, sc.region_bs());
  res.u = position_projection(x.p, sc.region_irs());
  res.x = std::move(x);
  return res;
}

}  // namespace maris
