#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <span>
#include <vector>

using namespace maris;

namespace {

using Vec = Eigen::VectorXd;

double dot(const Vec& a, const Vec& b) { return a.dot(b); }

/// 0.5 (z - z*)^T A (z - z*) over z = (o, p); W and phi are frozen.
class Quadratic {
 public:
  using Point = OptimizationPoint;
  using Tangent = TangentDirection;

  Quadratic(Eigen::MatrixXd A, Vec target, int M) : A_(std::move(A)), target_(std::move(target)), M_(M) {}

  Vec z(const Point& x) const {
    Vec v(x.o.size() + x.p.size());
    v << x.o, x.p;
    return v;
  }
  double value(const Point& x) const {
    const Vec e = z(x) - target_;
    return 0.5 * e.dot(A_ * e);
  }
  Tangent gradient(const Point& x) const {
    Tangent g = Tangent::zeros_like(x);
    const Vec v = A_ * (z(x) - target_);
    g.o = v.head(M_);
    g.p = v.tail(v.size() - M_);
    return g;
  }
  Point retract(const Point& x, const Tangent& d, double a) const {
    return maris::retract(x, d, a, 1.0, FactorMask{false, false, true, true});
  }
  Tangent transport(const Point& x, const Tangent& d) const { return maris::transport(x, d); }
  double inner(const Tangent& a, const Tangent& b) const { return inner_product(a, b); }
  double distance(const Point& a, const Point& b) const { return maris::distance(a, b); }

 private:
  Eigen::MatrixXd A_;
  Vec target_;
  int M_;
};

Scenario desk_scenario(std::uint64_t seed, double min_rate = 1.0) {
  ScenarioParams p;
  p.min_rate = min_rate;
  return generate_scenario(seed, p);
}

}  // namespace

TEST(TwoLoop, EmptyMemory) {
  const Vec g{{1.0, -2.0, 3.0}};
  const auto d = two_loop_direction<Vec>(g, {}, dot);
  EXPECT_EQ(d, -g);
}

TEST(TwoLoop, OneDimensionalHandTrace) {
  std::vector<MemoryEntry<Vec>> mem{{Vec::Ones(1), Vec::Ones(1), 1.0}};
  const auto d = two_loop_direction<Vec>(Vec::Ones(1), mem, dot);
  EXPECT_NEAR(d[0], -1.0, 1e-15);
  const Eigen::MatrixXd H = oracle::dense_inverse_hessian({Vec::Ones(1)}, {Vec::Ones(1)}, 1);
  EXPECT_NEAR(d[0], -H(0, 0), 1e-15);
}

TEST(TwoLoop, MatchesDenseUpdate) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  const auto rand_vec = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 3;
    std::vector<MemoryEntry<Vec>> mem;
    std::vector<Vec> S, Y;
    for (int i = 0; i < m; ++i) {
      Vec s = rand_vec(5);
      Vec y = s + 0.3 * rand_vec(5);
      if (s.dot(y) <= 0.0) y = -y + 2.0 * s;
      S.push_back(s);
      Y.push_back(y);
      mem.push_back({s, y, 1.0 / s.dot(y)});
    }
    const Vec g = rand_vec(5);
    const Vec d = two_loop_direction<Vec>(g, mem, dot);
    const Vec ref = -oracle::dense_inverse_hessian(S, Y, 5) * g;
    EXPECT_LE((d - ref).norm(), 1e-10 * ref.norm()) << "trial " << trial;
  }
}

TEST(TwoLoop, NonFiniteAborts) {
  std::vector<MemoryEntry<Vec>> mem{{Vec::Ones(2), Vec::Zero(2), 1.0}};
  EXPECT_THROW(two_loop_direction<Vec>(Vec::Ones(2), mem, dot), SolverAbort);
}

TEST(Armijo, QuadraticHalvesOnce) {
  const auto value = [](double x) { return x * x; };
  const auto step = [](double x, double d, double a) { return x + a * d; };
  LineSearchConfig cfg;
  const auto r = armijo_search(1.0, -2.0, 1.0, 2.0 * 1.0 * -2.0, value, step, cfg);
  EXPECT_DOUBLE_EQ(r.alpha, 0.5);
  EXPECT_DOUBLE_EQ(r.x, 0.0);
  EXPECT_EQ(r.backtracks, 1);
  EXPECT_LE(r.value, 1.0);
}

TEST(Armijo, ZeroDirection) {
  const auto value = [](double x) { return x * x; };
  const auto step = [](double x, double d, double a) { return x + a * d; };
  const auto r = armijo_search(0.7, 0.0, 0.49, 0.0, value, step, LineSearchConfig{});
  EXPECT_EQ(r.backtracks, 0);
  EXPECT_EQ(r.x, 0.7);
}

TEST(Armijo, StagnationIsZeroStep) {
  const auto value = [](double x) { return x; };  // slope claims descent, function disagrees
  const auto step = [](double x, double d, double a) { return x + a * d; };
  LineSearchConfig cfg;
  cfg.max_backtracks = 5;
  const auto r = armijo_search(0.0, 1.0, 0.0, -1.0, value, step, cfg);
  EXPECT_TRUE(r.stagnated);
  EXPECT_EQ(r.alpha, 0.0);
  EXPECT_EQ(r.x, 0.0);
}

TEST(InnerSolve, StationaryStartReturnsAfterOneIteration) {
  const int M = 2, N = 2;
  const Vec target = Vec::Zero(M + 2 * N);
  Quadratic prob(Eigen::MatrixXd::Identity(M + 2 * N, M + 2 * N), target, M);
  OptimizationPoint x0{CMatrix::Constant(1, 1, 1.0), CVector::Ones(N), Vec::Zero(M), Vec::Zero(2 * N)};
  const auto res = rbfgs_inner_solve(prob, x0, 1e-10, SolverConfig{});
  EXPECT_EQ(res.iterations, 1);
  EXPECT_EQ(res.x.o, x0.o);
}

TEST(InnerSolve, EuclideanQuadraticConverges) {
  const int M = 3, N = 4, n = M + 2 * N;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n * n; ++i) B.data()[i] = nd(rng);
  const Eigen::MatrixXd A = B.transpose() * B + 0.5 * Eigen::MatrixXd::Identity(n, n);
  Vec target(n);
  for (int i = 0; i < n; ++i) target[i] = nd(rng);
  Quadratic prob(A, target, M);
  OptimizationPoint x0{CMatrix::Constant(1, 1, 1.0), CVector::Ones(N), Vec::Zero(M), Vec::Zero(2 * N)};
  SolverConfig cfg;
  cfg.max_inner_iters = 50;
  const auto res = rbfgs_inner_solve(prob, x0, 1e-14, cfg);
  EXPECT_LE(res.iterations, 50);
  EXPECT_LE((prob.z(res.x) - target).norm(), 1e-8);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i].value, res.trace[i - 1].value);
}

TEST(InnerSolve, DeskScaleMonotoneAndOnManifold) {
  const auto sc = desk_scenario(3);
  const auto cs = make_constraint_set(sc);
  const auto x0 = initialize_variables(sc, parse_scheme("proposed-OPS"));
  const PenalizedObjective prob(sc, cs, {10.0, 0.1, 1e-4});
  SolverConfig cfg;
  cfg.max_inner_iters = 300;
  double prev = prob.value(x0);
  int violations = 0;
  double worst_power = 0.0, worst_mod = 0.0, worst_tangency = 0.0;
  const auto res = rbfgs_inner_solve<PenalizedObjective>(prob, x0, 1e-4, cfg, [&](const InnerView<PenalizedObjective>& v) {
    if (v.iterate.value > prev) ++violations;
    prev = v.iterate.value;
    const auto d = validate_point(v.x, sc.power);
    worst_power = std::max(worst_power, d.power_residual);
    worst_mod = std::max(worst_mod, d.max_modulus_residual);
    for (const auto& m : v.memory) {
      EXPECT_GT(m.delta, 0.0);
      const auto rs = tangency_residual(v.x, m.s);
      const auto ry = tangency_residual(v.x, m.y);
      worst_tangency = std::max({worst_tangency, rs.W, rs.phi, ry.W, ry.phi});
    }
  });
  EXPECT_GT(res.iterations, 1);
  EXPECT_EQ(violations, 0);
  EXPECT_LE(worst_power, 1e-9);
  EXPECT_LE(worst_mod, 1e-12);
  EXPECT_LE(worst_tangency, 1e-8);
}

TEST(OuterSolve, InactiveConstraintsKeepRho) {
  const auto sc = desk_scenario(5, 0.0);
  const auto cs = make_constraint_set(sc);
  const auto x0 = initialize_variables(sc, parse_scheme("proposed-FPS"));
  SolverConfig cfg;
  double worst = -INFINITY;
  OuterObserver obs;
  obs.outer = [&](const OuterRecord& r) {
    worst = std::max(worst, r.max_violation);
    EXPECT_EQ(r.rho, cfg.rho0);
    EXPECT_FALSE(r.reverted);
  };
  const auto res = rep_outer_solve(x0, sc, cs, cfg, parse_scheme("proposed-FPS").mask(), obs);
  EXPECT_LE(worst, 0.0);
  EXPECT_EQ(res.final_rho, cfg.rho0);
}

TEST(OuterSolve, DeskScaleFeasibleAndImproves) {
  const auto sc = desk_scenario(9);
  const auto cs = make_constraint_set(sc);
  const auto x0 = initialize_variables(sc, parse_scheme("proposed-OPS"));
  const auto res = rep_outer_solve(x0, sc, cs, SolverConfig{});
  ASSERT_TRUE(res.feasible());
  const auto ev = evaluate(res.x, sc, cs);
  EXPECT_LE(ev.max_violation(), 1e-9);
  EXPECT_GE(ev.rates.sum, evaluate(x0, sc, cs).rates.sum);
  EXPECT_GE(ev.rates.min(), sc.min_rate - 1e-9);
  EXPECT_LT((res.t - ev.t).norm(), 1e-15);

  // restarting at the converged point with the final schedule ends after one pass
  SolverConfig warm;
  warm.rho0 = res.last_penalty.rho;
  warm.u0 = warm.u_min;
  warm.eps0 = warm.eps_min;
  const auto again = rep_outer_solve(res.x, sc, cs, warm);
  EXPECT_EQ(again.status, OuterStatus::Converged);
  EXPECT_EQ(again.outer_iters, 1);
  EXPECT_EQ(again.final_rho, warm.rho0);
}

TEST(OuterSolve, RejectsInvalidConfig) {
  const auto sc = desk_scenario(1);
  SolverConfig cfg;
  cfg.theta_rho = 1.0;
  EXPECT_THROW(rep_outer_solve(initialize_variables(sc, parse_scheme("FPA")), sc, make_constraint_set(sc), cfg),
               InvalidInput);
}
