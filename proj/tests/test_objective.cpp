#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace maris;
using oracle::central_differences;
using oracle::entrywise_error;

namespace {

Scenario make_scenario(std::uint64_t seed, int M, int N, int K, int L) {
  ScenarioParams p;
  p.M = M;
  p.N = N;
  p.K = K;
  p.L = L;
  return generate_scenario(seed, p);
}

OptimizationPoint point_for(const Scenario& sc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_point(sc, rng);
}

double sum_rate(const OptimizationPoint& x, const Scenario& sc) {
  const auto cs = make_constraint_set(sc);
  return evaluate(x, sc, cs).rates.sum;
}

}  // namespace

TEST(PositionProjection, Examples) {
  EXPECT_EQ(position_projection(RVector::Zero(3), 4.0), RVector::Zero(3));
  EXPECT_NEAR(position_projection(RVector::Constant(1, 1.0), 4.0)[0], 1.5232, 1e-4);
  const RVector big = position_projection(RVector::Constant(1, 50.0), 4.0);
  EXPECT_LE(big[0], 2.0);
  EXPECT_NEAR(big[0], 2.0, 1e-12);
}

TEST(ConstraintValues, DistanceAndRate) {
  auto sc = make_scenario(1, 2, 2, 1, 2);
  const double lambda = sc.wavelength();
  const auto cs = make_constraint_set(sc);
  OptimizationPoint x = point_for(sc, 2);
  x.o = inverse_position_projection(RVector{{-lambda / 4.0, lambda / 4.0}}, sc.region_bs());
  x.p = inverse_position_projection(RVector{{0.01, 0.02, 0.01, 0.02}}, sc.region_irs());
  RVector h = constraint_values(x, sc, cs);
  EXPECT_NEAR(h[0], 0.0, 1e-9);  // exactly lambda/2 apart
  EXPECT_GT(h[1], 0.0);          // coincident elements
  EXPECT_NEAR(h[1] * cs.unit, lambda / 2.0, 1e-12);

  const double r = evaluate(x, sc, cs).rates.rate[0];
  sc.min_rate = r - 1.0;
  h = constraint_values(x, sc, cs);
  EXPECT_NEAR(h[2], -1.0, 1e-12);
}

TEST(SmoothedPenalty, Examples) {
  EXPECT_NEAR(smoothed_penalty(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(smoothed_penalty(1.0, 0.5), 1.0635, 1e-4);
  EXPECT_NEAR(smoothed_penalty(1e6, 1e-6), 1e6, 1e-6);
  EXPECT_TRUE(std::isfinite(smoothed_penalty(1e3, 1e-6)));
}

TEST(SmoothedPenalty, Sandwich) {
  for (double s : {1e-6, 1e-3, 0.1, 1.0, 7.0}) {
    for (double h : {-100.0, -1.0, -1e-3, 0.0, 1e-3, 0.5, 30.0}) {
      const double v = smoothed_penalty(h, s);
      EXPECT_GE(v, std::max(0.0, h));
      EXPECT_LE(v, std::max(0.0, h) + s * std::log(2.0) * (1.0 + 1e-12));
    }
  }
}

TEST(SmoothedObjective, PenaltyOffAndMonotoneInRho) {
  const auto sc = make_scenario(3, 3, 4, 2, 3);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 4);
  EXPECT_EQ(smoothed_objective(x, sc, {0.0, 1.0, 1e-3}, cs), -sum_rate(x, sc));
  double prev = -INFINITY;
  for (double rho : {0.0, 0.1, 1.0, 10.0, 1e3}) {
    const double g = smoothed_objective(x, sc, {rho, 0.3, 1e-3}, cs);
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(SmoothedObjective, FeasibleLimit) {
  RVector h{{-0.3, -1.0, -0.01}};
  double prev = INFINITY;
  for (double s : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const double v = penalty_term(h, {1.0, s, 1e-3});
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-20);
}

TEST(LseWeights, Examples) {
  const RVector w = lse_weights(RVector{{0.0, -10.0 * 0.2, 1e9}}, 0.2);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_NEAR(w[1], 4.54e-5, 1e-7);
  EXPECT_EQ(w[2], 1.0);
  EXPECT_EQ(lse_weights(RVector::Constant(1, -1e9), 1e-6)[0], 0.0);
}

TEST(GradRateW, OrthogonalGivesZero) {
  CMatrix H(2, 2), W(2, 2);
  H << 1.0, 0.0, 0.0, 1.0;
  W << 0.0, 0.0, 1.0, 0.0;  // both columns orthogonal to h_0 = e_0
  EXPECT_LT(grad_rate_W(H, W, 0, 1.0).norm(), 1e-15);
}

TEST(GradRateW, ScalarFiniteDifference) {
  const cd h(0.7, -0.2);
  const double noise = 0.3;
  const auto rate = [&](cd w) { return std::log2(1.0 + std::norm(std::conj(h) * w) / noise); };
  const cd w(0.4, 0.9);
  const double step = 1e-6;
  const double re = (rate(w + step) - rate(w - step)) / (2 * step);
  const double im = (rate(w + cd(0, step)) - rate(w - cd(0, step))) / (2 * step);
  const CMatrix g = grad_rate_W(CMatrix::Constant(1, 1, h), CMatrix::Constant(1, 1, w), 0, noise);
  EXPECT_NEAR(g(0, 0).real(), re, 1e-6 * std::abs(re));
  EXPECT_NEAR(g(0, 0).imag(), im, 1e-6 * std::abs(im));
}

TEST(GradRateW, NonzeroAtZeroForcing) {
  const auto sc = make_scenario(5, 4, 8, 3, 6);
  const auto spec = parse_scheme("proposed-OPS");
  const auto x = initialize_variables(sc, spec);
  const auto cs = make_constraint_set(sc);
  const auto g = riemannian_gradient(x, sc, {0.0, 1.0, 1e-3}, cs);
  EXPECT_GT(g.W.norm(), 0.0);
}

TEST(GradRatePhi, CircleTangentFiniteDifference) {
  // N = 1 is a common phase, the rate cannot move; N = 3 is the general case
  for (int N : {1, 3}) {
    auto sc = make_scenario(6, 2, N, 1, 3);
    auto x = point_for(sc, 7);
    const auto cs = make_constraint_set(sc);
    const Evaluation ev = evaluate(x, sc, cs);
    const CVector g = grad_rate_phi(ev.ch.H, x.W, ev.ch.G, ev.ch.f[0], 0, sc.noise);
    for (int n = 0; n < N; ++n) {
      // derivative along phi_n(theta) = phi_n e^{j theta}
      const auto rate_at = [&](double theta) {
        OptimizationPoint y = x;
        y.phi[n] *= std::polar(1.0, theta);
        return sum_rate(y, sc);
      };
      const double step = 1e-6;
      const double fd = (rate_at(step) - rate_at(-step)) / (2 * step);
      const double analytic = (std::conj(g[n]) * cd(0.0, 1.0) * x.phi[n]).real();
      const double scale = std::max(std::abs(fd), g.norm());
      EXPECT_NEAR(analytic, fd, 1e-6 * scale) << "N=" << N << " n=" << n;
    }
  }
}

TEST(GradRatePhi, ZeroPrecoderAndRelabeling) {
  const auto sc = make_scenario(8, 3, 4, 3, 4);
  const auto x = point_for(sc, 9);
  const auto cs = make_constraint_set(sc);
  const Evaluation ev = evaluate(x, sc, cs);
  const CMatrix Z = CMatrix::Zero(3, 3);
  EXPECT_EQ(grad_rate_phi(ev.ch.H, Z, ev.ch.G, ev.ch.f[0], 0, sc.noise).norm(), 0.0);

  // swap users 1 and 2 in both H and W
  CMatrix H2 = ev.ch.H, W2 = x.W;
  H2.col(1).swap(H2.col(2));
  W2.col(1).swap(W2.col(2));
  const CVector a = grad_rate_phi(ev.ch.H, x.W, ev.ch.G, ev.ch.f[0], 0, sc.noise);
  const CVector b = grad_rate_phi(H2, W2, ev.ch.G, ev.ch.f[0], 0, sc.noise);
  EXPECT_LT((a - b).norm(), 1e-12 * a.norm());
}

TEST(GradRatePositions, SinglePathFiniteDifference) {
  auto sc = make_scenario(10, 1, 1, 1, 1);
  const auto x = point_for(sc, 11);
  const auto pg = grad_rate_positions(x, sc, 0);
  const auto rate_t = [&](double dt) {
    RVector t = position_projection(x.o, sc.region_bs());
    const RVector u = position_projection(x.p, sc.region_irs());
    t[0] += dt;
    return rate_and_sum(evaluate_channels(t, u, x.phi, sc.fri).H, x.W, sc.noise).sum;
  };
  const double step = 1e-6 * sc.wavelength();
  const double fd = (rate_t(step) - rate_t(-step)) / (2 * step);
  // a single path keeps every modulus fixed, so the rate cannot depend on t
  EXPECT_NEAR(fd, 0.0, 1e-6);
  EXPECT_NEAR(pg.t[0], fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(GradRatePositions, BroadsideBsIsFlat) {
  auto sc = make_scenario(12, 3, 4, 2, 4);
  sc.fri.aod_bs.setConstant(std::numbers::pi / 2.0);
  const auto x = point_for(sc, 13);
  for (int k = 0; k < sc.K; ++k) EXPECT_LT(grad_rate_positions(x, sc, k).t.norm(), 1e-9);
}

TEST(GradRatePositions, RandomInstanceFiniteDifference) {
  const auto sc = make_scenario(14, 2, 3, 2, 4);
  const auto x = point_for(sc, 15);
  const RVector t = position_projection(x.o, sc.region_bs());
  const RVector u = position_projection(x.p, sc.region_irs());
  for (int k = 0; k < sc.K; ++k) {
    const auto pg = grad_rate_positions(x, sc, k);
    const auto rate_k = [&](const RVector& tt, const RVector& uu) {
      return rate_and_sum(evaluate_channels(tt, uu, x.phi, sc.fri).H, x.W, sc.noise).rate[k];
    };
    const double step = 1e-6 * sc.wavelength();
    std::vector<double> analytic, numeric;
    for (Eigen::Index m = 0; m < t.size(); ++m) {
      RVector a = t, b = t;
      a[m] += step;
      b[m] -= step;
      numeric.push_back((rate_k(a, u) - rate_k(b, u)) / (2 * step));
      analytic.push_back(pg.t[m]);
    }
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      RVector a = u, b = u;
      a[i] += step;
      b[i] -= step;
      numeric.push_back((rate_k(t, a) - rate_k(t, b)) / (2 * step));
      analytic.push_back(pg.u[i]);
    }
    EXPECT_LE(entrywise_error(analytic, numeric), 1e-5) << "user " << k;
  }
}

TEST(ConstraintGradient, SignConvention) {
  const auto sc = make_scenario(16, 2, 1, 1, 2);
  const auto cs = make_constraint_set(sc);
  OptimizationPoint x = point_for(sc, 17);
  x.o = RVector{{0.4, -0.2}};  // t_0 > t_1
  const auto g = constraint_position_gradient(x, sc, cs, 0);
  const RVector jac = position_projection_jacobian(x.o, sc.region_bs());
  EXPECT_NEAR(g.o[0] * cs.unit, -jac[0], 1e-15);
  EXPECT_NEAR(g.o[1] * cs.unit, jac[1], 1e-15);
}

TEST(ConstraintGradient, CoincidentElementsGiveZero) {
  const auto sc = make_scenario(18, 1, 2, 1, 2);
  const auto cs = make_constraint_set(sc);
  OptimizationPoint x = point_for(sc, 19);
  x.p = RVector{{0.1, -0.3, 0.1, -0.3}};
  const auto g = constraint_position_gradient(x, sc, cs, 0);
  EXPECT_EQ(g.p.norm(), 0.0);
}

TEST(ConstraintGradient, FiniteDifference) {
  const auto sc = make_scenario(20, 4, 5, 2, 3);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 21);
  for (std::size_t i = 0; i < cs.distance_count(); ++i) {
    const auto g = constraint_position_gradient(x, sc, cs, i);
    const auto h_i = [&](const OptimizationPoint& y) { return constraint_values(y, sc, cs)[static_cast<Eigen::Index>(i)]; };
    const auto fd = central_differences(x, h_i, 1e-6);
    std::vector<double> a, n;
    for (Eigen::Index m = 0; m < x.o.size(); ++m) {
      a.push_back(g.o[m]);
      n.push_back(fd.o[m]);
    }
    for (Eigen::Index j = 0; j < x.p.size(); ++j) {
      a.push_back(g.p[j]);
      n.push_back(fd.p[j]);
    }
    EXPECT_LE(entrywise_error(a, n), 1e-6) << "constraint " << i;
  }
}

TEST(RiemannianGradient, PenaltyOffIsProjectedRateGradient) {
  const auto sc = make_scenario(22, 3, 4, 2, 3);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 23);
  const auto g = riemannian_gradient(x, sc, {0.0, 1.0, 1e-3}, cs);
  const auto fd = transport(x, central_differences(x, [&](const OptimizationPoint& y) { return -sum_rate(y, sc); }, 1e-6));
  EXPECT_LE(entrywise_error(g, fd), 1e-5);
}

TEST(RiemannianGradient, TangentToConstraints) {
  const auto sc = make_scenario(24, 4, 6, 3, 5);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 25);
  const auto g = riemannian_gradient(x, sc, {10.0, 0.5, 1e-3}, cs);
  const auto r = tangency_residual(x, g);
  EXPECT_LE(r.W, 1e-9 * g.W.norm() * x.W.norm());
  EXPECT_LE(r.phi, 1e-10 * std::max(1.0, g.phi.cwiseAbs().maxCoeff()));
}

TEST(RiemannianGradient, DirectionalDerivative) {
  const auto sc = make_scenario(26, 3, 4, 2, 4);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 27);
  const PenaltyState pen{10.0, 0.5, 1e-3};
  const auto g = riemannian_gradient(x, sc, pen, cs);
  const double g0 = smoothed_objective(x, sc, pen, cs);
  const double gn2 = inner_product(g, g);
  const auto forward = [&](double eps) {
    return (smoothed_objective(retract(x, g, eps, sc.power), sc, pen, cs) - g0) / eps;
  };
  // one-sided quotient converges at first order
  const double e6 = std::abs(forward(1e-6) - gn2);
  const double e7 = std::abs(forward(1e-7) - gn2);
  EXPECT_NEAR(e6 / e7, 10.0, 1.0);
  EXPECT_NEAR(forward(1e-8), gn2, 1e-4 * gn2);
  // two-sided quotient at eps = 1e-6
  const double eps = 1e-6;
  const double central = (smoothed_objective(retract(x, g, eps, sc.power), sc, pen, cs) -
                          smoothed_objective(retract(x, -g, eps, sc.power), sc, pen, cs)) /
                         (2 * eps);
  EXPECT_NEAR(central, gn2, 1e-4 * gn2);
}

TEST(RiemannianGradient, FullFiniteDifference) {
  const auto sc = make_scenario(28, 2, 3, 2, 4);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 29);
  const PenaltyState pen{10.0, 0.1, 1e-3};
  const auto g = riemannian_gradient(x, sc, pen, cs);
  const auto fd = transport(
      x, central_differences(x, [&](const OptimizationPoint& y) { return smoothed_objective(y, sc, pen, cs); }, 1e-6));
  EXPECT_LE(entrywise_error(g, fd), 1e-5);
}

TEST(RiemannianGradient, MaskedFactorsAreZero) {
  const auto sc = make_scenario(30, 3, 4, 2, 3);
  const auto cs = make_constraint_set(sc);
  const auto x = point_for(sc, 31);
  const auto g = riemannian_gradient(x, sc, {10.0, 1.0, 1e-3}, cs, FactorMask{true, false, true, false});
  EXPECT_EQ(g.phi.norm(), 0.0);
  EXPECT_EQ(g.p.norm(), 0.0);
  EXPECT_GT(g.o.norm(), 0.0);
}
