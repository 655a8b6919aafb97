#pragma once

// Numerical gradient oracle, stationarity measure and channel-gain landscapes.

#include "maris/channel.hpp"
#include "maris/manifold.hpp"
#include "maris/objective.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <ostream>
#include <numbers>
#include <random>

namespace maris {

/// Central differences of g over every real ambient coordinate (real and
/// imaginary parts of W and phi, entries of o and p), projected onto the
/// tangent space at x. Frozen factors are left at zero.
inline TangentDirection finite_difference_gradient(const OptimizationPoint& x, const Scenario& sc,
                                                   const PenaltyState& pen, const ConstraintSet& cs,
                                                   double step, const FactorMask& mask = {}) {
  if (!(step > 0.0)) throw InvalidInput("finite_difference_gradient: step must be positive");
  const auto g = [&](const OptimizationPoint& y) { return smoothed_objective(y, sc, pen, cs); };
  const auto central = [&](auto&& bump) {
    OptimizationPoint plus = x;
    OptimizationPoint minus = x;
    bump(plus, step);
    bump(minus, -step);
    return (g(plus) - g(minus)) / (2.0 * step);
  };

  TangentDirection e = TangentDirection::zeros_like(x);
  if (mask.W) {
    for (Eigen::Index c = 0; c < x.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < x.W.rows(); ++r) {
        const double re = central([&](OptimizationPoint& y, double h) { y.W(r, c) += cd(h, 0.0); });
        const double im = central([&](OptimizationPoint& y, double h) { y.W(r, c) += cd(0.0, h); });
        e.W(r, c) = {re, im};
      }
    }
  }
  if (mask.phi) {
    for (Eigen::Index n = 0; n < x.phi.size(); ++n) {
      const double re = central([&](OptimizationPoint& y, double h) { y.phi[n] += cd(h, 0.0); });
      const double im = central([&](OptimizationPoint& y, double h) { y.phi[n] += cd(0.0, h); });
      e.phi[n] = {re, im};
    }
  }
  if (mask.o) {
    for (Eigen::Index m = 0; m < x.o.size(); ++m) {
      e.o[m] = central([&](OptimizationPoint& y, double h) { y.o[m] += h; });
    }
  }
  if (mask.p) {
    for (Eigen::Index i = 0; i < x.p.size(); ++i) {
      e.p[i] = central([&](OptimizationPoint& y, double h) { y.p[i] += h; });
    }
  }
  return transport(x, e);
}

/// Norm of grad f + rho sum_i lambda_i grad h_i on the manifold, i.e. the
/// Riemannian gradient of g at the given penalty state, over the free factors.
inline double lagrangian_gradient_norm(const OptimizationPoint& x, const Scenario& sc,
                                       const PenaltyState& pen, const ConstraintSet& cs,
                                       const FactorMask& mask = {}) {
  return norm(riemannian_gradient(x, sc, pen, cs, mask));
}

/// Random point on the manifold with positions well inside both regions.
template <class Rng>
OptimizationPoint random_point(const Scenario& sc, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> pre(-1.0, 1.0);
  OptimizationPoint x;
  x.W.resize(sc.M, sc.K);
  for (Eigen::Index i = 0; i < x.W.size(); ++i) x.W.data()[i] = {nd(rng), nd(rng)};
  x.W *= std::sqrt(sc.power) / x.W.norm();
  x.phi.resize(sc.N);
  for (Eigen::Index n = 0; n < sc.N; ++n) x.phi[n] = std::polar(1.0, 2.0 * std::numbers::pi * (pre(rng) + 1.0) / 2.0);
  x.o.resize(sc.M);
  for (Eigen::Index m = 0; m < sc.M; ++m) x.o[m] = pre(rng);
  x.p.resize(2 * sc.N);
  for (Eigen::Index i = 0; i < 2 * sc.N; ++i) x.p[i] = pre(rng);
  return x;
}

/// Grid coordinate i of `res` points spanning [-A/2, A/2].
inline double landscape_coordinate(int i, int res, double A) {
  return -A / 2.0 + A * static_cast<double>(i) / static_cast<double>(res - 1);
}

/// ||h_k||^2 while IRS element n sweeps a res x res grid over the IRS region.
/// Entry (r, c) places the element at (x_c, y_r). Other variables stay fixed.
inline RMatrix gain_landscape(const Scenario& sc, const OptimizationPoint& x, int k, int element,
                              int res) {
  if (res < 2) throw InvalidInput("gain_landscape: resolution must be >= 2");
  if (k < 0 || k >= sc.K) throw InvalidInput("gain_landscape: user index out of range");
  if (element < 0 || element >= sc.N) throw InvalidInput("gain_landscape: element out of range");
  const double A = sc.region_irs();
  const RVector t = position_projection(x.o, sc.region_bs());
  RVector u = position_projection(x.p, A);
  RMatrix out(res, res);
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      u[2 * element] = landscape_coordinate(c, res, A);
      u[2 * element + 1] = landscape_coordinate(r, res, A);
      const CMatrix G = assemble_G(t, u, sc.fri);
      out(r, c) = channel_power_gain(x.phi, assemble_f(u, sc.fri, k), G);
    }
  }
  return out;
}

/// Cells strictly greater than all 8 neighbours that exist.
inline int count_local_maxima(const RMatrix& m) {
  int count = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dc = -1; dc <= 1 && peak; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const Eigen::Index rr = r + dr;
          const Eigen::Index cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= m.rows() || cc >= m.cols()) continue;
          if (!(m(r, c) > m(rr, cc))) peak = false;
        }
      }
      if (peak) ++count;
    }
  }
  return count;
}

/// Two header lines (extent, resolution) followed by the matrix, one row per line.
inline void write_landscape(std::ostream& os, const RMatrix& m, double A) {
  os << "# extent " << -A / 2.0 << ' ' << A / 2.0 << ' ' << -A / 2.0 << ' ' << A / 2.0 << '\n';
  os << "# resolution " << m.cols() << ' ' << m.rows() << '\n';
  os.precision(12);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
}

}  // namespace maris
