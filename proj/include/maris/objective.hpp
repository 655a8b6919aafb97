#pragma once

/// Penalized, smoothed sum-rate objective and its analytic gradients.
///
/// With f(X) = -sum_k r_k and inequality constraints h_i(X) <= 0 over
///   - BS pairs     h = (d_min - |t_m - t_m'|) / unit
///   - IRS pairs    h = (d_min - ||u_n - u_n'||) / unit
///   - user rates   h = Gamma - r_k
/// the minimized function is
///   g(X) = f(X) + rho * sum_i s * log(1 + exp(h_i / s))
/// where s is the smoothing parameter. Positions are t = (A_B/2) tanh(o) and
/// u = (A_I/2) tanh(p).
///
/// Complex gradients are returned in the real-metric convention: for a real
/// function F of complex Z the gradient is 2 dF/dZ*, so that
/// dF = Re Tr(grad^H dZ). Rates use log2, hence every rate gradient carries
/// a 1/ln 2 factor.

#include "maris/channel.hpp"
#include "maris/manifold.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace maris {

/// Ordering of the constraint vector: BS pairs, then IRS pairs, then users.
struct ConstraintSet {
  int K = 0;
  std::vector<std::pair<int, int>> bs_pairs;
  std::vector<std::pair<int, int>> irs_pairs;
  double d_min = 0.0;
  double unit = 1.0;  // length that distance constraints are measured in

  std::size_t distance_count() const { return bs_pairs.size() + irs_pairs.size(); }
  std::size_t size() const { return distance_count() + static_cast<std::size_t>(K); }
  std::size_t rate_offset() const { return distance_count(); }
};

inline ConstraintSet make_constraint_set(int M, int N, int K, double wavelength) {
  ConstraintSet cs;
  cs.K = K;
  cs.d_min = wavelength / 2.0;
  cs.unit = wavelength;
  for (int m = 0; m < M; ++m) {
    for (int m2 = m + 1; m2 < M; ++m2) cs.bs_pairs.emplace_back(m, m2);
  }
  for (int n = 0; n < N; ++n) {
    for (int n2 = n + 1; n2 < N; ++n2) cs.irs_pairs.emplace_back(n, n2);
  }
  return cs;
}

inline ConstraintSet make_constraint_set(const Scenario& sc) {
  return make_constraint_set(sc.M, sc.N, sc.K, sc.wavelength());
}

struct PenaltyState {
  double rho = 10.0;
  double smoothing = 1.0;
  double eps = 1e-3;
};

/// (A/2) tanh(v), entrywise.
inline RVector position_projection(const RVector& v, double A) {
  return (A / 2.0) * v.array().tanh().matrix();
}

/// Derivative of position_projection, entrywise.
inline RVector position_projection_jacobian(const RVector& v, double A) {
  return ((A / 2.0) * (1.0 - v.array().tanh().square())).matrix();
}

/// s * log(1 + e^{h/s}) without overflow for large h/s.
inline double smoothed_penalty(double h, double s) {
  const double z = h / s;
  if (z > 0.0) return h + s * std::log1p(std::exp(-z));
  return s * std::log1p(std::exp(z));
}

/// Logistic weights e^{h/s} / (1 + e^{h/s}).
inline RVector lse_weights(const RVector& h, double s) {
  RVector w(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double z = h[i] / s;
    if (z >= 0.0) {
      w[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      w[i] = e / (1.0 + e);
    }
  }
  return w;
}

/// Channels, rates and constraint values at one point.
struct Evaluation {
  RVector t;
  RVector u;
  Channels ch;
  RateReport rates;
  RVector h;

  double max_violation() const { return h.size() > 0 ? h.maxCoeff() : -INFINITY; }
};

inline RVector distance_constraint_values(const RVector& t, const RVector& u,
                                          const ConstraintSet& cs) {
  RVector h(static_cast<Eigen::Index>(cs.distance_count()));
  Eigen::Index i = 0;
  for (const auto& [m, m2] : cs.bs_pairs) h[i++] = (cs.d_min - std::abs(t[m] - t[m2])) / cs.unit;
  for (const auto& [n, n2] : cs.irs_pairs) {
    h[i++] = (cs.d_min - (irs_element(u, n) - irs_element(u, n2)).norm()) / cs.unit;
  }
  return h;
}

inline Evaluation evaluate(const OptimizationPoint& x, const Scenario& sc, const ConstraintSet& cs) {
  Evaluation ev;
  ev.t = position_projection(x.o, sc.region_bs());
  ev.u = position_projection(x.p, sc.region_irs());
  ev.ch = evaluate_channels(ev.t, ev.u, x.phi, sc.fri);
  ev.rates = rate_and_sum(ev.ch.H, x.W, sc.noise);
  ev.h.resize(static_cast<Eigen::Index>(cs.size()));
  ev.h.head(static_cast<Eigen::Index>(cs.distance_count())) =
      distance_constraint_values(ev.t, ev.u, cs);
  for (int k = 0; k < cs.K; ++k) {
    ev.h[static_cast<Eigen::Index>(cs.rate_offset()) + k] =
        sc.min_rate - ev.rates.rate[static_cast<std::size_t>(k)];
  }
  return ev;
}

inline RVector constraint_values(const OptimizationPoint& x, const Scenario& sc,
                                 const ConstraintSet& cs) {
  return evaluate(x, sc, cs).h;
}

inline double penalty_term(const RVector& h, const PenaltyState& pen) {
  if (pen.rho == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) acc += smoothed_penalty(h[i], pen.smoothing);
  return pen.rho * acc;
}

inline double smoothed_objective(const Evaluation& ev, const PenaltyState& pen) {
  return -ev.rates.sum + penalty_term(ev.h, pen);
}

inline double smoothed_objective(const OptimizationPoint& x, const Scenario& sc,
                                 const PenaltyState& pen, const ConstraintSet& cs) {
  if (!(pen.smoothing > 0.0)) throw InvalidInput("smoothed_objective: smoothing must be positive");
  return smoothed_objective(evaluate(x, sc, cs), pen);
}

namespace detail {

/// Quantities shared by every rate-gradient formula for user k.
///   a_j  = h_k^H w_j
///   c_k  = 1 / D,  c_j = -|a_k|^2 / D^2  (j != k)
///   kappa = 2 / (ln 2 (1 + gamma_k))
/// so that d r_k = kappa * sum_j c_j Re(conj(a_j) d a_j).
struct RateChain {
  CVector a;
  RVector c;
  double kappa = 0.0;
};

inline RateChain rate_chain(const CMatrix& H, const CMatrix& W, int k, double noise) {
  RateChain rc;
  const CVector h = H.col(k);
  rc.a = W.adjoint() * h;
  rc.a = rc.a.conjugate().eval();  // a_j = h^H w_j
  double interference = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    if (j != k) interference += std::norm(rc.a[j]);
  }
  const double D = interference + noise;
  const double signal = std::norm(rc.a[k]);
  const double gamma = signal / D;
  rc.c = RVector::Constant(W.cols(), -signal / (D * D));
  rc.c[k] = 1.0 / D;
  rc.kappa = 2.0 / (std::numbers::ln2 * (1.0 + gamma));
  return rc;
}

/// z = sum_j c_j conj(a_j) w_j
inline CVector rate_chain_z(const RateChain& rc, const CMatrix& W) {
  return W * (rc.c.cast<cd>().array() * rc.a.conjugate().array()).matrix();
}

}  // namespace detail

/// Gradient of r_k with respect to W (M x K).
inline CMatrix grad_rate_W(const CMatrix& H, const CMatrix& W, int k, double noise) {
  const auto rc = detail::rate_chain(H, W, k, noise);
  CMatrix g(W.rows(), W.cols());
  const CVector h = H.col(k);
  for (Eigen::Index j = 0; j < W.cols(); ++j) g.col(j) = (rc.kappa * rc.c[j] * rc.a[j]) * h;
  return g;
}

/// Gradient of r_k with respect to phi (length N).
inline CVector grad_rate_phi(const CMatrix& H, const CMatrix& W, const CMatrix& G,
                             const CVector& f_k, int k, double noise) {
  const auto rc = detail::rate_chain(H, W, k, noise);
  const CVector z = detail::rate_chain_z(rc, W);
  return rc.kappa * f_k.conjugate().cwiseProduct(G * z);
}

/// Derivatives of G and f with respect to the physical positions.
///   dG_dt:  column m is dG[:, m] / dt_m
///   dG_du[d]: row n is dG[n, :] / du_{n,d}
///   df_du[k][d]: entry n is df_k[n] / du_{n,d}
struct ChannelDerivatives {
  CMatrix dG_dt;
  CMatrix dG_du[2];
  std::vector<std::array<CVector, 2>> df_du;
};

inline ChannelDerivatives channel_derivatives(const RVector& t, const RVector& u,
                                              const FieldResponseInfo& fri) {
  const Eigen::Index M = t.size();
  const Eigen::Index N = u.size() / 2;
  const double k = fri.wavenumber();
  const RVector rho_t = fri.bs_direction();
  const RMatrix rho_r = fri.irs_direction();
  const cd jk(0.0, k);

  CMatrix Gt(fri.L, M);
  for (Eigen::Index m = 0; m < M; ++m) Gt.col(m) = bs_frv(t[m], fri);
  CMatrix A(N, fri.L);  // A[n, l] = exp(-j k rho_r,l^T u_n)
  for (Eigen::Index n = 0; n < N; ++n) {
    A.row(n) = irs_arrival_frv(irs_element(u, n), fri).conjugate().transpose();
  }

  ChannelDerivatives dv;
  const CVector w_t = fri.gain_bs_irs.cwiseProduct((jk * rho_t.cast<cd>()).eval());
  dv.dG_dt = A * w_t.asDiagonal() * Gt;
  for (int d = 0; d < 2; ++d) {
    const CVector w_u = fri.gain_bs_irs.cwiseProduct((-jk * rho_r.col(d).cast<cd>()).eval());
    dv.dG_du[d] = A * w_u.asDiagonal() * Gt;
  }
  const CMatrix Ac = A.conjugate();
  dv.df_du.resize(static_cast<std::size_t>(fri.users()));
  for (int user = 0; user < fri.users(); ++user) {
    const CVector& sigma = fri.gain_irs_ue[static_cast<std::size_t>(user)];
    for (int d = 0; d < 2; ++d) {
      dv.df_du[static_cast<std::size_t>(user)][static_cast<std::size_t>(d)] =
          Ac * sigma.cwiseProduct((jk * rho_r.col(d).cast<cd>()).eval());
    }
  }
  return dv;
}

/// Gradient of r_k with respect to the physical positions t (M) and u (2N).
struct PositionGradient {
  RVector t;
  RVector u;
};

inline PositionGradient grad_rate_positions(const Channels& ch, const ChannelDerivatives& dv,
                                            const CVector& phi, const CMatrix& W, int k,
                                            double noise) {
  const auto rc = detail::rate_chain(ch.H, W, k, noise);
  const CVector z = detail::rate_chain_z(rc, W);
  const CVector& f = ch.f[static_cast<std::size_t>(k)];
  const CVector v = phi.cwiseProduct(f);
  const Eigen::Index N = phi.size();

  PositionGradient pg;
  // dr/dt_m = kappa Re(z_m (dG_dt^T conj(v))_m)
  const CVector vt = dv.dG_dt.transpose() * v.conjugate();
  pg.t = rc.kappa * z.cwiseProduct(vt).real();

  const CVector Gz = ch.G * z;
  pg.u.resize(2 * N);
  for (int d = 0; d < 2; ++d) {
    const CVector Guz = dv.dG_du[d] * z;
    const CVector& df = dv.df_du[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)];
    for (Eigen::Index n = 0; n < N; ++n) {
      const cd term = std::conj(phi[n] * df[n]) * Gz[n] + std::conj(v[n]) * Guz[n];
      pg.u[2 * n + d] = rc.kappa * term.real();
    }
  }
  return pg;
}

inline PositionGradient grad_rate_positions(const OptimizationPoint& x, const Scenario& sc, int k) {
  if (k < 0 || k >= sc.K) throw InvalidInput("grad_rate_positions: user index out of range");
  const RVector t = position_projection(x.o, sc.region_bs());
  const RVector u = position_projection(x.p, sc.region_irs());
  const Channels ch = evaluate_channels(t, u, x.phi, sc.fri);
  return grad_rate_positions(ch, channel_derivatives(t, u, sc.fri), x.phi, x.W, k, sc.noise);
}

/// Gradient with respect to the pre-images o and p.
struct PreimageGradient {
  RVector o;
  RVector p;
};

namespace detail {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Adds weight * d h_i / d(t, u) for every distance constraint i into (gt, gu).
inline void accumulate_distance_gradients(const RVector& t, const RVector& u,
                                          const ConstraintSet& cs, const RVector& weights,
                                          RVector& gt, RVector& gu) {
  Eigen::Index i = 0;
  for (const auto& [m, m2] : cs.bs_pairs) {
    const double w = weights[i++] / cs.unit;
    if (w == 0.0) continue;
    const double s = sign(t[m] - t[m2]);
    gt[m] -= w * s;
    gt[m2] += w * s;
  }
  for (const auto& [n, n2] : cs.irs_pairs) {
    const double w = weights[i++] / cs.unit;
    if (w == 0.0) continue;
    const Eigen::Vector2d diff = irs_element(u, n) - irs_element(u, n2);
    const double len = diff.norm();
    if (len == 0.0) continue;  // zero subgradient at coincidence
    const Eigen::Vector2d unit = diff / len;
    gu.segment<2>(2 * n) -= w * unit;
    gu.segment<2>(2 * n2) += w * unit;
  }
}

}  // namespace detail

/// d h_i / d(o, p) for a single distance constraint (index into the BS/IRS pair block).
inline PreimageGradient constraint_position_gradient(const OptimizationPoint& x,
                                                     const Scenario& sc, const ConstraintSet& cs,
                                                     std::size_t i) {
  if (i >= cs.distance_count()) {
    throw InvalidInput("constraint_position_gradient: not a distance constraint");
  }
  const RVector t = position_projection(x.o, sc.region_bs());
  const RVector u = position_projection(x.p, sc.region_irs());
  RVector weights = RVector::Zero(static_cast<Eigen::Index>(cs.distance_count()));
  weights[static_cast<Eigen::Index>(i)] = 1.0;
  RVector gt = RVector::Zero(t.size());
  RVector gu = RVector::Zero(u.size());
  detail::accumulate_distance_gradients(t, u, cs, weights, gt, gu);
  return {gt.cwiseProduct(position_projection_jacobian(x.o, sc.region_bs())),
          gu.cwiseProduct(position_projection_jacobian(x.p, sc.region_irs()))};
}

/// Euclidean (ambient) gradient of g. Frozen factors are skipped and left zero.
inline TangentDirection euclidean_gradient(const OptimizationPoint& x, const Scenario& sc,
                                           const PenaltyState& pen, const ConstraintSet& cs,
                                           const Evaluation& ev, const FactorMask& mask = {}) {
  TangentDirection g = TangentDirection::zeros_like(x);
  const RVector lambda = lse_weights(ev.h, pen.smoothing);
  const auto rate_at = static_cast<Eigen::Index>(cs.rate_offset());

  // every r_k enters g with weight -(1 + rho * lambda_k)
  RVector user_weight(sc.K);
  for (int k = 0; k < sc.K; ++k) user_weight[k] = -(1.0 + pen.rho * lambda[rate_at + k]);

  const bool positions = mask.o || mask.p;
  ChannelDerivatives dv;
  if (positions) dv = channel_derivatives(ev.t, ev.u, sc.fri);
  RVector gt = RVector::Zero(ev.t.size());
  RVector gu = RVector::Zero(ev.u.size());

  for (int k = 0; k < sc.K; ++k) {
    const double w = user_weight[k];
    if (mask.W) g.W += w * grad_rate_W(ev.ch.H, x.W, k, sc.noise);
    if (mask.phi) {
      g.phi += w * grad_rate_phi(ev.ch.H, x.W, ev.ch.G, ev.ch.f[static_cast<std::size_t>(k)], k,
                                 sc.noise);
    }
    if (positions) {
      const PositionGradient pg = grad_rate_positions(ev.ch, dv, x.phi, x.W, k, sc.noise);
      gt += w * pg.t;
      gu += w * pg.u;
    }
  }
  if (positions && pen.rho != 0.0) {
    const RVector weights =
        pen.rho * lambda.head(static_cast<Eigen::Index>(cs.distance_count()));
    detail::accumulate_distance_gradients(ev.t, ev.u, cs, weights, gt, gu);
  }
  if (mask.o) g.o = gt.cwiseProduct(position_projection_jacobian(x.o, sc.region_bs()));
  if (mask.p) g.p = gu.cwiseProduct(position_projection_jacobian(x.p, sc.region_irs()));
  return g;
}

inline TangentDirection euclidean_gradient(const OptimizationPoint& x, const Scenario& sc,
                                           const PenaltyState& pen, const ConstraintSet& cs,
                                           const FactorMask& mask = {}) {
  return euclidean_gradient(x, sc, pen, cs, evaluate(x, sc, cs), mask);
}

inline TangentDirection riemannian_gradient(const OptimizationPoint& x, const Scenario& sc,
                                            const PenaltyState& pen, const ConstraintSet& cs,
                                            const FactorMask& mask = {}) {
  return transport(x, euclidean_gradient(x, sc, pen, cs, mask));
}

/// Step length used by the stopping tests: W and phi as stored, antenna
/// positions t = p_B(o) and u = p_I(p) in wavelengths.
inline double solution_distance(const OptimizationPoint& a, const OptimizationPoint& b,
                                const Scenario& sc) {
  const double lambda = sc.wavelength();
  const double dt =
      (position_projection(a.o, sc.region_bs()) - position_projection(b.o, sc.region_bs())).squaredNorm();
  const double du =
      (position_projection(a.p, sc.region_irs()) - position_projection(b.p, sc.region_irs())).squaredNorm();
  return std::sqrt((a.W - b.W).squaredNorm() + (a.phi - b.phi).squaredNorm() +
                   (dt + du) / (lambda * lambda));
}

/// g with fixed (rho, s) packaged for the quasi-Newton solver.
class PenalizedObjective {
 public:
  using Point = OptimizationPoint;
  using Tangent = TangentDirection;

  PenalizedObjective(const Scenario& sc, const ConstraintSet& cs, PenaltyState pen,
                     FactorMask mask = {})
      : sc_(&sc), cs_(&cs), pen_(pen), mask_(mask) {
    if (!(pen_.smoothing > 0.0)) throw InvalidInput("PenalizedObjective: smoothing must be positive");
    if (!(pen_.rho >= 0.0)) throw InvalidInput("PenalizedObjective: penalty weight must be >= 0");
  }

  double value(const Point& x) const { return smoothed_objective(evaluate(x, *sc_, *cs_), pen_); }

  Tangent gradient(const Point& x) const {
    return transport(x, euclidean_gradient(x, *sc_, pen_, *cs_, mask_));
  }

  Point retract(const Point& x, const Tangent& d, double alpha) const {
    return maris::retract(x, d, alpha, sc_->power, mask_);
  }
  Tangent transport(const Point& x, const Tangent& d) const { return maris::transport(x, d); }
  double inner(const Tangent& a, const Tangent& b) const { return inner_product(a, b); }
  double distance(const Point& a, const Point& b) const { return solution_distance(a, b, *sc_); }

  const PenaltyState& penalty() const { return pen_; }
  const FactorMask& mask() const { return mask_; }

 private:
  const Scenario* sc_;
  const ConstraintSet* cs_;
  PenaltyState pen_;
  FactorMask mask_;
};

}  // namespace maris
