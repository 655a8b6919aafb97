#pragma once

/// Product manifold for joint precoder / phase / antenna-position optimization.
///
/// A point X = (W, phi, o, p) lives on
///   { W : Tr(W W^H) = P_t }  x  { phi : |phi_n| = 1 }  x  R^M  x  R^{2N},
/// i.e. a complex sphere of radius sqrt(P_t), a complex circle manifold and two
/// Euclidean factors holding unconstrained pre-images of the antenna positions.
/// The metric is the real part of the Euclidean inner product on every factor.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace maris {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when W + a*dW vanishes or some phi_n + a*dphi_n hits the origin.
/// The line search reacts by shrinking the step.
class DegenerateRetraction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizationPoint {
  CMatrix W;    // M x K precoder, sqrt(watt)
  CVector phi;  // N unit-modulus reflection coefficients
  RVector o;    // M pre-images of the BS antenna positions
  RVector p;    // 2N pre-images of the IRS element positions, (x, y) interleaved
};

/// Tangent (or ambient) direction with the same four factors as a point.
struct TangentDirection {
  CMatrix W;
  CVector phi;
  RVector o;
  RVector p;

  static TangentDirection zeros_like(const OptimizationPoint& x) {
    return {CMatrix::Zero(x.W.rows(), x.W.cols()), CVector::Zero(x.phi.size()),
            RVector::Zero(x.o.size()), RVector::Zero(x.p.size())};
  }

  TangentDirection& operator+=(const TangentDirection& b) {
    W += b.W;
    phi += b.phi;
    o += b.o;
    p += b.p;
    return *this;
  }
  TangentDirection& operator-=(const TangentDirection& b) {
    W -= b.W;
    phi -= b.phi;
    o -= b.o;
    p -= b.p;
    return *this;
  }
  TangentDirection& operator*=(double c) {
    W *= c;
    phi *= c;
    o *= c;
    p *= c;
    return *this;
  }
};

inline TangentDirection operator+(TangentDirection a, const TangentDirection& b) { return a += b; }
inline TangentDirection operator-(TangentDirection a, const TangentDirection& b) { return a -= b; }
inline TangentDirection operator*(double c, TangentDirection a) { return a *= c; }
inline TangentDirection operator*(TangentDirection a, double c) { return a *= c; }
inline TangentDirection operator-(TangentDirection a) { return a *= -1.0; }

/// Which factors take part in an optimization. Frozen factors keep their value
/// through retraction and carry zero gradient.
struct FactorMask {
  bool W = true;
  bool phi = true;
  bool o = true;
  bool p = true;

  friend bool operator==(const FactorMask&, const FactorMask&) = default;
};

namespace detail {

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.W.rows() != b.W.rows() || a.W.cols() != b.W.cols() || a.phi.size() != b.phi.size() ||
      a.o.size() != b.o.size() || a.p.size() != b.p.size()) {
    throw InvalidInput(std::string(what) + ": factor dimensions do not match");
  }
}

}  // namespace detail

/// Re(Tr(aW^H bW) + aphi^H bphi) + ao^T bo + ap^T bp
inline double inner_product(const TangentDirection& a, const TangentDirection& b) {
  detail::require_same_shape(a, b, "inner_product");
  double acc = 0.0;
  if (a.W.size() > 0) acc += (a.W.array().conjugate() * b.W.array()).real().sum();
  if (a.phi.size() > 0) acc += (a.phi.array().conjugate() * b.phi.array()).real().sum();
  acc += a.o.dot(b.o);
  acc += a.p.dot(b.p);
  return acc;
}

inline double norm(const TangentDirection& a) {
  return std::sqrt(std::max(0.0, inner_product(a, a)));
}

/// Orthogonal projection of an ambient direction onto the tangent space at x.
/// Used both as the Riemannian-gradient projection and as vector transport.
inline TangentDirection transport(const OptimizationPoint& x, const TangentDirection& d) {
  detail::require_same_shape(x, d, "transport");
  TangentDirection out = d;
  const double power = x.W.squaredNorm();
  if (power > 0.0) {
    const double radial = (x.W.array().conjugate() * d.W.array()).real().sum();
    out.W -= (radial / power) * x.W;
  }
  for (Eigen::Index n = 0; n < x.phi.size(); ++n) {
    const double radial = (std::conj(d.phi[n]) * x.phi[n]).real();
    out.phi[n] -= radial * x.phi[n];
  }
  return out;
}

/// Metric-projection retraction R_x(alpha d). Frozen factors are copied.
inline OptimizationPoint retract(const OptimizationPoint& x, const TangentDirection& d,
                                 double alpha, double power, const FactorMask& mask = {}) {
  detail::require_same_shape(x, d, "retract");
  if (!(alpha >= 0.0)) throw InvalidInput("retract: step must be non-negative");
  OptimizationPoint y = x;
  if (mask.W && x.W.size() > 0) {
    CMatrix moved = x.W + alpha * d.W;
    const double fro2 = moved.squaredNorm();
    if (!(fro2 > 0.0) || !std::isfinite(fro2)) {
      throw DegenerateRetraction("retract: precoder collapsed to zero");
    }
    y.W = std::sqrt(power / fro2) * moved;
  }
  if (mask.phi) {
    for (Eigen::Index n = 0; n < x.phi.size(); ++n) {
      const cd moved = x.phi[n] + alpha * d.phi[n];
      const double mag = std::abs(moved);
      if (!(mag > 0.0) || !std::isfinite(mag)) {
        throw DegenerateRetraction("retract: phase entry collapsed to zero");
      }
      y.phi[n] = moved / mag;
    }
  }
  if (mask.o) y.o = x.o + alpha * d.o;
  if (mask.p) y.p = x.p + alpha * d.p;
  return y;
}

/// Ambient Euclidean distance over all four factors.
inline double distance(const OptimizationPoint& a, const OptimizationPoint& b) {
  detail::require_same_shape(a, b, "distance");
  return std::sqrt((a.W - b.W).squaredNorm() + (a.phi - b.phi).squaredNorm() +
                   (a.o - b.o).squaredNorm() + (a.p - b.p).squaredNorm());
}

/// Zero the components of d that belong to frozen factors.
inline TangentDirection apply_mask(TangentDirection d, const FactorMask& mask) {
  if (!mask.W) d.W.setZero();
  if (!mask.phi) d.phi.setZero();
  if (!mask.o) d.o.setZero();
  if (!mask.p) d.p.setZero();
  return d;
}

struct Tolerances {
  double power_rel = 1e-9;
  double modulus = 1e-12;
  double tangency = 1e-10;
};

struct PointDiagnostics {
  double power_residual = 0.0;  // |Tr(WW^H) - P_t| / P_t
  RVector modulus_residuals;    // ||phi_n| - 1|
  double max_modulus_residual = 0.0;
  bool finite = true;

  bool ok(const Tolerances& tol = {}) const {
    return finite && power_residual <= tol.power_rel && max_modulus_residual <= tol.modulus;
  }
};

inline PointDiagnostics validate_point(const OptimizationPoint& x, double power) {
  PointDiagnostics diag;
  diag.power_residual = std::abs(x.W.squaredNorm() - power) / power;
  diag.modulus_residuals.resize(x.phi.size());
  for (Eigen::Index n = 0; n < x.phi.size(); ++n) {
    diag.modulus_residuals[n] = std::abs(std::abs(x.phi[n]) - 1.0);
  }
  diag.max_modulus_residual = x.phi.size() > 0 ? diag.modulus_residuals.maxCoeff() : 0.0;
  diag.finite = x.W.allFinite() && x.phi.allFinite() && x.o.allFinite() && x.p.allFinite();
  return diag;
}

struct TangencyResidual {
  double W = 0.0;    // |Re Tr(W^H dW)|
  double phi = 0.0;  // max_n |Re(conj(dphi_n) phi_n)|
};

inline TangencyResidual tangency_residual(const OptimizationPoint& x, const TangentDirection& d) {
  detail::require_same_shape(x, d, "tangency_residual");
  TangencyResidual r;
  r.W = std::abs((x.W.array().conjugate() * d.W.array()).real().sum());
  for (Eigen::Index n = 0; n < x.phi.size(); ++n) {
    r.phi = std::max(r.phi, std::abs((std::conj(d.phi[n]) * x.phi[n]).real()));
  }
  return r;
}

}  // namespace maris
