#pragma once

// Far-field field-response channel model for a BS with a linear movable array,
// a planar movable IRS, and K single-antenna users.

#include "maris/manifold.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace maris {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Angles and complex path responses shared by all channel evaluations.
/// The same L arrival angles at the IRS describe both the BS-IRS and the
/// (supplementary) IRS-UE paths.
struct FieldResponseInfo {
  int L = 0;
  RVector aod_bs;     // phi_t, departure angles at the BS, [0, pi]
  RVector elev_irs;   // theta_r, elevation of arrival at the IRS, [0, pi]
  RVector azim_irs;   // phi_r, azimuth of arrival at the IRS, [0, pi]
  CVector gain_bs_irs;               // sigma_G, length L
  std::vector<CVector> gain_irs_ue;  // sigma_k, K vectors of length L
  double wavelength = 0.0;           // meters

  int users() const { return static_cast<int>(gain_irs_ue.size()); }

  void validate() const {
    if (L < 1) throw InvalidInput("FieldResponseInfo: need at least one path");
    if (!(wavelength > 0.0)) throw InvalidInput("FieldResponseInfo: wavelength must be positive");
    const auto in_range = [](const RVector& a) {
      return (a.array() >= 0.0).all() && (a.array() <= std::numbers::pi).all();
    };
    if (aod_bs.size() != L || elev_irs.size() != L || azim_irs.size() != L ||
        gain_bs_irs.size() != L) {
      throw InvalidInput("FieldResponseInfo: per-path vectors must have length L");
    }
    for (const auto& g : gain_irs_ue) {
      if (g.size() != L) throw InvalidInput("FieldResponseInfo: user path gains must have length L");
    }
    if (!in_range(aod_bs) || !in_range(elev_irs) || !in_range(azim_irs)) {
      throw InvalidInput("FieldResponseInfo: angles must lie in [0, pi]");
    }
  }

  double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }

  /// rho_t,l = cos(phi_t,l)
  RVector bs_direction() const { return aod_bs.array().cos(); }

  /// rho_r,l = [sin(theta) cos(phi), cos(theta)], as an L x 2 matrix.
  RMatrix irs_direction() const {
    RMatrix rho(L, 2);
    rho.col(0) = elev_irs.array().sin() * azim_irs.array().cos();
    rho.col(1) = elev_irs.array().cos();
    return rho;
  }
};

struct Geometry {
  Eigen::Vector3d bs{0.0, 0.0, 0.0};
  Eigen::Vector3d irs{10.0, 0.0, 30.0};
  std::vector<Eigen::Vector3d> ues;
};

struct Scenario {
  FieldResponseInfo fri;
  int M = 0;
  int N = 0;
  int K = 0;
  double power = 1.0;        // P_t, watts
  double noise = 1e-15;      // sigma_n^2, watts
  double region_bs_wl = 4.0;   // A_B / lambda
  double region_irs_wl = 6.0;  // A_I / lambda
  double min_rate = 1.0;       // Gamma, bit/s/Hz
  Geometry geometry;
  double pathloss_bs_irs = 1.0;
  std::vector<double> pathloss_irs_ue;

  double wavelength() const { return fri.wavelength; }
  double region_bs() const { return region_bs_wl * fri.wavelength; }
  double region_irs() const { return region_irs_wl * fri.wavelength; }

  void validate() const {
    fri.validate();
    if (M < 1 || N < 1 || K < 1) throw InvalidInput("Scenario: M, N, K must be positive");
    if (fri.users() != K) throw InvalidInput("Scenario: path gains must be given for every user");
    if (!(power > 0.0)) throw InvalidInput("Scenario: transmit power must be positive");
    if (!(noise > 0.0)) throw InvalidInput("Scenario: noise power must be positive");
    if (!(min_rate >= 0.0)) throw InvalidInput("Scenario: rate threshold must be non-negative");
    if (!(region_bs_wl > 0.0) || !(region_irs_wl > 0.0)) {
      throw InvalidInput("Scenario: region sizes must be positive");
    }
  }
};

/// g(t_i): per-path phase signature of a BS antenna at coordinate t_i.
inline CVector bs_frv(double t, const FieldResponseInfo& fri) {
  const double k = fri.wavenumber();
  const RVector rho = fri.bs_direction();
  CVector out(fri.L);
  for (int l = 0; l < fri.L; ++l) out[l] = std::polar(1.0, k * rho[l] * t);
  return out;
}

inline CVector irs_arrival_frv(const Eigen::Vector2d& u, const FieldResponseInfo& fri) {
  const double k = fri.wavenumber();
  const RMatrix rho = fri.irs_direction();
  CVector out(fri.L);
  for (int l = 0; l < fri.L; ++l) out[l] = std::polar(1.0, k * rho.row(l).dot(u));
  return out;
}

inline CVector irs_departure_frv(const Eigen::Vector2d& u, const FieldResponseInfo& fri) {
  return irs_arrival_frv(u, fri).conjugate();
}

inline Eigen::Vector2d irs_element(const RVector& u, Eigen::Index n) {
  return {u[2 * n], u[2 * n + 1]};
}

/// G = F_a(u)^H Sigma_G G_t(t), N x M.
inline CMatrix assemble_G(const RVector& t, const RVector& u, const FieldResponseInfo& fri) {
  const Eigen::Index M = t.size();
  const Eigen::Index N = u.size() / 2;
  CMatrix Gt(fri.L, M);
  for (Eigen::Index m = 0; m < M; ++m) Gt.col(m) = bs_frv(t[m], fri);
  CMatrix Fa(fri.L, N);
  for (Eigen::Index n = 0; n < N; ++n) Fa.col(n) = irs_arrival_frv(irs_element(u, n), fri);
  return Fa.adjoint() * fri.gain_bs_irs.asDiagonal() * Gt;
}

/// f_k = F_d(u)^H Sigma_{f,k} 1, length N.
inline CVector assemble_f(const RVector& u, const FieldResponseInfo& fri, int k) {
  if (k < 0 || k >= fri.users()) throw InvalidInput("assemble_f: user index out of range");
  const Eigen::Index N = u.size() / 2;
  CMatrix Fd(fri.L, N);
  for (Eigen::Index n = 0; n < N; ++n) Fd.col(n) = irs_departure_frv(irs_element(u, n), fri);
  return Fd.adjoint() * fri.gain_irs_ue[static_cast<std::size_t>(k)];
}

/// h_k with h_k^H = phi^H diag(f_k^H) G, i.e. h_k = G^H (phi .* f_k).
inline CVector effective_channel(const CVector& phi, const CVector& f_k, const CMatrix& G) {
  return G.adjoint() * phi.cwiseProduct(f_k);
}

/// Channels at a given set of positions and phases.
struct Channels {
  CMatrix G;               // N x M
  std::vector<CVector> f;  // K vectors of length N
  CMatrix H;               // M x K, column k is h_k
};

inline Channels evaluate_channels(const RVector& t, const RVector& u, const CVector& phi,
                                  const FieldResponseInfo& fri) {
  Channels ch;
  ch.G = assemble_G(t, u, fri);
  const int K = fri.users();
  ch.f.reserve(static_cast<std::size_t>(K));
  ch.H.resize(t.size(), K);
  for (int k = 0; k < K; ++k) {
    ch.f.push_back(assemble_f(u, fri, k));
    ch.H.col(k) = effective_channel(phi, ch.f.back(), ch.G);
  }
  return ch;
}

inline double sinr(const CMatrix& H, const CMatrix& W, int k, double noise) {
  const CVector h = H.col(k);
  double interference = 0.0;
  double signal = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    const double g = std::norm(h.dot(W.col(j)));  // |h^H w_j|^2
    if (j == k) {
      signal = g;
    } else {
      interference += g;
    }
  }
  return signal / (interference + noise);
}

struct RateReport {
  std::vector<double> sinr;
  std::vector<double> rate;  // bit/s/Hz
  double sum = 0.0;

  double min() const {
    double m = rate.empty() ? 0.0 : rate.front();
    for (double r : rate) m = std::min(m, r);
    return m;
  }
};

inline RateReport rate_and_sum(const CMatrix& H, const CMatrix& W, double noise) {
  RateReport rep;
  for (Eigen::Index k = 0; k < H.cols(); ++k) {
    const double g = sinr(H, W, static_cast<int>(k), noise);
    rep.sinr.push_back(g);
    rep.rate.push_back(std::log2(1.0 + g));
    rep.sum += rep.rate.back();
  }
  return rep;
}

/// ||h_k||^2 = phi^H diag(f_k^H) G G^H diag(f_k) phi
inline double channel_power_gain(const CVector& phi, const CVector& f_k, const CMatrix& G) {
  return effective_channel(phi, f_k, G).squaredNorm();
}

}  // namespace maris
