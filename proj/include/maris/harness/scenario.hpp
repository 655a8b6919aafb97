#pragma once

// Seeded scenario generation and imperfect-FRI perturbation.

#include "maris/channel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace maris {

struct ScenarioParams {
  int M = 4;
  int N = 8;
  int K = 3;
  int L = 6;
  double power_dbm = 30.0;
  double noise_dbm = -120.0;
  double region_bs_wl = 4.0;
  double region_irs_wl = 6.0;
  double min_rate = 1.0;
  double carrier_hz = 5e9;
  Eigen::Vector3d bs{0.0, 0.0, 0.0};
  Eigen::Vector3d irs{10.0, 0.0, 30.0};
  Eigen::Vector3d ue_center{0.0, -10.0, 30.0};
  double ue_square = 20.0;  // edge length of the UE square in the x-z plane

  void validate() const {
    if (M < 1 || N < 1 || K < 1 || L < 1) throw InvalidInput("ScenarioParams: counts must be positive");
    if (!(carrier_hz > 0.0)) throw InvalidInput("ScenarioParams: carrier must be positive");
    if (!(region_bs_wl > 0.0) || !(region_irs_wl > 0.0)) {
      throw InvalidInput("ScenarioParams: region sizes must be positive");
    }
    if (!(min_rate >= 0.0)) throw InvalidInput("ScenarioParams: rate threshold must be >= 0");
    if (!(ue_square >= 0.0)) throw InvalidInput("ScenarioParams: UE square must be >= 0");
  }
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Free-space path loss in dB at 5 GHz, L(d) = -46 - 20 log10(d).
inline double path_loss_db(double d) { return -46.0 - 20.0 * std::log10(d); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// SplitMix64 finalizer, used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  auto step = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return step(step(step(a) ^ b) ^ c);
}

/// CN(0, variance) sample.
template <class Rng>
cd complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

inline Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& params) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scenario sc;
  sc.M = params.M;
  sc.N = params.N;
  sc.K = params.K;
  sc.power = dbm_to_watt(params.power_dbm);
  sc.noise = dbm_to_watt(params.noise_dbm);
  sc.region_bs_wl = params.region_bs_wl;
  sc.region_irs_wl = params.region_irs_wl;
  sc.min_rate = params.min_rate;
  sc.geometry.bs = params.bs;
  sc.geometry.irs = params.irs;

  for (int k = 0; k < params.K; ++k) {
    Eigen::Vector3d ue = params.ue_center;
    ue.x() += (unit(rng) - 0.5) * params.ue_square;
    ue.z() += (unit(rng) - 0.5) * params.ue_square;
    sc.geometry.ues.push_back(ue);
  }

  sc.pathloss_bs_irs = db_to_linear(path_loss_db((params.irs - params.bs).norm()));
  for (const auto& ue : sc.geometry.ues) {
    sc.pathloss_irs_ue.push_back(db_to_linear(path_loss_db((ue - params.irs).norm())));
  }

  FieldResponseInfo& fri = sc.fri;
  fri.L = params.L;
  fri.wavelength = kSpeedOfLight / params.carrier_hz;
  const int L = params.L;
  fri.aod_bs.resize(L);
  fri.elev_irs.resize(L);
  fri.azim_irs.resize(L);
  for (int l = 0; l < L; ++l) fri.aod_bs[l] = std::numbers::pi * unit(rng);
  for (int l = 0; l < L; ++l) fri.elev_irs[l] = std::numbers::pi * unit(rng);
  for (int l = 0; l < L; ++l) fri.azim_irs[l] = std::numbers::pi * unit(rng);
  fri.gain_bs_irs.resize(L);
  for (int l = 0; l < L; ++l) fri.gain_bs_irs[l] = complex_normal(rng, sc.pathloss_bs_irs / L);
  for (int k = 0; k < params.K; ++k) {
    CVector g(L);
    for (int l = 0; l < L; ++l) {
      g[l] = complex_normal(rng, sc.pathloss_irs_ue[static_cast<std::size_t>(k)] / L);
    }
    fri.gain_irs_ue.push_back(g);
  }
  sc.validate();
  return sc;
}

/// Estimated FRI: angles off by U[-mu/2, mu/2] (clamped to [0, pi]) and path
/// responses with normalized error e ~ CN(0, nu), sigma_hat = sigma / (1 - e),
/// so that (sigma_hat - sigma) / sigma_hat = e.
inline FieldResponseInfo perturb_fri(const FieldResponseInfo& fri, double mu, double nu,
                                     std::uint64_t seed) {
  if (!(mu >= 0.0) || !(nu >= 0.0)) throw InvalidInput("perturb_fri: mu and nu must be >= 0");
  FieldResponseInfo est = fri;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  const auto jitter = [&](RVector& angles) {
    for (Eigen::Index l = 0; l < angles.size(); ++l) {
      const double draw = unit(rng);
      if (mu > 0.0) angles[l] = std::clamp(angles[l] + mu * draw, 0.0, std::numbers::pi);
    }
  };
  jitter(est.aod_bs);
  jitter(est.elev_irs);
  jitter(est.azim_irs);

  const auto distort = [&](CVector& gains) {
    for (Eigen::Index l = 0; l < gains.size(); ++l) {
      const cd e = complex_normal(rng, 1.0);
      if (nu > 0.0) gains[l] = gains[l] / (1.0 - std::sqrt(nu) * e);
    }
  };
  distort(est.gain_bs_irs);
  for (auto& g : est.gain_irs_ue) distort(g);
  return est;
}

}  // namespace maris
