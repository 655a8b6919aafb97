#pragma once

// Initial antenna layouts, the zero-forcing precoder, and pre-image mapping.

#include "maris/channel.hpp"
#include "maris/manifold.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <vector>

namespace maris {

/// atanh(2x/A) with |2x/A| clipped to 1 - 1e-9.
inline RVector inverse_position_projection(const RVector& x, double A) {
  constexpr double kClip = 1.0 - 1e-9;
  RVector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = std::atanh(std::clamp(2.0 * x[i] / A, -kClip, kClip));
  }
  return out;
}

/// Uniform linear layout with the given spacing, centered on the origin.
inline RVector centered_line(int M, double spacing) {
  RVector t(M);
  for (int m = 0; m < M; ++m) t[m] = (m - (M - 1) / 2.0) * spacing;
  return t;
}

namespace detail {

inline double min_pair_distance(const std::vector<Eigen::Vector2d>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, (pts[i] - pts[j]).norm());
  }
  return best;
}

/// Point spreading in the unit square: repeatedly push apart every pair closer
/// than a slowly growing target radius, clamping to the square.
inline std::vector<Eigen::Vector2d> spread_once(int N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector2d> pts(static_cast<std::size_t>(N));
  for (auto& q : pts) q = {unit(rng), unit(rng)};
  std::vector<Eigen::Vector2d> best = pts;
  double best_d = min_pair_distance(pts);
  const double start = 1.0 / std::sqrt(static_cast<double>(N));
  constexpr int kRounds = 3000;
  for (int round = 0; round < kRounds; ++round) {
    const double target = std::max(best_d, 0.5 * start) * (1.0 + 0.05 * (1.0 - double(round) / kRounds));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        Eigen::Vector2d diff = pts[i] - pts[j];
        double len = diff.norm();
        if (len >= target) continue;
        if (len < 1e-12) {
          diff = {unit(rng) - 0.5, unit(rng) - 0.5};
          len = diff.norm();
        }
        const Eigen::Vector2d push = 0.5 * (target - len) * diff / len;
        pts[i] += push;
        pts[j] -= push;
      }
    }
    for (auto& q : pts) q = q.cwiseMax(0.0).cwiseMin(1.0);
    const double d = min_pair_distance(pts);
    if (d > best_d) {
      best_d = d;
      best = pts;
    }
  }
  return best;
}

}  // namespace detail

/// Centers of N equal circles packed in the unit square, i.e. N points in
/// [0,1]^2 with (approximately) maximal minimum pairwise distance. Computed
/// deterministically and cached per N.
inline std::vector<Eigen::Vector2d> unit_square_packing(int N) {
  if (N < 1) throw InvalidInput("unit_square_packing: N must be positive");
  static std::mutex mtx;
  static std::map<int, std::vector<Eigen::Vector2d>> cache;
  {
    std::lock_guard lock(mtx);
    if (auto it = cache.find(N); it != cache.end()) return it->second;
  }
  std::vector<Eigen::Vector2d> best;
  if (N == 1) {
    best = {{0.5, 0.5}};
  } else {
    std::mt19937_64 rng(0x5eed0000ULL + static_cast<std::uint64_t>(N));
    double best_d = -1.0;
    for (int start = 0; start < 6; ++start) {
      auto pts = detail::spread_once(N, rng);
      const double d = detail::min_pair_distance(pts);
      if (d > best_d) {
        best_d = d;
        best = std::move(pts);
      }
    }
  }
  std::lock_guard lock(mtx);
  cache.emplace(N, best);
  return best;
}

/// Initial IRS element positions (interleaved x, y) inside an A x A square
/// centered on the origin with at least `clearance` between elements. The
/// packing is scaled to a square inset by clearance/2 from the region edge;
/// if that cannot honor the clearance, a jittered grid is used.
inline RVector irs_initial_positions(int N, double A, double clearance, std::uint64_t seed = 7) {
  const double side = A - clearance;
  RVector u(2 * N);
  if (side > 0.0) {
    const auto pts = unit_square_packing(N);
    if (N == 1 || detail::min_pair_distance(pts) * side >= clearance * (1.0 + 1e-9)) {
      for (int n = 0; n < N; ++n) {
        u[2 * n] = (pts[static_cast<std::size_t>(n)].x() - 0.5) * side;
        u[2 * n + 1] = (pts[static_cast<std::size_t>(n)].y() - 0.5) * side;
      }
      return u;
    }
  }
  // jittered grid fallback
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(N))));
  const int rows = (N + cols - 1) / cols;
  const double pitch_x = A / cols;
  const double pitch_y = A / rows;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (int n = 0; n < N; ++n) {
    const int r = n / cols;
    const int c = n % cols;
    u[2 * n] = -A / 2 + (c + 0.5 + jitter(rng)) * pitch_x;
    u[2 * n + 1] = -A / 2 + (r + 0.5 + jitter(rng)) * pitch_y;
  }
  return u;
}

/// Dense half-wavelength grid covering the A x A region: (round(2A/lambda)+1)^2 elements.
inline RVector dense_grid_positions(double A, double wavelength) {
  const int side = static_cast<int>(std::lround(2.0 * A / wavelength)) + 1;
  const double pitch = wavelength / 2.0;
  const double offset = (side - 1) * pitch / 2.0;
  RVector u(2 * side * side);
  int n = 0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c, ++n) {
      u[2 * n] = c * pitch - offset;
      u[2 * n + 1] = r * pitch - offset;
    }
  }
  return u;
}

inline int dense_grid_size(double region_wl) {
  const int side = static_cast<int>(std::lround(2.0 * region_wl)) + 1;
  return side * side;
}

/// W = sqrt(P / Tr((H^H H)^{-1})) H (H^H H)^{-1}. A near-singular Gram matrix
/// gets a ridge of 1e-10 relative to its mean diagonal.
inline CMatrix zero_forcing_precoder(const CMatrix& H, double power) {
  const Eigen::Index K = H.cols();
  CMatrix gram = H.adjoint() * H;
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12)) {
    const double ridge = 1e-10 * gram.diagonal().real().sum() / static_cast<double>(K);
    gram += CMatrix::Identity(K, K) * cd(std::max(ridge, std::numeric_limits<double>::min()));
    ldlt.compute(gram);
  }
  const CMatrix inv = ldlt.solve(CMatrix::Identity(K, K));
  CMatrix W = H * inv;
  const double fro2 = W.squaredNorm();
  if (!(fro2 > 0.0) || !std::isfinite(fro2)) throw InvalidInput("zero_forcing_precoder: degenerate channel");
  return std::sqrt(power / fro2) * W;
}

}  // namespace maris
