#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "phaselim/channels.hpp"
#include "phaselim/common.hpp"
#include "phaselim/density.hpp"
#include "phaselim/probe.hpp"

// Classical Fisher information of concrete phase readouts, for comparison
// against the quantum bound: the canonical phase measurement (covariant POVM
// over phase kets sum_m e^{i m theta} |m>) and projective readout in the S^x
// eigenbasis.  When the state is block diagonal the block label is treated as
// an observed outcome, so classical informations add over blocks.

namespace phaselim {

namespace detail {

// Diagonal coherence sums c_d = sum_m rho_{m+d, m}; c_0 is the trace.
inline CVec coherence_profile(const CMat& rho) {
  const int n = static_cast<int>(rho.rows());
  CVec c = CVec::Zero(n);
  for (int d = 0; d < n; ++d)
    for (int i = d; i < n; ++i) c(d) += rho(i, i - d);
  return c;
}

// integral of (p')^2 / p over the circle for the phase density built from c.
// The grid is offset so exact zeros of p (double zeros, through which the
// integrand continues analytically) never land on a node.
inline double cfi_canonical_block(const CMat& rho, int grid) {
  const int n = static_cast<int>(rho.rows());
  if (n < 2) return 0.0;
  CVec c = detail::coherence_profile(rho);
  if (std::abs(c(0)) < 1e-300) return 0.0;
  if (grid <= 0) grid = std::max(2048, 64 * n);
  double F = 0.0;
  const double h = 2.0 * pi / grid;
  for (int k = 0; k < grid; ++k) {
    double theta = -pi + (k + 0.5) * h;
    double p = c(0).real();
    double dp = 0.0;
    for (int d = 1; d < n; ++d) {
      double cs = std::cos(d * theta), sn = std::sin(d * theta);
      p += 2.0 * (c(d).real() * cs + c(d).imag() * sn);
      dp += 2.0 * d * (-c(d).real() * sn + c(d).imag() * cs);
    }
    p /= 2.0 * pi;
    dp /= 2.0 * pi;
    if (p > 1e-300) F += dp * dp / p;
  }
  return F * h;
}

// An explicitly requested grid must still resolve the fastest fringe; the
// default (grid = 0) picks a safe size on its own.
inline void check_phase_grid(int grid, int n_qubits) {
  if (grid > 0)
    require(grid >= 8 * (n_qubits + 1), "cfi_canonical_phase: grid too coarse");
}

}  // namespace detail

inline double cfi_canonical_phase(const SymmetricDensityMatrix& rho, int grid = 0) {
  detail::check_phase_grid(grid, rho.n_qubits);
  return detail::cfi_canonical_block(rho.rho, grid);
}

inline double cfi_canonical_phase(const BlockedDensityMatrix& rho, int grid = 0) {
  detail::check_phase_grid(grid, rho.n_qubits);
  double F = 0.0;
  for (const auto& blk : rho.blocks)
    F += blk.weight * detail::cfi_canonical_block(blk.rho, grid);
  return F;
}

// ---------------------------------------------------------------------------
// S^x readout after encoding a phase theta.

namespace detail {

inline Mat sx_matrix(int dim) {
  Mat sx = Mat::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; ++i) {
    double v = 0.5 * std::sqrt(static_cast<double>(i + 1) * (dim - 1 - i));
    sx(i, i + 1) = v;
    sx(i + 1, i) = v;
  }
  return sx;
}

inline double cfi_sx_block(const CMat& rho0, double theta) {
  const int n = static_cast<int>(rho0.rows());
  if (n < 2) return 0.0;
  CMat rho = rho0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rho(i, j) *= std::polar(1.0, -theta * static_cast<double>(i - j));
  CMat K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K(i, j) = Complex(0.0, -1.0) * static_cast<double>(i - j) * rho(i, j);
  Eigen::SelfAdjointEigenSolver<Mat> es(sx_matrix(n));
  double F = 0.0;
  for (int a = 0; a < n; ++a) {
    CVec v = es.eigenvectors().col(a).cast<Complex>();
    double q = (v.adjoint() * rho * v)(0).real();
    double dq = (v.adjoint() * K * v)(0).real();
    if (q > 1e-300) F += dq * dq / q;
  }
  return F;
}

}  // namespace detail

inline double cfi_sx(const SymmetricDensityMatrix& rho, double theta) {
  return detail::cfi_sx_block(rho.rho, theta);
}

inline double cfi_sx(const BlockedDensityMatrix& rho, double theta) {
  double F = 0.0;
  for (const auto& blk : rho.blocks) F += blk.weight * detail::cfi_sx_block(blk.rho, theta);
  return F;
}

// ---------------------------------------------------------------------------
// Canonical phase density of the cosine probe, in closed form:
//
//   p(t) = A cos^2(t/2) [ cos((N+1) t / 2) / (cos t - cos t0) ]^2,
//   t0 = pi/(N+1),  A = 4 sin^2(pi/(2(N+1))) / ((N+1) pi).
//
// The apparent poles at t = +/- t0 cancel against zeros of the cosine factor;
// near them the ratio is evaluated from its factored form, which is finite.

inline double cosine_probe_phase_density(int n_qubits, double dtheta) {
  detail::require(n_qubits >= 1, "need at least one qubit");
  const double Np1 = n_qubits + 1;
  const double t = std::abs(dtheta);
  const double t0 = pi / Np1;
  const double A = 4.0 * std::pow(std::sin(pi / (2.0 * Np1)), 2) / (Np1 * pi);
  double q;
  if (std::abs(t - t0) > 1e-4) {
    q = std::cos(Np1 * t / 2.0) / (std::cos(t) - std::cos(t0));
  } else {
    // cos((N+1)t/2) = -sin((N+1)u/2) and cos t - cos t0 = -2 sin(u/2) sin(t0 + u/2)
    double u = t - t0;
    double ratio = (std::abs(u) < 1e-9)
                       ? Np1 * (1.0 - (Np1 * Np1 - 1.0) * u * u / 24.0)
                       : std::sin(Np1 * u / 2.0) / std::sin(u / 2.0);
    q = ratio / (2.0 * std::sin(t0 + 0.5 * u));
  }
  double c = std::cos(0.5 * t);
  return A * c * c * q * q;
}

// Sampled version on a symmetric midpoint grid over (-pi, pi).  Midpoint
// sums of smooth periodic functions converge spectrally, so the stored
// densities integrate to one at full double precision already for moderate
// grids.
struct PhaseDistribution {
  Vec delta_theta;
  Vec density;
  double spacing = 0.0;

  double integral() const { return spacing * density.sum(); }
  double variance() const {
    double v = 0.0;
    for (int i = 0; i < density.size(); ++i)
      v += delta_theta(i) * delta_theta(i) * density(i);
    return v * spacing;
  }
};

inline PhaseDistribution cosine_phase_distribution(int n_qubits, int grid = 0) {
  detail::require(n_qubits >= 2, "cosine_phase_distribution: need N >= 2");
  if (grid <= 0) grid = std::max(2048, 32 * (n_qubits + 1));
  PhaseDistribution out;
  out.spacing = 2.0 * pi / grid;
  out.delta_theta.resize(grid);
  out.density.resize(grid);
  for (int k = 0; k < grid; ++k) {
    double t = -pi + (k + 0.5) * out.spacing;
    out.delta_theta(k) = t;
    out.density(k) = cosine_probe_phase_density(n_qubits, t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytic error bounds for estimation under collective dephasing with the
// cosine probe, for nu >> 1 repetitions: bounds on nu * var(theta_est).
// The upper bound inflates the noiseless variance by the wrapped tail mass of
// the dephased phase distribution at the anti-fringe point theta = pi.

struct DephasingErrorBounds {
  double lower = 0.0;
  double upper = 0.0;
  double tail_density = 0.0;  // dephased phase density at theta = pi
};

inline DephasingErrorBounds dephasing_error_bounds(int n_qubits, double Gamma0) {
  detail::require(n_qubits >= 1, "need at least one qubit");
  detail::require_nonneg(Gamma0, "Gamma0");
  const int N = n_qubits;
  ProbeState probe = make_probe(ProbeFamily::cosine, N);
  Vec a = probe.amplitudes.real();

  DephasingErrorBounds out;
  out.lower = Gamma0 + 1.0 / (static_cast<double>(N) * N);

  // Fourier route: the dephased density at pi is sum over coherence orders of
  // (-1)^d c_d exp(-Gamma0 d^2 / 2) / (2 pi), with c_d from the probe overlap.
  double sum = 1.0;
  for (int d = 1; d <= N; ++d) {
    double cd = 0.0;
    for (int i = 0; i + d <= N; ++i) cd += a(i) * a(i + d);
    double sign = (d % 2 == 0) ? 1.0 : -1.0;
    sum += 2.0 * sign * cd * std::exp(-0.5 * Gamma0 * d * d);
  }
  out.tail_density = sum / (2.0 * pi);

  double denom = 1.0 - 2.0 * pi * out.tail_density;
  double top = Gamma0 + pi * pi / (static_cast<double>(N) * N);
  out.upper = denom > 0.0 ? top / (denom * denom)
                          : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace phaselim
