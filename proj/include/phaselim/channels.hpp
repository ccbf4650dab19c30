#pragma once

// Collective decoherence channels acting on the maximal-spin multiplet, plus
// loss-rate bookkeeping and the continuum drift/diffusion diagnostics.
//
// Conventions: the phase generator is S^z, so a phase shift theta multiplies
// rho_{mm'} by exp(-i theta (m-m')).  Decoherence strengths are integrated
// exponents (dimensionless), not rates: collective dephasing with exponent
// Gamma0 multiplies rho_{mm'} by exp(-Gamma0 (m-m')^2 / 2).

#include <cmath>

#include "phaselim/common.hpp"
#include "phaselim/density.hpp"

namespace phaselim {

// Integrated decoherence exponents.  Capitalized members are collective,
// lower-case are per-particle (individual), gamma1/gamma2 are the two-mode
// loss exponents (transmission exp(-gamma_k) in arm k).
struct NoiseParams {
  double Gamma0 = 0.0;       // collective dephasing
  double GammaMinus = 0.0;   // collective relaxation
  double GammaPlus = 0.0;    // collective excitation
  double gamma0 = 0.0;       // individual dephasing
  double gammaMinus = 0.0;   // individual relaxation
  double gammaPlus = 0.0;    // individual excitation
  double gamma1 = 0.0;       // photon loss, arm 1
  double gamma2 = 0.0;       // photon loss, arm 2

  void validate() const {
    detail::require_nonneg(Gamma0, "Gamma0");
    detail::require_nonneg(GammaMinus, "GammaMinus");
    detail::require_nonneg(GammaPlus, "GammaPlus");
    detail::require_nonneg(gamma0, "gamma0");
    detail::require_nonneg(gammaMinus, "gammaMinus");
    detail::require_nonneg(gammaPlus, "gammaPlus");
    detail::require_nonneg(gamma1, "gamma1");
    detail::require_nonneg(gamma2, "gamma2");
  }
};

// Largest integrated exponent a single RK4 step may cover.  Exceeding it is
// a validation error so golden outputs cannot silently lose accuracy.
inline constexpr double max_step_exponent = 1e-3;

inline int default_steps(double largest_exponent) {
  int steps = static_cast<int>(std::ceil(largest_exponent / max_step_exponent));
  return steps < 1 ? 1 : steps;
}

// ---------------------------------------------------------------------------
// Exact entrywise maps.

inline SymmetricDensityMatrix phase_rotate(const SymmetricDensityMatrix& in, double theta) {
  SymmetricDensityMatrix out = in;
  for (int i = 0; i < in.dim(); ++i)
    for (int j = 0; j < in.dim(); ++j)
      out.rho(i, j) *= std::polar(1.0, -theta * static_cast<double>(i - j));
  return out;
}

inline SymmetricDensityMatrix collective_dephase(const SymmetricDensityMatrix& in, double Gamma0) {
  detail::require_nonneg(Gamma0, "Gamma0");
  SymmetricDensityMatrix out = in;
  for (int i = 0; i < in.dim(); ++i)
    for (int j = 0; j < in.dim(); ++j) {
      double dm = static_cast<double>(i - j);
      out.rho(i, j) *= std::exp(-0.5 * Gamma0 * dm * dm);
    }
  return out;
}

// Same kernel applied blockwise; valid because every block indexes ascending
// magnetization in unit steps, so i - j equals m - m' in each block.
inline BlockedDensityMatrix collective_dephase(const BlockedDensityMatrix& in, double Gamma0) {
  detail::require_nonneg(Gamma0, "Gamma0");
  BlockedDensityMatrix out = in;
  for (auto& blk : out.blocks)
    for (int i = 0; i < blk.dim(); ++i)
      for (int j = 0; j < blk.dim(); ++j) {
        double dm = static_cast<double>(i - j);
        blk.rho(i, j) *= std::exp(-0.5 * Gamma0 * dm * dm);
      }
  return out;
}

inline BlockedDensityMatrix phase_rotate(const BlockedDensityMatrix& in, double theta) {
  BlockedDensityMatrix out = in;
  for (auto& blk : out.blocks)
    for (int i = 0; i < blk.dim(); ++i)
      for (int j = 0; j < blk.dim(); ++j)
        blk.rho(i, j) *= std::polar(1.0, -theta * static_cast<double>(i - j));
  return out;
}

// ---------------------------------------------------------------------------
// Collective relaxation / excitation (and optionally simultaneous dephasing),
// integrated with fixed-step RK4 over the Lindblad generator
//
//   d rho / dt = G0 D[rho] + Gm (S- rho S+ - {S+S-, rho}/2)
//                          + Gp (S+ rho S- - {S-S+, rho}/2),
//
// where D[rho]_{mm'} = -(m-m')^2/2 rho_{mm'}; all three exponents are
// reached together at t = 1.  RK4 preserves the trace exactly because the
// generator is trace-free and linear.

namespace detail {

inline Mat lowering_operator(int N) {
  const double S = 0.5 * N;
  Mat Sm = Mat::Zero(N + 1, N + 1);
  for (int i = 1; i <= N; ++i) {
    double m = i - S;
    Sm(i - 1, i) = std::sqrt((S + m) * (S - m + 1.0));
  }
  return Sm;
}

struct CollectiveGenerator {
  double g0, gm, gp;
  CMat Sm, Sp, SpSm, SmSp;
  CMat dephase_cost;  // (m-m')^2 / 2 table

  CollectiveGenerator(int N, double Gamma0, double GammaMinus, double GammaPlus)
      : g0(Gamma0), gm(GammaMinus), gp(GammaPlus) {
    Mat lower = lowering_operator(N);
    Sm = lower.cast<Complex>();
    Sp = lower.transpose().cast<Complex>();
    SpSm = Sp * Sm;
    SmSp = Sm * Sp;
    Mat cost(N + 1, N + 1);
    for (int i = 0; i <= N; ++i)
      for (int j = 0; j <= N; ++j) cost(i, j) = 0.5 * static_cast<double>(i - j) * (i - j);
    dephase_cost = cost.cast<Complex>();
  }

  CMat apply(const CMat& rho) const {
    CMat out = CMat::Zero(rho.rows(), rho.cols());
    if (g0 > 0.0) out.noalias() -= g0 * dephase_cost.cwiseProduct(rho);
    if (gm > 0.0) out.noalias() += gm * (Sm * rho * Sp - 0.5 * (SpSm * rho + rho * SpSm));
    if (gp > 0.0) out.noalias() += gp * (Sp * rho * Sm - 0.5 * (SmSp * rho + rho * SmSp));
    return out;
  }
};

}  // namespace detail

inline SymmetricDensityMatrix evolve_collective(const SymmetricDensityMatrix& in, double Gamma0,
                                                double GammaMinus, double GammaPlus, int steps) {
  detail::require_nonneg(Gamma0, "Gamma0");
  detail::require_nonneg(GammaMinus, "GammaMinus");
  detail::require_nonneg(GammaPlus, "GammaPlus");
  double largest = std::max(Gamma0, std::max(GammaMinus, GammaPlus));
  if (largest == 0.0) return in;
  detail::require(steps >= 1, "evolve_collective: steps must be >= 1");
  if (largest / steps > max_step_exponent * (1.0 + 1e-12))
    throw std::invalid_argument("evolve_collective: step size exceeds the per-step exponent cap");

  detail::CollectiveGenerator gen(in.n_qubits, Gamma0, GammaMinus, GammaPlus);
  CMat rho = in.rho;
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    CMat k1 = gen.apply(rho);
    CMat k2 = gen.apply(rho + 0.5 * h * k1);
    CMat k3 = gen.apply(rho + 0.5 * h * k2);
    CMat k4 = gen.apply(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  rho = 0.5 * (rho + rho.adjoint().eval());
  SymmetricDensityMatrix out;
  out.n_qubits = in.n_qubits;
  out.rho = std::move(rho);
  return out;
}

inline SymmetricDensityMatrix evolve_collective_relax_excite(const SymmetricDensityMatrix& in,
                                                             double GammaMinus, double GammaPlus,
                                                             int steps) {
  return evolve_collective(in, 0.0, GammaMinus, GammaPlus, steps);
}

// ---------------------------------------------------------------------------
// Loss-rate bookkeeping: r = N (e^gamma - 1); transmittivity e^{-gamma}.

struct LossRate {
  double gamma = 0.0;           // integrated loss exponent
  double r = 0.0;               // rescaled strength N (e^gamma - 1)
  double transmittivity = 1.0;  // e^{-gamma} = N / (N + r)
};

inline LossRate loss_rate_from_gamma(int N, double gamma) {
  detail::require(N >= 1, "loss_rate_from_gamma: N must be >= 1");
  detail::require_nonneg(gamma, "gamma");
  LossRate out;
  out.gamma = gamma;
  out.r = N * std::expm1(gamma);
  out.transmittivity = std::exp(-gamma);
  return out;
}

inline LossRate loss_rate_from_r(int N, double r) {
  detail::require(N >= 1, "loss_rate_from_r: N must be >= 1");
  detail::require_nonneg(r, "r");
  LossRate out;
  out.r = r;
  out.gamma = std::log1p(r / N);
  out.transmittivity = N / (N + r);
  return out;
}

// ---------------------------------------------------------------------------
// Continuum drift / diffusion diagnostics at a phase-space point (x, y),
// where x = m/N and y = S/N (y = 1/2 on the maximal multiplet).  Rates are
// derivatives of the individual exponents with respect to the phase theta.
//
// Note the published relaxation/excitation velocities come with a
// transcription slip (gamma^- printed twice in v_x and D_xx); the second
// term must carry gamma^+ for probability flow to satisfy
// d(y^2 - x^2)/dtheta = -(g0dot+gmdot+gpdot)(y^2 - x^2), which the tests
// verify.

struct DriftDiffusion {
  double v_x = 0.0;
  double v_y = 0.0;
  double D_xx = 0.0;
  double D_xy = 0.0;
  double D_yy = 0.0;
  double mu_dot = 0.0;  // dephasing-mass growth rate N gdot / (4 (y^2 - x^2))
};

inline DriftDiffusion drift_diffusion_at(double x, double y, int N, double g0dot, double gmdot,
                                         double gpdot) {
  detail::require(N >= 1, "drift_diffusion_at: N must be >= 1");
  detail::require_nonneg(g0dot, "g0dot");
  detail::require_nonneg(gmdot, "gmdot");
  detail::require_nonneg(gpdot, "gpdot");
  detail::require(y > 0.0 && y <= 0.5 + 1e-12 && std::abs(x) < y,
                  "drift_diffusion_at: need |x| < y <= 1/2");
  DriftDiffusion out;
  double gdot = g0dot + gmdot + gpdot;
  out.v_x = -(0.5 + x) * gmdot + (0.5 - x) * gpdot;
  out.v_y = -(y * y - x * x) / (2.0 * y) * g0dot - (y * y + x * (1.0 + x)) / (2.0 * y) * gmdot -
            (y * y - x * (1.0 - x)) / (2.0 * y) * gpdot;
  out.D_xx = ((0.5 + x) * gmdot + (0.5 - x) * gpdot) / N;
  out.D_xy = ((y * y + x * (1.0 + x)) / (2.0 * y) * gmdot -
              (y * y - x * (1.0 - x)) / (2.0 * y) * gpdot) /
             N;
  out.D_yy = ((y * y - x * x) / (4.0 * y * y) * g0dot +
              ((y * y + x * x) / (4.0 * y * y) + x) * gmdot +
              ((y * y + x * x) / (4.0 * y * y) - x) * gpdot) /
             N;
  out.mu_dot = N * gdot / (4.0 * (y * y - x * x));
  return out;
}

}  // namespace phaselim
