#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaselim/common.hpp"
#include "phaselim/optimize.hpp"

namespace phaselim {

// Continuum limit of the probe-optimization problem. For large ensembles the
// optimal amplitude profile psi(x), x = m/N in (-1/2, 1/2), is the ground
// state of -psi'' + mu(x) psi = lambda psi where the potential mu encodes the
// decoherence channel, and 1/F approaches lambda_min / N^2.

// ---------------------------------------------------------------------------
// Potentials

enum class PotentialKind {
  box,                // flat mu0
  collective_general, // mu0 + mu1 x^2/(1/4 - x^2)
  collective_sinch,   // exact collective form, displaced well for gm != gp
  individual,         // mu0 + r/(1 - 4x^2)
  loss,               // mu0 + (r1/(1/2+x) + r2/(1/2-x))/4, Coulomb sources
  custom,             // caller-supplied evaluator
};

namespace detail {

inline double sinch(double t) {
  if (std::abs(t) < 1e-4) {
    double t2 = t * t;
    return 1.0 + t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sinh(t) / t;
}

}  // namespace detail

struct Potential {
  PotentialKind kind = PotentialKind::box;
  double mu0 = 0.0;     // collective dephasing mass N^2 Gamma0
  double mu1 = 0.0;     // collective relax+excite mass N^2 (Gm + Gp)
  double s_star = 0.0;  // well displacement N (Gp - Gm) / 2
  double r = 0.0;       // individual rate N (e^gamma - 1)
  double r1 = 0.0;      // loss source strengths N (e^gamma_i - 1)
  double r2 = 0.0;
  std::function<double(double)> fn;  // custom kind only

  double operator()(double x) const {
    if (!(x > -0.5 && x < 0.5))
      throw std::domain_error("potential evaluated outside (-1/2, 1/2)");
    switch (kind) {
      case PotentialKind::box:
        return mu0;
      case PotentialKind::collective_general:
        return mu0 + mu1 * x * x / (0.25 - x * x);
      case PotentialKind::collective_sinch: {
        double s = 2.0 * std::atanh(2.0 * x);
        return mu0 + 0.5 * mu1 * (detail::sinch(s_star) * std::cosh(s - s_star) - 1.0);
      }
      case PotentialKind::individual:
        return mu0 + r / (1.0 - 4.0 * x * x);
      case PotentialKind::loss:
        return mu0 + 0.25 * (r1 / (0.5 + x) + r2 / (0.5 - x));
      case PotentialKind::custom:
        return fn(x);
    }
    throw std::logic_error("unreachable potential kind");
  }
};

namespace detail {

inline void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + " must be >= 0");
}

}  // namespace detail

inline Potential box_potential(double mu0) {
  detail::require_nonnegative(mu0, "mu0");
  Potential p;
  p.kind = PotentialKind::box;
  p.mu0 = mu0;
  return p;
}

inline Potential collective_potential(double mu0, double mu1) {
  detail::require_nonnegative(mu0, "mu0");
  detail::require_nonnegative(mu1, "mu1");
  Potential p;
  p.kind = PotentialKind::collective_general;
  p.mu0 = mu0;
  p.mu1 = mu1;
  return p;
}

inline Potential sinch_potential(double mu0, double mu1, double s_star) {
  detail::require_nonnegative(mu0, "mu0");
  detail::require_nonnegative(mu1, "mu1");
  Potential p;
  p.kind = PotentialKind::collective_sinch;
  p.mu0 = mu0;
  p.mu1 = mu1;
  p.s_star = s_star;
  return p;
}

inline Potential individual_potential(double r, double mu0 = 0.0) {
  detail::require_nonnegative(r, "r");
  detail::require_nonnegative(mu0, "mu0");
  Potential p;
  p.kind = PotentialKind::individual;
  p.r = r;
  p.mu0 = mu0;
  return p;
}

// r2 = 0 is allowed: the second source degenerates into a plain wall.
inline Potential loss_potential(double mu0, double r1, double r2) {
  detail::require_nonnegative(mu0, "mu0");
  detail::require_nonnegative(r1, "r1");
  detail::require_nonnegative(r2, "r2");
  Potential p;
  p.kind = PotentialKind::loss;
  p.mu0 = mu0;
  p.r1 = r1;
  p.r2 = r2;
  return p;
}

inline Potential custom_potential(std::function<double(double)> fn) {
  if (!fn) throw std::invalid_argument("custom potential needs an evaluator");
  Potential p;
  p.kind = PotentialKind::custom;
  p.fn = std::move(fn);
  return p;
}

// Potential matching a channel spec at ensemble size N. The collective kind
// maps to the sinch form, which is exact for unequal rates and coincides with
// collective_general when gamma_minus == gamma_plus.
inline Potential build_potential(const ChannelSpec& spec, int n_qubits) {
  validate_channel(spec);
  if (n_qubits < 1) throw std::invalid_argument("build_potential needs n_qubits >= 1");
  const double n = static_cast<double>(n_qubits);
  switch (spec.kind) {
    case ChannelKind::none:
    case ChannelKind::collective_dephasing:
      return box_potential(n * n * spec.gamma0);
    case ChannelKind::collective:
      return sinch_potential(n * n * spec.gamma0,
                             n * n * (spec.gamma_minus + spec.gamma_plus),
                             0.5 * n * (spec.gamma_plus - spec.gamma_minus));
    case ChannelKind::individual:
      return individual_potential(
          n * std::expm1(spec.igamma0 + spec.igamma_minus + spec.igamma_plus),
          n * n * spec.gamma0);
    case ChannelKind::loss:
      return loss_potential(n * n * spec.gamma0, n * std::expm1(spec.loss1),
                            n * std::expm1(spec.loss2));
  }
  throw std::logic_error("unreachable channel kind");
}

// ---------------------------------------------------------------------------
// Ground state of -psi'' + mu psi = lambda psi on (-1/2, 1/2)
//
// Half-offset uniform grid x_i = -1/2 + (i + 1/2) h with h = 1/n keeps the
// Coulomb-type singularities off the nodes. Dirichlet walls enter through the
// ghost reflection psi_{-1} = -psi_0 (zero at the wall midpoint), which keeps
// the scheme O(h^2) and makes cos(pi x) an exact discrete eigenvector of the
// flat box. The smallest eigenvalue comes from bisection on the Sturm count
// of the tridiagonal matrix, the eigenvector from shifted inverse iteration,
// and the returned eigenvalue is Richardson-extrapolated from resolutions n
// and 2n.

struct GroundState {
  double lambda_min = 0.0;  // Richardson-extrapolated
  Vec psi;                  // normalized so h * sum psi^2 = 1
  Vec x;                    // half-offset nodes
  double h = 0.0;
  double richardson_gap = 0.0;  // relative |lambda_n - lambda_2n|
};

namespace detail {

struct TridiagonalProblem {
  Vec diag;
  double off = 0.0;  // constant off-diagonal
  Vec mu;
  Vec x;
  double h = 0.0;
};

inline TridiagonalProblem discretize_potential(const Potential& pot, int n) {
  TridiagonalProblem t;
  t.h = 1.0 / n;
  t.x = Vec(n);
  t.mu = Vec(n);
  for (int i = 0; i < n; ++i) {
    t.x(i) = -0.5 + (i + 0.5) * t.h;
    t.mu(i) = pot(t.x(i));
    if (!std::isfinite(t.mu(i)))
      throw std::domain_error("potential is not finite on the grid");
  }
  const double inv_h2 = 1.0 / (t.h * t.h);
  t.diag = t.mu.array() + 2.0 * inv_h2;
  t.diag(0) += inv_h2;
  t.diag(n - 1) += inv_h2;
  t.off = -inv_h2;
  return t;
}

// Number of eigenvalues strictly below lambda (Sturm sequence count).
inline int sturm_count_below(const TridiagonalProblem& t, double lambda) {
  const double b2 = t.off * t.off;
  const int n = static_cast<int>(t.diag.size());
  int count = 0;
  double d = t.diag(0) - lambda;
  if (d <= 0.0) ++count;
  for (int i = 1; i < n; ++i) {
    if (d == 0.0) d = -1e-300;
    d = (t.diag(i) - lambda) - b2 / d;
    if (d <= 0.0) ++count;
  }
  return count;
}

inline double smallest_eigenvalue(const TridiagonalProblem& t) {
  // The kinetic part is positive definite, so min mu is a strict lower bound.
  double lo = t.mu.minCoeff();
  double hi = t.diag.maxCoeff() + 2.0 * std::abs(t.off);
  for (int iter = 0; iter < 240; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (sturm_count_below(t, mid) >= 1)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// Solve (T - sigma) w = v by the Thomas algorithm; sigma sits strictly below
// the spectrum, so the elimination needs no pivoting.
inline Vec shifted_solve(const TridiagonalProblem& t, double sigma, const Vec& v) {
  const int n = static_cast<int>(t.diag.size());
  Vec c(n), w(n);
  double piv = t.diag(0) - sigma;
  c(0) = t.off / piv;
  w(0) = v(0) / piv;
  for (int i = 1; i < n; ++i) {
    piv = (t.diag(i) - sigma) - t.off * c(i - 1);
    c(i) = t.off / piv;
    w(i) = (v(i) - t.off * w(i - 1)) / piv;
  }
  for (int i = n - 2; i >= 0; --i) w(i) -= c(i) * w(i + 1);
  return w;
}

inline Vec apply_tridiagonal(const TridiagonalProblem& t, const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec out = t.diag.cwiseProduct(v);
  out.head(n - 1) += t.off * v.tail(n - 1);
  out.tail(n - 1) += t.off * v.head(n - 1);
  return out;
}

inline Vec ground_vector(const TridiagonalProblem& t, double lambda) {
  const int n = static_cast<int>(t.diag.size());
  const double sigma = lambda - 1e-9 * std::max(1.0, std::abs(lambda));
  Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int iter = 0; iter < 8; ++iter) {
    v = shifted_solve(t, sigma, v);
    v /= v.norm();
    double rho = v.dot(apply_tridiagonal(t, v));
    double resid = (apply_tridiagonal(t, v) - rho * v).norm();
    if (resid <= 1e-8 * std::max(1.0, std::abs(rho))) return v;
  }
  throw std::runtime_error("ground-state inverse iteration did not converge");
}

}  // namespace detail

inline GroundState ground_state(const Potential& pot, int grid_points = 2001) {
  if (grid_points < 501) throw std::invalid_argument("ground_state needs grid_points >= 501");

  detail::TridiagonalProblem coarse = detail::discretize_potential(pot, grid_points);
  detail::TridiagonalProblem fine = detail::discretize_potential(pot, 2 * grid_points);
  const double lam_c = detail::smallest_eigenvalue(coarse);
  const double lam_f = detail::smallest_eigenvalue(fine);

  GroundState gs;
  gs.richardson_gap = std::abs(lam_c - lam_f) / std::max(1.0, std::abs(lam_f));
  if (gs.richardson_gap > 1e-4)
    throw std::runtime_error("ground_state eigenvalue did not converge under grid refinement");
  gs.lambda_min = (4.0 * lam_f - lam_c) / 3.0;

  Vec v = detail::ground_vector(coarse, lam_c);
  gs.h = coarse.h;
  gs.x = coarse.x;
  // normalize as a continuum profile and fix the overall sign
  v /= std::sqrt(gs.h);
  int peak = 0;
  v.cwiseAbs().maxCoeff(&peak);
  if (v(peak) < 0.0) v = -v;
  gs.psi = v;
  return gs;
}

// Sample the continuum profile at the spin lattice x_m = m/N - 1/2 and
// renormalize to a unit probe vector. Outside the node range the profile is
// interpolated linearly to its Dirichlet zeros at the walls.
inline Vec ground_state_amplitudes(const GroundState& gs, int n_qubits) {
  if (n_qubits < 1) throw std::invalid_argument("ground_state_amplitudes needs n_qubits >= 1");
  if (gs.psi.size() < 2) throw std::invalid_argument("ground state profile is empty");
  const int n = static_cast<int>(gs.psi.size());
  Vec amps(n_qubits + 1);
  for (int m = 0; m <= n_qubits; ++m) {
    double x = static_cast<double>(m) / n_qubits - 0.5;
    double value;
    if (x <= gs.x(0)) {
      // wall at -1/2 to first node
      double tfrac = (x + 0.5) / (gs.x(0) + 0.5);
      value = tfrac * gs.psi(0);
    } else if (x >= gs.x(n - 1)) {
      double tfrac = (0.5 - x) / (0.5 - gs.x(n - 1));
      value = tfrac * gs.psi(n - 1);
    } else {
      int i = static_cast<int>((x - gs.x(0)) / gs.h);
      i = std::clamp(i, 0, n - 2);
      double tfrac = (x - gs.x(i)) / gs.h;
      value = (1.0 - tfrac) * gs.psi(i) + tfrac * gs.psi(i + 1);
    }
    amps(m) = value;
  }
  double norm = amps.norm();
  if (norm <= 0.0) throw std::runtime_error("sampled profile vanished");
  return amps / norm;
}

namespace detail {

// Analytic continuation of the potential past a source-free wall, used when
// relaxing the Dirichlet node at finite N. Kinds whose walls always carry a
// singularity fall back to the in-domain evaluator.
inline double mu_extended(const Potential& pot, double x) {
  switch (pot.kind) {
    case PotentialKind::box:
      return pot.mu0;
    case PotentialKind::loss: {
      double mu = pot.mu0;
      if (pot.r1 > 0.0) mu += 0.25 * pot.r1 / (0.5 + x);
      if (pot.r2 > 0.0) mu += 0.25 * pot.r2 / (0.5 - x);
      return mu;
    }
    default:
      return pot(x);
  }
}

inline bool left_wall_extendable(const Potential& pot) {
  switch (pot.kind) {
    case PotentialKind::box:
      return true;
    case PotentialKind::loss:
      return pot.r1 == 0.0;
    case PotentialKind::collective_general:
    case PotentialKind::collective_sinch:
      return pot.mu1 == 0.0;
    case PotentialKind::individual:
      return pot.r == 0.0;
    case PotentialKind::custom:
      return false;
  }
  return false;
}

inline bool right_wall_extendable(const Potential& pot) {
  if (pot.kind == PotentialKind::loss) return pot.r2 == 0.0;
  return left_wall_extendable(pot);
}

}  // namespace detail

// At finite N the exact optimum keeps weight on a source-free wall: the node
// of the continuum solution sits beyond the last site and converges on the
// wall only as N grows. Extending the domain by delta at such walls and
// keeping the extension whose sampled profile has the largest exact QFI
// recovers this without touching the plain solver. Walls carrying a Coulomb
// source pin the node and are never moved.
struct RelaxedProfile {
  Vec amplitudes;           // sampled at x = m/N - 1/2, unit norm, nonnegative
  double delta = 0.0;       // adopted wall extension, in box lengths
  double qfi = 0.0;         // exact QFI of the sampled probe
  double lambda_min = 0.0;  // eigenvalue at the adopted extension
};

inline RelaxedProfile relaxed_ground_profile(const ChannelSpec& spec, int n_qubits,
                                             int grid_points = 2001) {
  Potential pot = build_potential(spec, n_qubits);
  const bool left = detail::left_wall_extendable(pot);
  const bool right = detail::right_wall_extendable(pot);
  const int steps = (left || right) ? 12 : 0;
  RelaxedProfile best;
  best.qfi = -1.0;
  for (int k = 0; k <= steps; ++k) {
    const double d = 0.25 * k / n_qubits;
    const double dl = left ? d : 0.0;
    const double dr = right ? d : 0.0;
    const double len = 1.0 + dl + dr;
    Potential wrapped = custom_potential([pot, dl, len](double u) {
      return len * len * detail::mu_extended(pot, -0.5 - dl + (u + 0.5) * len);
    });
    GroundState gs = ground_state(wrapped, grid_points);
    const int n = static_cast<int>(gs.psi.size());
    Vec amps(n_qubits + 1);
    for (int m = 0; m <= n_qubits; ++m) {
      const double x = static_cast<double>(m) / n_qubits - 0.5;
      const double u = (x + 0.5 + dl) / len - 0.5;
      double value;
      if (u <= gs.x(0)) {
        value = (u + 0.5) / (gs.x(0) + 0.5) * gs.psi(0);
      } else if (u >= gs.x(n - 1)) {
        value = (0.5 - u) / (0.5 - gs.x(n - 1)) * gs.psi(n - 1);
      } else {
        int i = static_cast<int>((u - gs.x(0)) / gs.h);
        i = std::clamp(i, 0, n - 2);
        double t = (u - gs.x(i)) / gs.h;
        value = (1.0 - t) * gs.psi(i) + t * gs.psi(i + 1);
      }
      amps(m) = value;
    }
    double norm = amps.norm();
    if (norm <= 0.0) throw std::runtime_error("relaxed profile vanished on the site grid");
    amps /= norm;
    ProbeState probe = normalized_probe(n_qubits, amps.cast<std::complex<double>>());
    double F = qfi(apply_channel(spec, probe));
    if (F > best.qfi) {
      best.qfi = F;
      best.delta = d;
      best.amplitudes = amps;
      best.lambda_min = gs.lambda_min / (len * len);
    }
  }
  return best;
}

// Width of the best-fit Gaussian exp(-(x - mean)^2 / (4 w^2)), obtained from
// a log-parabola fit restricted to one width around the center (iterated so
// the window tracks the fitted width). This is the density's standard
// deviation when the profile is exactly Gaussian.
inline double fitted_gaussian_width(const Vec& psi, const Vec& x, double h) {
  const int n = static_cast<int>(psi.size());
  if (n < 8 || x.size() != n) throw std::invalid_argument("profile and grid sizes mismatch");
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x(i) * psi(i) * psi(i) * h;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += (x(i) - mean) * (x(i) - mean) * psi(i) * psi(i) * h;
  double w = std::sqrt(var);
  const double floor = 1e-12 * psi.cwiseAbs().maxCoeff();
  for (int pass = 0; pass < 4; ++pass) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(x(i) - mean) > w || psi(i) <= floor) continue;
      double xi = (x(i) - mean) * (x(i) - mean);
      double yi = std::log(psi(i));
      sx += xi;
      sy += yi;
      sxx += xi * xi;
      sxy += xi * yi;
      ++count;
    }
    if (count < 5) throw std::runtime_error("gaussian width fit window too narrow");
    double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    if (!(slope < 0.0)) throw std::runtime_error("gaussian width fit found no decay");
    w = std::sqrt(-0.25 / slope);
  }
  return w;
}

// ---------------------------------------------------------------------------
// QFI functional
//
// F / N^2 = integral of psi^2/mu - psi'^2/mu^2 over (-1/2, 1/2). The
// half-offset nodes are midpoints of cells that tile the interval exactly,
// so the plain cell sum is second-order accurate without extrapolating the
// derivative into the walls (psi' does not vanish there). The derivative
// uses central differences with the same ghost reflection as the
// eigensolver.

inline double qfi_functional(const Vec& psi, const Vec& x, const Potential& pot) {
  const int n = static_cast<int>(psi.size());
  if (n < 8 || x.size() != n) throw std::invalid_argument("profile and grid sizes mismatch");
  const double h = x(1) - x(0);
  Vec mu(n);
  for (int i = 0; i < n; ++i) {
    mu(i) = pot(x(i));
    if (!(mu(i) > 0.0)) throw std::domain_error("qfi_functional needs mu > 0 on the support");
  }
  // tolerate unnormalized input
  double norm2 = psi.squaredNorm() * h;
  if (!(norm2 > 0.0)) throw std::invalid_argument("profile has zero norm");
  Vec p = psi / std::sqrt(norm2);
  Vec dp(n);
  dp(0) = (p(1) + p(0)) / (2.0 * h);
  dp(n - 1) = (-p(n - 1) - p(n - 2)) / (2.0 * h);
  for (int i = 1; i < n - 1; ++i) dp(i) = (p(i + 1) - p(i - 1)) / (2.0 * h);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    total += (p(i) * p(i) / mu(i) - dp(i) * dp(i) / (mu(i) * mu(i))) * h;
  return total;
}

// ---------------------------------------------------------------------------
// Asymptotic precision bounds

struct PrecisionBound {
  double closed_form = 0.0;  // large-N expression for min variance per trial
  double numeric = 0.0;      // lambda_min / N^2 from the ground-state solve
  bool conditions_met = true;
  std::string note;
};

// Channel-specific asymptotic lower bound on the per-trial phase variance,
// reported next to the numeric ground-state value so the two routes can be
// compared at finite N.
inline PrecisionBound precision_bound(const ChannelSpec& spec, int n_qubits,
                                      int grid_points = 2001) {
  validate_channel(spec);
  if (n_qubits < 1) throw std::invalid_argument("precision_bound needs n_qubits >= 1");
  const double n = static_cast<double>(n_qubits);
  PrecisionBound out;
  switch (spec.kind) {
    case ChannelKind::none:
    case ChannelKind::collective_dephasing: {
      const double mu0 = n * n * spec.gamma0;
      out.closed_form = spec.gamma0 + pi * pi / (n * n);
      out.conditions_met = mu0 >= 10.0;
      out.note = "valid for mu0 = N^2 Gamma0 >> 1";
      break;
    }
    case ChannelKind::collective: {
      const double sum = spec.gamma_minus + spec.gamma_plus;
      out.closed_form = spec.gamma0 + std::sqrt(sum) / n;
      const double scale = std::max(spec.gamma_minus, spec.gamma_plus);
      out.conditions_met = n * n * spec.gamma0 >= 10.0 && n * scale <= 0.1;
      out.note = "valid for mu0 >> 1 and N << 1/Gamma_pm";
      break;
    }
    case ChannelKind::individual: {
      const double gamma = spec.igamma0 + spec.igamma_minus + spec.igamma_plus;
      out.closed_form = spec.gamma0 + std::expm1(gamma) / n;
      out.conditions_met = n * std::expm1(gamma) >= 10.0;
      out.note = "valid for r = N (e^gamma - 1) >> 1";
      break;
    }
    case ChannelKind::loss: {
      const double eps1 = 0.5 * std::sqrt(std::expm1(spec.loss1));
      const double eps2 = 0.5 * std::sqrt(std::expm1(spec.loss2));
      out.closed_form = spec.gamma0 + (eps1 + eps2) * (eps1 + eps2) / (4.0 * n);
      out.conditions_met = n * std::expm1(spec.loss1) >= 10.0;
      out.note =
          "valid for r1 >> 1; numeric well depth min mu/N^2 differs from the "
          "closed form by a constant factor, both reported";
      break;
    }
  }
  out.numeric = ground_state(build_potential(spec, n_qubits), grid_points).lambda_min / (n * n);
  return out;
}

struct SuddenDeathBound {
  double bound = 0.0;
  bool exponential_regime = false;
};

// Collective relaxation/excitation floor: 1/F >= min_x mu(x)/N^2, attained at
// the displaced well bottom of the sinch potential. Once N |Gm - Gp| exceeds
// order one the floor grows exponentially with N.
inline SuddenDeathBound sudden_death_bound(double gamma_minus, double gamma_plus, double gamma0,
                                           int n_qubits) {
  detail::require_nonnegative(gamma_minus, "gamma_minus");
  detail::require_nonnegative(gamma_plus, "gamma_plus");
  detail::require_nonnegative(gamma0, "gamma0");
  if (n_qubits < 1) throw std::invalid_argument("sudden_death_bound needs n_qubits >= 1");
  const double t = 0.5 * n_qubits * (gamma_minus - gamma_plus);
  SuddenDeathBound out;
  out.bound = gamma0 + 0.5 * (gamma_minus + gamma_plus) * (detail::sinch(t) - 1.0);
  out.exponential_regime = std::abs(2.0 * t) >= 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Optimal clustering under collective dephasing
//
// Splitting a budget of nu * N particles into clusters of size N gives
// var theta = (sqrt(Gamma0) / budget) * g(u) with u = sqrt(mu0) and
// g(u) = u + beta(u), beta(u) = alpha(mu0) / u, where alpha is the quantum
// part of the error law 1/F = Gamma0 + alpha/N^2. The optimum solves
// beta'(u) = -1.

enum class AlphaSource {
  numeric,  // alpha from optimize_probe sweeps over cluster sizes
  table,    // closed-form alpha of the two-component probe, e^mu0 - mu0
};

struct ClusterAnalysis {
  std::vector<double> mu0;       // sample masses
  std::vector<double> alpha;     // quantum error coefficient at each mass
  std::vector<double> sqrt_mu0;  // u = sqrt(mu0)
  std::vector<double> beta;      // alpha / u
  double mu0_star = 0.0;
  double cluster_size = 0.0;  // N_c = sqrt(mu0_star / Gamma0)
  double prefactor = 0.0;     // c with var = c sqrt(Gamma0) / budget
  double variance_at_optimum = 0.0;
  long budget = 0;
};

// Quantum error coefficient alpha = N^2 (1/F_opt - Gamma0) at one mass point.
inline double numeric_alpha(double gamma0, int n_qubits, const OptimizeOptions& opts = {}) {
  OptimizationResult res = optimize_probe(dephasing_channel(gamma0), n_qubits, opts);
  const double n = static_cast<double>(n_qubits);
  return n * n * (1.0 / res.qfi - gamma0);
}

inline ClusterAnalysis cluster_optimize(ChannelKind kind, double gamma0, long total_budget,
                                        AlphaSource source,
                                        const std::vector<int>& sweep_sizes = {10, 14, 20, 28, 40},
                                        const OptimizeOptions& opts = {}) {
  if (kind != ChannelKind::collective_dephasing)
    throw std::invalid_argument("cluster_optimize only handles collective dephasing");
  if (!(gamma0 > 0.0 && gamma0 <= 0.1))
    throw std::invalid_argument("cluster_optimize needs 0 < Gamma0 <= 0.1");
  if (total_budget < 1) throw std::invalid_argument("cluster_optimize needs a positive budget");

  ClusterAnalysis out;
  out.budget = total_budget;

  if (source == AlphaSource::table) {
    // two-component probe: 1/F = e^{mu0}/N^2 + Gamma0, so alpha = e^mu0 - mu0
    // after absorbing the dephasing term. Internal grid in u = sqrt(mu0).
    for (double u = 0.2; u <= 1.5 + 1e-12; u += 0.002) {
      double m = u * u;
      out.mu0.push_back(m);
      out.alpha.push_back(std::exp(m) - m);
    }
  } else {
    if (sweep_sizes.size() < 3)
      throw std::invalid_argument("cluster_optimize needs at least 3 sweep sizes");
    std::vector<int> sizes = sweep_sizes;
    std::sort(sizes.begin(), sizes.end());
    for (int n : sizes) {
      if (n < 2) throw std::invalid_argument("cluster sizes must be >= 2");
      out.mu0.push_back(gamma0 * n * n);
      out.alpha.push_back(numeric_alpha(gamma0, n, opts));
    }
    int inside = 0;
    for (double m : out.mu0)
      if (m >= 0.1 && m <= 5.0) ++inside;
    if (inside < 3)
      throw std::invalid_argument(
          "cluster_optimize sweep does not cover the mass range mu0 in [0.1, 5]");
  }

  const std::size_t count = out.mu0.size();
  out.sqrt_mu0.resize(count);
  out.beta.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.sqrt_mu0[i] = std::sqrt(out.mu0[i]);
    out.beta[i] = out.alpha[i] / out.sqrt_mu0[i];
  }

  // derivative of beta at midpoints; root of beta' + 1 = 0 by interpolation
  double u_star = -1.0;
  double prev_mid = 0.0, prev_val = 0.0;
  bool have_prev = false;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    double mid = 0.5 * (out.sqrt_mu0[i] + out.sqrt_mu0[i + 1]);
    double val =
        (out.beta[i + 1] - out.beta[i]) / (out.sqrt_mu0[i + 1] - out.sqrt_mu0[i]) + 1.0;
    if (have_prev && prev_val <= 0.0 && val > 0.0) {
      double tfrac = -prev_val / (val - prev_val);
      u_star = prev_mid + tfrac * (mid - prev_mid);
      break;
    }
    have_prev = true;
    prev_mid = mid;
    prev_val = val;
  }
  if (u_star <= 0.0)
    throw std::invalid_argument(
        "cluster_optimize sweep does not bracket the stationary mass: widen the coverage");

  // beta at the stationary point by interpolation on the samples
  double beta_star = out.beta.back();
  for (std::size_t i = 0; i + 1 < count; ++i) {
    if (out.sqrt_mu0[i] <= u_star && u_star <= out.sqrt_mu0[i + 1]) {
      double tfrac = (u_star - out.sqrt_mu0[i]) / (out.sqrt_mu0[i + 1] - out.sqrt_mu0[i]);
      beta_star = (1.0 - tfrac) * out.beta[i] + tfrac * out.beta[i + 1];
      break;
    }
  }

  out.mu0_star = u_star * u_star;
  out.cluster_size = std::sqrt(out.mu0_star / gamma0);
  out.prefactor = u_star + beta_star;
  out.variance_at_optimum = out.prefactor * std::sqrt(gamma0) / static_cast<double>(total_budget);
  return out;
}

}  // namespace phaselim
