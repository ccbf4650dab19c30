#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "phaselim/channels.hpp"
#include "phaselim/common.hpp"
#include "phaselim/density.hpp"

// Uncorrelated single-qubit dephasing, relaxation and excitation acting on a
// permutation-symmetric register.  The full 2^N dynamics never has to be
// touched: the density matrix stays block diagonal over total-spin sectors,
// and each sector evolves under a reduced master equation whose coefficients
// are Clebsch-Gordan data for splitting one qubit off a spin-S multiplet.
// Probability leaks from spin S to S-1 and S+1 (the familiar loss of total
// spin under local noise), while m - m' is conserved within every sector, so
// each diagonal of the stacked sector matrices evolves independently.

namespace phaselim {

namespace detail {

// Amplitude for one qubit carrying s^z = sigma/2 while the other N-1 qubits
// form spin S + tau/2, inside a symmetric spin-S state of magnetization m.
// Out-of-range corners return zero, which truncates all jump sums below.
inline double cg_split(double S, double m, int sigma, int tau) {
  if (tau > 0) {
    double v = (S + 1.0 - sigma * m) / (2.0 * (S + 1.0));
    return sigma * std::sqrt(std::max(v, 0.0));
  }
  if (2.0 * S < 1.0) return 0.0;
  double v = (S + sigma * m) / (2.0 * S);
  return std::sqrt(std::max(v, 0.0));
}

// Jump amplitude for a single-qubit operator acting on |S, m>: sigma is 0 for
// s^z and -1/+1 for the ladder operators, and the jump lands in the sector of
// spin S + tau*delta with magnetization m + sigma.
inline double jump_amplitude(double S, double m, int sigma, int tau, int delta) {
  double S2 = S + tau * delta;
  int t2 = (delta == 0) ? tau : -tau;
  if (S2 < -0.25) return 0.0;
  double m2 = m + sigma;
  if (std::abs(m) > S + 0.25 || std::abs(m2) > S2 + 0.25) return 0.0;
  if (sigma == 0) {
    return 0.5 * (cg_split(S, m, +1, tau) * cg_split(S2, m, +1, t2) -
                  cg_split(S, m, -1, tau) * cg_split(S2, m, -1, t2));
  }
  return cg_split(S, m, -sigma, tau) * cg_split(S2, m2, sigma, t2);
}

// Fraction of the spin-S multiplet of N qubits whose remaining N-1 qubits
// form spin S + tau/2.  The two fractions add up to one.
inline double residual_weight(int n_qubits, double S, int tau) {
  double N = n_qubits;
  if (tau > 0) return (S + 1.0) * (N - 2.0 * S) / ((2.0 * S + 1.0) * N);
  return S * (N + 2.0 * (S + 1.0)) / ((2.0 * S + 1.0) * N);
}

}  // namespace detail

// List of sector spins in storage order: N/2 first, then descending by one.
inline std::vector<double> spin_sector_ladder(int n_qubits) {
  detail::require(n_qubits >= 1, "need at least one qubit");
  std::vector<double> spins;
  for (double S = 0.5 * n_qubits; S > -0.25; S -= 1.0) spins.push_back(S);
  return spins;
}

// Precomputed coefficient tables for the reduced generator.  The three terms
// of the master equation are kept verbatim: a gain term pulling weight from
// sector S - tau*delta (which is the sector itself when delta = 0, and that
// same-sector piece matters for coherences, not just populations), and the
// two loss terms, whose combination contracts to (f_m^2 + f_{m'}^2)/2.
struct IndividualGenerator {
  int n_qubits = 0;
  std::vector<double> spins;
  double rate0 = 0.0;
  double rate_minus = 0.0;
  double rate_plus = 0.0;

  struct GainTerm {
    int target_block = 0;
    int source_block = 0;
    int shift = 0;    // source index = target index - shift
    double weight = 0.0;
    Vec amp;          // jump amplitude evaluated at the source magnetization
  };
  // Slot order: 0 -> s^z, 1 -> s^-, 2 -> s^+.
  std::array<std::vector<GainTerm>, 3> gains;
  std::array<std::vector<Vec>, 3> losses;
  double max_decay_rate = 0.0;

  static constexpr std::array<int, 3> slot_sigma = {0, -1, +1};

  std::array<double, 3> rates() const { return {rate0, rate_minus, rate_plus}; }
};

inline IndividualGenerator make_individual_generator(int n_qubits, double ig0,
                                                     double igm, double igp) {
  detail::require_nonneg(ig0, "individual dephasing exponent");
  detail::require_nonneg(igm, "individual relaxation exponent");
  detail::require_nonneg(igp, "individual excitation exponent");
  IndividualGenerator gen;
  gen.n_qubits = n_qubits;
  gen.spins = spin_sector_ladder(n_qubits);
  gen.rate0 = ig0;
  gen.rate_minus = igm;
  gen.rate_plus = igp;

  const double N = n_qubits;
  const int nb = static_cast<int>(gen.spins.size());
  for (int slot = 0; slot < 3; ++slot) {
    int sigma = IndividualGenerator::slot_sigma[slot];
    for (int b = 0; b < nb; ++b) {
      double S = gen.spins[b];
      int dim = static_cast<int>(std::lround(2.0 * S)) + 1;
      Vec loss = Vec::Zero(dim);
      for (int tau : {+1, -1}) {
        double W = detail::residual_weight(n_qubits, S, tau);
        if (W > 0.0) {
          for (int delta : {0, 1}) {
            for (int i = 0; i < dim; ++i) {
              double f = detail::jump_amplitude(S, -S + i, sigma, tau, delta);
              loss(i) += 0.5 * N * W * f * f;
            }
          }
        }
        for (int delta : {0, 1}) {
          double Ssrc = S - tau * delta;
          if (Ssrc < gen.spins.back() - 0.25 || Ssrc > gen.spins.front() + 0.25)
            continue;
          double Wsrc = detail::residual_weight(n_qubits, Ssrc, tau);
          if (Wsrc <= 0.0) continue;
          IndividualGenerator::GainTerm term;
          term.target_block = b;
          term.source_block = b + tau * delta;
          term.shift = tau * delta + sigma;
          term.weight = N * Wsrc;
          term.amp = Vec::Zero(dim);
          bool any = false;
          for (int i = 0; i < dim; ++i) {
            double f = detail::jump_amplitude(Ssrc, -S + i - sigma, sigma, tau, delta);
            term.amp(i) = f;
            any = any || f != 0.0;
          }
          if (any) gen.gains[slot].push_back(std::move(term));
        }
      }
      gen.losses[slot].push_back(std::move(loss));
    }
  }

  auto rates = gen.rates();
  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < gen.losses[0][b].size(); ++i) {
      double r = 0.0;
      for (int slot = 0; slot < 3; ++slot) r += 2.0 * rates[slot] * gen.losses[slot][b](i);
      gen.max_decay_rate = std::max(gen.max_decay_rate, r);
    }
  }
  return gen;
}

namespace detail {

// out += generator applied to x, all sectors at once.
inline void accumulate_individual(const IndividualGenerator& gen,
                                  const std::vector<CMat>& x, std::vector<CMat>& out) {
  auto rates = gen.rates();
  const int nb = static_cast<int>(gen.spins.size());
  for (int slot = 0; slot < 3; ++slot) {
    double r = rates[slot];
    if (r == 0.0) continue;
    for (int b = 0; b < nb; ++b) {
      const Vec& l = gen.losses[slot][b];
      const CMat& src = x[b];
      CMat& o = out[b];
      int n = static_cast<int>(l.size());
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) o(i, j) -= r * (l(i) + l(j)) * src(i, j);
    }
    for (const auto& term : gen.gains[slot]) {
      const CMat& src = x[term.source_block];
      CMat& o = out[term.target_block];
      int n = static_cast<int>(term.amp.size());
      int ns = static_cast<int>(src.rows());
      int lo = std::max(0, term.shift);
      int hi = std::min(n - 1, ns - 1 + term.shift);
      double w = r * term.weight;
      for (int i = lo; i <= hi; ++i) {
        double ai = term.amp(i);
        if (ai == 0.0) continue;
        for (int j = lo; j <= hi; ++j) {
          double aj = term.amp(j);
          if (aj == 0.0) continue;
          o(i, j) += w * ai * aj * src(i - term.shift, j - term.shift);
        }
      }
    }
  }
}

inline std::vector<CMat> sector_ladder_from_blocked(const BlockedDensityMatrix& in,
                                                    const std::vector<double>& spins) {
  std::vector<CMat> state(spins.size());
  for (std::size_t b = 0; b < spins.size(); ++b) {
    int dim = static_cast<int>(std::lround(2.0 * spins[b])) + 1;
    state[b] = CMat::Zero(dim, dim);
  }
  for (const auto& blk : in.blocks) {
    require(blk.label.kind == BlockLabel::Kind::spin_sector,
            "individual channel expects spin-sector blocks");
    int b = static_cast<int>(std::lround(spins.front() - blk.label.spin));
    require(b >= 0 && b < static_cast<int>(spins.size()), "spin sector out of range");
    require(blk.rho.rows() == state[b].rows(), "sector dimension mismatch");
    state[b] += blk.weight * blk.rho;
  }
  return state;
}

inline BlockedDensityMatrix blocked_from_sector_ladder(int n_qubits,
                                                       const std::vector<double>& spins,
                                                       std::vector<CMat> state) {
  BlockedDensityMatrix out;
  out.n_qubits = n_qubits;
  for (std::size_t b = 0; b < spins.size(); ++b) {
    Block blk;
    blk.label.kind = BlockLabel::Kind::spin_sector;
    blk.label.spin = spins[b];
    blk.weight = 1.0;
    blk.rho = 0.5 * (state[b] + state[b].adjoint().eval());
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

}  // namespace detail

inline int default_individual_steps(const IndividualGenerator& gen) {
  int steps = static_cast<int>(std::ceil(gen.max_decay_rate / max_step_exponent));
  return std::max(steps, 1);
}

// Integrates the reduced master equation from zero noise up to the requested
// exponents, with fixed rate ratios along the way.  steps = 0 picks a step
// count that keeps the per-step decay exponent under max_step_exponent.
inline BlockedDensityMatrix evolve_individual(const BlockedDensityMatrix& in, double ig0,
                                              double igm, double igp, int steps = 0) {
  IndividualGenerator gen = make_individual_generator(in.n_qubits, ig0, igm, igp);
  if (steps <= 0) {
    steps = default_individual_steps(gen);
  } else {
    detail::require(gen.max_decay_rate / steps <= max_step_exponent * (1.0 + 1e-12),
                    "step count too small for requested exponents");
  }

  std::vector<CMat> x = detail::sector_ladder_from_blocked(in, gen.spins);
  std::vector<CMat> k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()), tmp(x.size());
  auto zero_like = [&](std::vector<CMat>& v) {
    for (std::size_t b = 0; b < x.size(); ++b) v[b] = CMat::Zero(x[b].rows(), x[b].cols());
  };
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    zero_like(k1);
    detail::accumulate_individual(gen, x, k1);
    for (std::size_t b = 0; b < x.size(); ++b) tmp[b] = x[b] + 0.5 * h * k1[b];
    zero_like(k2);
    detail::accumulate_individual(gen, tmp, k2);
    for (std::size_t b = 0; b < x.size(); ++b) tmp[b] = x[b] + 0.5 * h * k2[b];
    zero_like(k3);
    detail::accumulate_individual(gen, tmp, k3);
    for (std::size_t b = 0; b < x.size(); ++b) tmp[b] = x[b] + h * k3[b];
    zero_like(k4);
    detail::accumulate_individual(gen, tmp, k4);
    for (std::size_t b = 0; b < x.size(); ++b)
      x[b] += (h / 6.0) * (k1[b] + 2.0 * k2[b] + 2.0 * k3[b] + k4[b]);
  }
  return detail::blocked_from_sector_ladder(in.n_qubits, gen.spins, std::move(x));
}

inline BlockedDensityMatrix evolve_individual(const SymmetricDensityMatrix& in, double ig0,
                                              double igm, double igp, int steps = 0) {
  return evolve_individual(to_blocked(in), ig0, igm, igp, steps);
}

// Exact propagator, one matrix exponential per conserved diagonal m - m'.
// Built once per (N, exponents) and then applied cheaply, which is what the
// probe optimizer iterates on.  An optional collective dephasing exponent can
// be folded in exactly since it only rescales whole diagonals.
class IndividualPropagator {
 public:
  IndividualPropagator(int n_qubits, double ig0, double igm, double igp,
                       double collective_g0 = 0.0)
      : n_(n_qubits), spins_(spin_sector_ladder(n_qubits)) {
    detail::require_nonneg(collective_g0, "collective dephasing exponent");
    IndividualGenerator gen = make_individual_generator(n_qubits, ig0, igm, igp);
    auto rates = gen.rates();
    const int nb = static_cast<int>(spins_.size());
    const int dmax = n_qubits;
    diags_.resize(dmax + 1);
    for (int d = 0; d <= dmax; ++d) {
      DiagData& dd = diags_[d];
      dd.d = d;
      int offset = 0;
      for (int b = 0; b < nb; ++b) {
        int dim = static_cast<int>(std::lround(2.0 * spins_[b])) + 1;
        int count = dim - d;
        if (count <= 0) break;
        dd.ranges.push_back({b, offset, count});
        offset += count;
      }
      dd.size = offset;
      if (dd.size == 0) continue;

      Mat G = Mat::Zero(dd.size, dd.size);
      for (const auto& rg : dd.ranges) {
        for (int k = 0; k < rg.count; ++k) {
          int ir = d + k;
          int ic = k;
          double diag = 0.0;
          for (int slot = 0; slot < 3; ++slot) {
            const Vec& l = gen.losses[slot][rg.block];
            diag -= rates[slot] * (l(ir) + l(ic));
          }
          G(rg.offset + k, rg.offset + k) += diag;
        }
      }
      for (int slot = 0; slot < 3; ++slot) {
        double r = rates[slot];
        if (r == 0.0) continue;
        for (const auto& term : gen.gains[slot]) {
          const DiagBlockRange* tgt = range_of(dd, term.target_block);
          const DiagBlockRange* src = range_of(dd, term.source_block);
          if (tgt == nullptr || src == nullptr) continue;
          for (int k = 0; k < tgt->count; ++k) {
            int ir = d + k;
            int ic = k;
            int ks = ic - term.shift;
            if (ks < 0 || ks >= src->count) continue;
            double c = r * term.weight * term.amp(ir) * term.amp(ic);
            if (c != 0.0) G(tgt->offset + k, src->offset + ks) += c;
          }
        }
      }
      dd.E = G.exp();
      if (collective_g0 > 0.0)
        dd.E *= std::exp(-0.5 * collective_g0 * static_cast<double>(d) * d);
    }
  }

  int n_qubits() const { return n_; }
  const std::vector<double>& spins() const { return spins_; }

  BlockedDensityMatrix apply(const SymmetricDensityMatrix& top) const {
    detail::require(top.n_qubits == n_, "qubit count mismatch");
    std::vector<CMat> state(spins_.size());
    for (std::size_t b = 0; b < spins_.size(); ++b) {
      int dim = static_cast<int>(std::lround(2.0 * spins_[b])) + 1;
      state[b] = CMat::Zero(dim, dim);
    }
    const int nt = n_ + 1;
    for (const auto& dd : diags_) {
      if (dd.size == 0) continue;
      int cols = nt - dd.d;
      Vec vr(cols), vi(cols);
      for (int k = 0; k < cols; ++k) {
        Complex z = top.rho(dd.d + k, k);
        vr(k) = z.real();
        vi(k) = z.imag();
      }
      Vec wr = dd.E.leftCols(cols) * vr;
      Vec wi = dd.E.leftCols(cols) * vi;
      for (const auto& rg : dd.ranges) {
        for (int k = 0; k < rg.count; ++k) {
          Complex z(wr(rg.offset + k), wi(rg.offset + k));
          state[rg.block](dd.d + k, k) = z;
          if (dd.d > 0) state[rg.block](k, dd.d + k) = std::conj(z);
        }
      }
    }
    return detail::blocked_from_sector_ladder(n_, spins_, std::move(state));
  }

  BlockedDensityMatrix apply_pure(const CVec& amplitudes) const {
    SymmetricDensityMatrix top;
    top.n_qubits = n_;
    top.rho = amplitudes * amplitudes.adjoint();
    return apply(top);
  }

  // Hilbert-Schmidt adjoint acting on one Hermitian matrix per sector,
  // returned as a matrix on the top-spin input space.  This is the backward
  // map used by gradient evaluation.
  CMat adjoint(const std::vector<CMat>& M) const {
    detail::require(M.size() == spins_.size(), "need one matrix per sector");
    const int nt = n_ + 1;
    CMat out = CMat::Zero(nt, nt);
    for (const auto& dd : diags_) {
      if (dd.size == 0) continue;
      int cols = nt - dd.d;
      Vec ur(dd.size), ui(dd.size);
      for (const auto& rg : dd.ranges) {
        for (int k = 0; k < rg.count; ++k) {
          Complex z = M[rg.block](dd.d + k, k);
          ur(rg.offset + k) = z.real();
          ui(rg.offset + k) = z.imag();
        }
      }
      Vec zr = dd.E.leftCols(cols).transpose() * ur;
      Vec zi = dd.E.leftCols(cols).transpose() * ui;
      for (int k = 0; k < cols; ++k) {
        Complex z(zr(k), zi(k));
        out(dd.d + k, k) = z;
        if (dd.d > 0) out(k, dd.d + k) = std::conj(z);
      }
    }
    return out;
  }

  Mat adjoint_real(const std::vector<Mat>& M) const {
    detail::require(M.size() == spins_.size(), "need one matrix per sector");
    const int nt = n_ + 1;
    Mat out = Mat::Zero(nt, nt);
    for (const auto& dd : diags_) {
      if (dd.size == 0) continue;
      int cols = nt - dd.d;
      Vec u(dd.size);
      for (const auto& rg : dd.ranges)
        for (int k = 0; k < rg.count; ++k) u(rg.offset + k) = M[rg.block](dd.d + k, k);
      Vec z = dd.E.leftCols(cols).transpose() * u;
      for (int k = 0; k < cols; ++k) {
        out(dd.d + k, k) = z(k);
        if (dd.d > 0) out(k, dd.d + k) = z(k);
      }
    }
    return out;
  }

 private:
  struct DiagBlockRange {
    int block;
    int offset;
    int count;
  };
  struct DiagData {
    int d = 0;
    int size = 0;
    std::vector<DiagBlockRange> ranges;
    Mat E;
  };

  static const DiagBlockRange* range_of(const DiagData& dd, int block) {
    for (const auto& rg : dd.ranges)
      if (rg.block == block) return &rg;
    return nullptr;
  }

  int n_;
  std::vector<double> spins_;
  std::vector<DiagData> diags_;
};

}  // namespace phaselim
