#pragma once

// Brute-force references used only by the test suite.  Everything here works
// on the full 2^N register so it stays independent of the reduced
// representations in the library headers.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "phaselim/common.hpp"

namespace oracle {

using phaselim::CMat;
using phaselim::Complex;
using phaselim::CVec;
using phaselim::Mat;
using phaselim::Vec;

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Single-qubit basis: index 0 is m = -1/2, index 1 is m = +1/2.  Qubit 0 is
// the most significant bit of the register index.
inline CMat site_operator(int n_qubits, int site, const CMat& op) {
  CMat out = CMat::Identity(1, 1);
  for (int k = 0; k < n_qubits; ++k) {
    if (k == site)
      out = kron(out, op);
    else
      out = kron(out, CMat::Identity(2, 2));
  }
  return out;
}

inline CMat spin_z_half() {
  CMat s(2, 2);
  s << Complex(-0.5, 0.0), 0.0, 0.0, Complex(0.5, 0.0);
  return s;
}

inline CMat spin_lower_half() {
  CMat s = CMat::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

// drho = sum over qubits and jump types of the usual dissipator, with the
// given weights multiplying the s^z, s^- and s^+ contributions.
inline CMat local_lindblad_rhs(int n_qubits, const CMat& rho, double w0, double wm,
                               double wp) {
  const int dim = 1 << n_qubits;
  CMat out = CMat::Zero(dim, dim);
  struct JumpSpec {
    CMat op;
    double w;
  };
  std::vector<JumpSpec> jumps;
  jumps.push_back({spin_z_half(), w0});
  jumps.push_back({spin_lower_half(), wm});
  jumps.push_back({spin_lower_half().adjoint(), wp});
  for (const auto& jump : jumps) {
    if (jump.w == 0.0) continue;
    for (int k = 0; k < n_qubits; ++k) {
      CMat pi = site_operator(n_qubits, k, jump.op);
      CMat pp = pi.adjoint() * pi;
      out += jump.w * (pi * rho * pi.adjoint() - 0.5 * (pp * rho + rho * pp));
    }
  }
  return out;
}

inline CMat evolve_local_lindblad(CMat rho, int n_qubits, double g0, double gm, double gp,
                                  int steps) {
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    CMat k1 = local_lindblad_rhs(n_qubits, rho, g0, gm, gp);
    CMat k2 = local_lindblad_rhs(n_qubits, rho + 0.5 * h * k1, g0, gm, gp);
    CMat k3 = local_lindblad_rhs(n_qubits, rho + 0.5 * h * k2, g0, gm, gp);
    CMat k4 = local_lindblad_rhs(n_qubits, rho + h * k3, g0, gm, gp);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return rho;
}

// One permutation-symmetry-adapted multiplet: total spin and the 2S+1 basis
// vectors in the full register space, built by coupling qubits one at a time.
struct SpinMultiplet {
  double S = 0.0;
  std::vector<Vec> states;  // index i corresponds to m = -S + i
};

inline std::vector<SpinMultiplet> coupled_multiplets(int n_qubits) {
  std::vector<SpinMultiplet> paths;
  {
    SpinMultiplet base;
    base.S = 0.5;
    Vec down = Vec::Zero(2), up = Vec::Zero(2);
    down(0) = 1.0;
    up(1) = 1.0;
    base.states = {down, up};
    paths.push_back(base);
  }
  for (int n = 2; n <= n_qubits; ++n) {
    std::vector<SpinMultiplet> next;
    for (const auto& p : paths) {
      double j = p.S;
      int dim = static_cast<int>(p.states.front().size());
      auto with_bit = [&](const Vec& v, int bit) {
        Vec out = Vec::Zero(2 * dim);
        for (int i = 0; i < dim; ++i) out(2 * i + bit) = v(i);
        return out;
      };
      // couple up to spin j + 1/2
      {
        SpinMultiplet q;
        q.S = j + 0.5;
        for (double m = -q.S; m <= q.S + 0.25; m += 1.0) {
          Vec v = Vec::Zero(2 * dim);
          double cu = std::sqrt((j + m + 0.5) / (2.0 * j + 1.0));
          double cd = std::sqrt((j - m + 0.5) / (2.0 * j + 1.0));
          if (m - 0.5 >= -j - 0.25) v += cu * with_bit(p.states[(int)std::lround(m - 0.5 + j)], 1);
          if (m + 0.5 <= j + 0.25) v += cd * with_bit(p.states[(int)std::lround(m + 0.5 + j)], 0);
          q.states.push_back(v);
        }
        next.push_back(std::move(q));
      }
      // couple down to spin j - 1/2
      if (j > 0.25) {
        SpinMultiplet q;
        q.S = j - 0.5;
        for (double m = -q.S; m <= q.S + 0.25; m += 1.0) {
          Vec v = Vec::Zero(2 * dim);
          double cu = -std::sqrt((j - m + 0.5) / (2.0 * j + 1.0));
          double cd = std::sqrt((j + m + 0.5) / (2.0 * j + 1.0));
          v += cu * with_bit(p.states[(int)std::lround(m - 0.5 + j)], 1);
          v += cd * with_bit(p.states[(int)std::lround(m + 0.5 + j)], 0);
          q.states.push_back(v);
        }
        next.push_back(std::move(q));
      }
    }
    paths = std::move(next);
  }
  return paths;
}

// Dicke states: the unique maximal-spin multiplet.
inline std::vector<Vec> dicke_states(int n_qubits) {
  for (const auto& p : coupled_multiplets(n_qubits))
    if (std::lround(2.0 * p.S) == n_qubits) return p.states;
  return {};
}

// Two-arm photon loss as a ladder master equation over detected-photon
// sectors (spin drops by 1/2 per lost photon, m by -/+ 1/2 for arm 1/2).
// The exact beamsplitter Kraus decomposition must reproduce this.
struct LossLadder {
  std::vector<CMat> sectors;  // spin N/2, (N-1)/2, ..., 0

  static LossLadder from_top(const CVec& amplitudes) {
    LossLadder st;
    int N = static_cast<int>(amplitudes.size()) - 1;
    for (int twoS = N; twoS >= 0; --twoS) st.sectors.push_back(CMat::Zero(twoS + 1, twoS + 1));
    st.sectors.front() = amplitudes * amplitudes.adjoint();
    return st;
  }
};

inline LossLadder loss_ladder_rhs(const LossLadder& x, double r1, double r2) {
  int nb = static_cast<int>(x.sectors.size());
  int N = nb - 1;
  LossLadder out;
  for (int b = 0; b < nb; ++b) out.sectors.push_back(CMat::Zero(N - b + 1, N - b + 1));
  for (int b = 0; b < nb; ++b) {
    int twoS = N - b;
    double S = 0.5 * twoS;
    const CMat& rho = x.sectors[b];
    CMat& o = out.sectors[b];
    for (int i = 0; i <= twoS; ++i) {
      for (int j = 0; j <= twoS; ++j) {
        double f1i = std::sqrt(static_cast<double>(i));
        double f1j = std::sqrt(static_cast<double>(j));
        double f2i = std::sqrt(static_cast<double>(twoS - i));
        double f2j = std::sqrt(static_cast<double>(twoS - j));
        o(i, j) -= r1 * (f1i * f1j + 0.5 * (f1i - f1j) * (f1i - f1j)) * rho(i, j);
        o(i, j) -= r2 * (f2i * f2j + 0.5 * (f2i - f2j) * (f2i - f2j)) * rho(i, j);
        if (b > 0) {
          const CMat& src = x.sectors[b - 1];
          // arm 1: source magnetization m + 1/2, amplitude sqrt(S + m + 1)
          double g1 = std::sqrt(S + (-S + i) + 1.0);
          double h1 = std::sqrt(S + (-S + j) + 1.0);
          o(i, j) += r1 * g1 * h1 * src(i + 1, j + 1);
          // arm 2: source magnetization m - 1/2, amplitude sqrt(S - m + 1)
          double g2 = std::sqrt(S - (-S + i) + 1.0);
          double h2 = std::sqrt(S - (-S + j) + 1.0);
          o(i, j) += r2 * g2 * h2 * src(i, j);
        }
      }
    }
  }
  return out;
}

inline LossLadder evolve_loss_ladder(LossLadder x, double g1, double g2, int steps) {
  const double h = 1.0 / steps;
  auto axpy = [](LossLadder& y, double a, const LossLadder& d) {
    for (std::size_t b = 0; b < y.sectors.size(); ++b) y.sectors[b] += a * d.sectors[b];
  };
  for (int s = 0; s < steps; ++s) {
    LossLadder k1 = loss_ladder_rhs(x, g1, g2);
    LossLadder t = x;
    axpy(t, 0.5 * h, k1);
    LossLadder k2 = loss_ladder_rhs(t, g1, g2);
    t = x;
    axpy(t, 0.5 * h, k2);
    LossLadder k3 = loss_ladder_rhs(t, g1, g2);
    t = x;
    axpy(t, h, k3);
    LossLadder k4 = loss_ladder_rhs(t, g1, g2);
    axpy(x, h / 6.0, k1);
    axpy(x, h / 3.0, k2);
    axpy(x, h / 3.0, k3);
    axpy(x, h / 6.0, k4);
  }
  return x;
}

// Sector matrices rho^(S)_{m m'} summed over all multiplets of that spin,
// ordered by descending spin to match the library's sector ladder.
inline std::vector<CMat> reduce_to_sectors(const CMat& rho_full, int n_qubits) {
  std::vector<CMat> sectors;
  std::vector<double> spins;
  for (double S = 0.5 * n_qubits; S > -0.25; S -= 1.0) {
    spins.push_back(S);
    int dim = static_cast<int>(std::lround(2.0 * S)) + 1;
    sectors.push_back(CMat::Zero(dim, dim));
  }
  for (const auto& p : coupled_multiplets(n_qubits)) {
    int b = static_cast<int>(std::lround(spins.front() - p.S));
    int dim = static_cast<int>(p.states.size());
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        sectors[b](i, j) +=
            p.states[i].cast<Complex>().dot(rho_full * p.states[j].cast<Complex>());
  }
  return sectors;
}

}  // namespace oracle
