#pragma once

// Density matrices for symmetric spin ensembles.
//
// SymmetricDensityMatrix: a single (N+1) x (N+1) Hermitian matrix over the
// maximal-spin multiplet, same index convention as ProbeState.
//
// BlockedDensityMatrix: a direct sum of sectors, used by the permutation-
// invariant individual-noise evolution (blocks labelled by total spin S) and
// by the two-mode photon-loss channel (blocks labelled by the lost-photon
// pair (l1, l2)).  Weights are kept as an explicit factor so that
// sum_b weight_b * trace(block_b) = 1 for a physical state; the constructors
// in this library always store weight 1 and carry probability inside the
// block traces.

#include <utility>
#include <vector>

#include "phaselim/common.hpp"
#include "phaselim/probe.hpp"

namespace phaselim {

struct SymmetricDensityMatrix {
  int n_qubits = 0;
  CMat rho;  // (N+1) x (N+1)

  int dim() const { return n_qubits + 1; }
  double m_of(int index) const { return index - 0.5 * n_qubits; }
};

inline SymmetricDensityMatrix to_density(const ProbeState& psi) {
  SymmetricDensityMatrix out;
  out.n_qubits = psi.n_qubits;
  out.rho = psi.amplitudes * psi.amplitudes.adjoint();
  return out;
}

struct BlockLabel {
  enum class Kind { spin_sector, loss_branch, loss_sector };
  Kind kind = Kind::spin_sector;
  // spin_sector: S of the block; loss_branch / loss_sector: spin of the
  // reduced space, (N - l1 - l2)/2 resp. n_detected/2.
  double spin = 0.0;
  int l1 = 0;  // photons lost from arm 1 (loss_branch only)
  int l2 = 0;  // photons lost from arm 2 (loss_branch only)
};

struct Block {
  BlockLabel label;
  double weight = 1.0;
  CMat rho;  // (2*label.spin + 1) square

  int dim() const { return static_cast<int>(rho.rows()); }
  double m_of(int index) const { return index - label.spin; }
};

struct BlockedDensityMatrix {
  int n_qubits = 0;
  std::vector<Block> blocks;

  double weighted_trace() const {
    double t = 0.0;
    for (const auto& b : blocks) t += b.weight * b.rho.trace().real();
    return t;
  }
};

inline BlockedDensityMatrix to_blocked(const SymmetricDensityMatrix& rho) {
  BlockedDensityMatrix out;
  out.n_qubits = rho.n_qubits;
  Block b;
  b.label.kind = BlockLabel::Kind::spin_sector;
  b.label.spin = 0.5 * rho.n_qubits;
  b.weight = 1.0;
  b.rho = rho.rho;
  out.blocks.push_back(std::move(b));
  return out;
}

// Number of copies of the spin-S irreducible multiplet in (C^2)^{tensor N}:
// |Pi_S| = N! (2S+1) / ((N/2+S+1)! (N/2-S)!).  Evaluated in log space and
// rounded; the result is an exact integer for N up to at least 400.
inline double spin_multiplicity(int N, double S) {
  detail::require(N >= 1, "spin_multiplicity: N must be >= 1");
  if (!detail::is_half_integer(S) || S < -1e-12)
    throw std::domain_error("spin_multiplicity: S must be a non-negative (half-)integer");
  long long twoS = std::llround(2.0 * S);
  if ((N - twoS) % 2 != 0 || twoS > N)
    throw std::domain_error("spin_multiplicity: S must run over N/2, N/2-1, ...");
  double log_m;
  if (N % 2 == 0) {
    log_m = log_factorial(N) + std::log(twoS + 1.0) -
            log_factorial(N / 2 + twoS / 2 + 1) - log_factorial(N / 2 - twoS / 2);
  } else {
    // Half-integer S: (N/2 +- S) are still integers, evaluate via lgamma.
    double Sd = 0.5 * twoS;
    log_m = log_factorial(N) + std::log(twoS + 1.0) -
            std::lgamma(0.5 * N + Sd + 2.0) - std::lgamma(0.5 * N - Sd + 1.0);
  }
  return std::round(std::exp(log_m));
}

}  // namespace phaselim
