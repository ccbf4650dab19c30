#pragma once

// Symmetric N-qubit probe states restricted to the maximal-spin multiplet
// S = N/2.  Amplitudes are stored over the magnetic quantum number m with the
// convention
//
//   index i  <->  m = i - N/2,   i = 0 ... N,
//
// so index 0 is m = -N/2 and index N is m = +N/2.  m is half-integer for odd
// N; all routines carry m as a double.

#include <cmath>
#include <string>
#include <vector>

#include "phaselim/common.hpp"
#include "phaselim/wigner.hpp"

namespace phaselim {

struct ProbeState {
  int n_qubits = 0;  // N
  CVec amplitudes;   // length N+1, unit norm

  double spin() const { return 0.5 * n_qubits; }
  int dim() const { return n_qubits + 1; }
  double m_of(int index) const { return index - 0.5 * n_qubits; }
};

enum class ProbeFamily {
  noon,
  cosine,
  phase_uniform,
  holland_burnett,
  spin_coherent,
  trident,
  quad,
  gaussian,
  custom,
};

// Family plus the parameters some members need.  p and q are weights in
// [0, 1]; K is the Gaussian width parameter exp(-K x^2 / 4) with x = m/N.
struct FamilySpec {
  ProbeFamily kind = ProbeFamily::cosine;
  double p = 0.5;
  double q = 0.5;
  double K = 16.0;
  CVec custom_amplitudes;
};

inline ProbeState normalized_probe(int N, CVec amps) {
  double norm = std::sqrt(amps.squaredNorm());
  if (!(norm > 1e-14)) throw std::invalid_argument("probe amplitudes have (near) zero norm");
  amps /= norm;
  return ProbeState{N, std::move(amps)};
}

inline ProbeState make_probe(const FamilySpec& spec, int N) {
  detail::require(N >= 1, "make_probe: N must be >= 1");
  const int dim = N + 1;
  const double S = 0.5 * N;
  CVec amps = CVec::Zero(dim);

  switch (spec.kind) {
    case ProbeFamily::noon:
      amps(0) = amps(N) = 1.0 / std::sqrt(2.0);
      break;
    case ProbeFamily::cosine: {
      // psi_m = sqrt(2/(N+1)) cos(pi m / (N+1)); this is the half-period
      // cosine window whose endpoints stay strictly nonzero.
      double norm = std::sqrt(2.0 / (N + 1));
      for (int i = 0; i < dim; ++i) amps(i) = norm * std::cos(pi * (i - S) / (N + 1));
      break;
    }
    case ProbeFamily::phase_uniform:
      amps.setConstant(1.0 / std::sqrt(static_cast<double>(dim)));
      break;
    case ProbeFamily::holland_burnett:
      if (N % 2 != 0)
        throw std::domain_error("holland_burnett probe requires even N (mp = 0 needs integer spin)");
      for (int i = 0; i < dim; ++i) amps(i) = wigner_small_d(S, i - S, 0.0, pi / 2.0);
      break;
    case ProbeFamily::spin_coherent:
      for (int i = 0; i < dim; ++i) amps(i) = wigner_small_d(S, i - S, S, pi / 2.0);
      break;
    case ProbeFamily::trident: {
      detail::require(spec.p >= 0.0 && spec.p <= 1.0, "trident: p must lie in [0, 1]");
      if (N % 2 != 0) throw std::domain_error("trident probe requires even N (needs an m = 0 slot)");
      amps(0) = amps(N) = std::sqrt(spec.p) / std::sqrt(2.0);
      amps(N / 2) = std::sqrt(1.0 - spec.p);
      break;
    }
    case ProbeFamily::quad: {
      detail::require(spec.p >= 0.0 && spec.p <= 1.0, "quad: p must lie in [0, 1]");
      detail::require(spec.q >= 0.0 && spec.q <= 1.0, "quad: q must lie in [0, 1]");
      if (N % 2 != 0) throw std::domain_error("quad probe requires even N");
      int inner = static_cast<int>(std::lround(spec.q * (N / 2)));
      if (inner == N / 2) inner = N / 2 - 1;  // keep the four slots distinct
      if (inner < 0) inner = 0;
      amps(0) = amps(N) = std::sqrt(spec.p) / std::sqrt(2.0);
      amps(N / 2 - inner) += std::sqrt(1.0 - spec.p) / std::sqrt(2.0);
      amps(N / 2 + inner) += std::sqrt(1.0 - spec.p) / std::sqrt(2.0);
      break;
    }
    case ProbeFamily::gaussian: {
      detail::require(spec.K > 0.0, "gaussian: K must be positive");
      for (int i = 0; i < dim; ++i) {
        double x = (i - S) / N;
        amps(i) = std::exp(-spec.K * x * x / 4.0);
      }
      break;
    }
    case ProbeFamily::custom:
      detail::require(spec.custom_amplitudes.size() == dim,
                      "custom probe needs exactly N+1 amplitudes");
      amps = spec.custom_amplitudes;
      break;
  }
  return normalized_probe(N, std::move(amps));
}

inline ProbeState make_probe(ProbeFamily family, int N) { return make_probe(FamilySpec{family}, N); }

inline ProbeState make_custom_probe(int N, const CVec& amplitudes) {
  FamilySpec spec;
  spec.kind = ProbeFamily::custom;
  spec.custom_amplitudes = amplitudes;
  return make_probe(spec, N);
}

// Variance of S^z in the probe, <m^2> - <m>^2.  Weights are renormalized by
// their own sum so that states built from exactly equal amplitudes (e.g. the
// two-component N00N state) give exact integer moments.
inline double var_sz(const ProbeState& psi) {
  double total = 0.0;
  for (int i = 0; i < psi.dim(); ++i) total += std::norm(psi.amplitudes(i));
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < psi.dim(); ++i) {
    double w = std::norm(psi.amplitudes(i)) / total;
    double m = psi.m_of(i);
    m1 += w * m;
    m2 += w * m * m;
  }
  return m2 - m1 * m1;
}

inline const char* family_name(ProbeFamily f) {
  switch (f) {
    case ProbeFamily::noon: return "noon";
    case ProbeFamily::cosine: return "cosine";
    case ProbeFamily::phase_uniform: return "phase_uniform";
    case ProbeFamily::holland_burnett: return "holland_burnett";
    case ProbeFamily::spin_coherent: return "spin_coherent";
    case ProbeFamily::trident: return "trident";
    case ProbeFamily::quad: return "quad";
    case ProbeFamily::gaussian: return "gaussian";
    case ProbeFamily::custom: return "custom";
  }
  return "unknown";
}

// Parses "name" or "name:param[:param]" as used by the command line tool,
// e.g. "trident:0.8", "quad:0.7:0.4", "gaussian:64".
inline FamilySpec parse_family(const std::string& text) {
  FamilySpec spec;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  const std::string& name = parts[0];
  if (name == "noon") spec.kind = ProbeFamily::noon;
  else if (name == "cosine") spec.kind = ProbeFamily::cosine;
  else if (name == "phase_uniform") spec.kind = ProbeFamily::phase_uniform;
  else if (name == "holland_burnett") spec.kind = ProbeFamily::holland_burnett;
  else if (name == "spin_coherent") spec.kind = ProbeFamily::spin_coherent;
  else if (name == "trident") spec.kind = ProbeFamily::trident;
  else if (name == "quad") spec.kind = ProbeFamily::quad;
  else if (name == "gaussian") spec.kind = ProbeFamily::gaussian;
  else throw std::invalid_argument("unknown probe family: " + name);
  try {
    if (parts.size() > 1 && !parts[1].empty()) {
      double v = std::stod(parts[1]);
      if (spec.kind == ProbeFamily::gaussian) spec.K = v;
      else spec.p = v;
    }
    if (parts.size() > 2 && !parts[2].empty()) spec.q = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad probe family parameter in: " + text);
  }
  return spec;
}

}  // namespace phaselim
