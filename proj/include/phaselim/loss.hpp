#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "phaselim/channels.hpp"
#include "phaselim/common.hpp"
#include "phaselim/density.hpp"
#include "phaselim/probe.hpp"

// Photon loss in the two interferometer arms.  A probe with N photons and
// amplitude psi_m over m = (n1 - n2)/2 splits into branches labeled by how
// many photons each arm lost; the environment keeps that record, so branches
// add incoherently.  Branches that end up with the same number of detected
// photons live in the same reduced Fock space and must be summed into one
// density matrix before any Fisher information is computed.  Treating them as
// separate blocks would silently pretend the loss record was available to the
// measurement, which overstates the achievable precision; the summed sectors
// carry the loss-induced dephasing that actually limits it.

namespace phaselim {

// One Kraus branch of the two-arm loss channel, as a linear map from input
// amplitudes (index = photons in arm 1) to the surviving Fock space.
struct LossBranchMap {
  int l1 = 0;
  int l2 = 0;
  int n_detected = 0;
  Mat K;  // (n_detected + 1) x (N + 1)
};

inline std::vector<LossBranchMap> loss_branch_maps(int n_photons, double gamma1,
                                                   double gamma2) {
  detail::require_nonneg(gamma1, "arm-1 loss exponent");
  detail::require_nonneg(gamma2, "arm-2 loss exponent");
  const int N = n_photons;
  const double eta1 = std::exp(-gamma1);
  const double eta2 = std::exp(-gamma2);
  std::vector<LossBranchMap> maps;
  for (int l1 = 0; l1 <= N; ++l1) {
    if (l1 > 0 && gamma1 == 0.0) break;
    for (int l2 = 0; l2 + l1 <= N; ++l2) {
      if (l2 > 0 && gamma2 == 0.0) break;
      LossBranchMap map;
      map.l1 = l1;
      map.l2 = l2;
      map.n_detected = N - l1 - l2;
      map.K = Mat::Zero(map.n_detected + 1, N + 1);
      bool any = false;
      for (int n1 = l1; n1 <= N - l2; ++n1) {
        int n2 = N - n1;
        double lw = log_choose(n1, l1) + log_choose(n2, l2);
        if (n1 - l1 > 0) lw += (n1 - l1) * std::log(eta1);
        if (l1 > 0) lw += l1 * std::log1p(-eta1);
        if (n2 - l2 > 0) lw += (n2 - l2) * std::log(eta2);
        if (l2 > 0) lw += l2 * std::log1p(-eta2);
        double c = std::exp(0.5 * lw);
        map.K(n1 - l1, n1) = c;
        any = any || c > 0.0;
      }
      if (any) maps.push_back(std::move(map));
    }
  }
  return maps;
}

// Per-branch output: one rank-one block per surviving (l1, l2) record.
inline BlockedDensityMatrix apply_two_mode_loss(const ProbeState& probe, double gamma1,
                                                double gamma2) {
  BlockedDensityMatrix out;
  out.n_qubits = probe.n_qubits;
  for (const auto& map : loss_branch_maps(probe.n_qubits, gamma1, gamma2)) {
    CVec v = map.K * probe.amplitudes;
    if (v.squaredNorm() < 1e-300) continue;
    Block blk;
    blk.label.kind = BlockLabel::Kind::loss_branch;
    blk.label.spin = 0.5 * map.n_detected;
    blk.label.l1 = map.l1;
    blk.label.l2 = map.l2;
    blk.weight = 1.0;
    blk.rho = v * v.adjoint();
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

// Sum branches over equal detected photon number.  Output blocks are ordered
// by descending sector size and carry their probability in the trace.
inline BlockedDensityMatrix merge_loss_sectors(const BlockedDensityMatrix& in) {
  std::map<int, CMat, std::greater<int>> sectors;
  for (const auto& blk : in.blocks) {
    detail::require(blk.label.kind == BlockLabel::Kind::loss_branch,
                    "can only merge loss branches");
    int nd = static_cast<int>(std::lround(2.0 * blk.label.spin));
    auto it = sectors.find(nd);
    if (it == sectors.end())
      sectors.emplace(nd, CMat(blk.weight * blk.rho));
    else
      it->second += blk.weight * blk.rho;
  }
  BlockedDensityMatrix out;
  out.n_qubits = in.n_qubits;
  for (auto& [nd, rho] : sectors) {
    Block blk;
    blk.label.kind = BlockLabel::Kind::loss_sector;
    blk.label.spin = 0.5 * nd;
    blk.label.l1 = -1;
    blk.label.l2 = -1;
    blk.weight = 1.0;
    blk.rho = std::move(rho);
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

// Loss followed by collective dephasing (the two commute exactly, since every
// branch shifts m and m' together and the dephasing kernel only sees m - m').
inline BlockedDensityMatrix two_mode_loss_with_dephasing(const ProbeState& probe,
                                                         double gamma1, double gamma2,
                                                         double gamma0) {
  return collective_dephase(merge_loss_sectors(apply_two_mode_loss(probe, gamma1, gamma2)),
                            gamma0);
}

}  // namespace phaselim
