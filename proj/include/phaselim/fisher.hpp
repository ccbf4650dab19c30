#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "phaselim/common.hpp"
#include "phaselim/density.hpp"
#include "phaselim/probe.hpp"

// Quantum Fisher information for phase shifts generated by S^z.  Everything
// funnels through the eigendecomposition form
//
//   F = sum_{ij} 2 |<i| d rho |j>|^2 / (p_i + p_j),   d rho = -i [S^z, rho],
//
// with pairs below a relative spectral cutoff dropped.  The commutator only
// involves index differences, so the generator offset never matters and the
// same code serves spin sectors and photon-loss sectors alike.  Block
// decompositions add: the matrices carry their own probability in the trace,
// and F is 1-homogeneous in rho.

namespace phaselim {

inline constexpr double qfi_spectral_cutoff = 1e-12;

namespace detail {

inline double qfi_hermitian_block(const CMat& rho) {
  const int n = static_cast<int>(rho.rows());
  if (n < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  const Vec& p = es.eigenvalues();
  double pmax = p.maxCoeff();
  if (!(pmax > 0.0)) return 0.0;
  const double eps = qfi_spectral_cutoff * pmax;

  CMat K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = static_cast<double>(i - j) * rho(i, j);
  CMat A = es.eigenvectors().adjoint() * K * es.eigenvectors();

  double F = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double denom = p(i) + p(j);
      if (denom <= eps) continue;
      F += 2.0 * std::norm(A(i, j)) / denom;
    }
  return F;
}

inline double qfi_real_block(const Mat& rho) {
  const int n = static_cast<int>(rho.rows());
  if (n < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  const Vec& p = es.eigenvalues();
  double pmax = p.maxCoeff();
  if (!(pmax > 0.0)) return 0.0;
  const double eps = qfi_spectral_cutoff * pmax;

  Mat K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = static_cast<double>(i - j) * rho(i, j);
  Mat A = es.eigenvectors().transpose() * K * es.eigenvectors();

  double F = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double denom = p(i) + p(j);
      if (denom <= eps) continue;
      F += 2.0 * A(i, j) * A(i, j) / denom;
    }
  return F;
}

inline bool effectively_real(const CMat& rho) {
  double scale = rho.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  double imax = rho.imag().cwiseAbs().maxCoeff();
  return imax <= 1e-13 * scale;
}

inline void require_hermitian(const CMat& rho) {
  double scale = std::max(1e-30, rho.cwiseAbs().maxCoeff());
  double dev = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  require(dev <= 1e-10 * scale, "qfi: density matrix is not Hermitian");
}

}  // namespace detail

inline double qfi_block(const CMat& rho) {
  detail::require_hermitian(rho);
  if (detail::effectively_real(rho)) return detail::qfi_real_block(rho.real());
  return detail::qfi_hermitian_block(rho);
}

inline double qfi(const SymmetricDensityMatrix& rho) { return qfi_block(rho.rho); }

inline double qfi(const BlockedDensityMatrix& rho) {
  double F = 0.0;
  for (const auto& blk : rho.blocks) F += blk.weight * qfi_block(blk.rho);
  return F;
}

// Same computation with the per-block breakdown kept, for callers that report
// where the information lives (e.g. which loss sector still contributes).
struct FisherResult {
  double value = 0.0;
  std::vector<double> per_block;  // weighted contributions, summing to value
};

inline FisherResult qfi_report(const BlockedDensityMatrix& rho) {
  FisherResult out;
  out.per_block.reserve(rho.blocks.size());
  for (const auto& blk : rho.blocks) {
    double f = blk.weight * qfi_block(blk.rho);
    out.per_block.push_back(f);
    out.value += f;
  }
  return out;
}

// Pure probes: F = 4 Var(S^z), exact in integer arithmetic for the standard
// families.
inline double qfi_pure(const ProbeState& probe) { return 4.0 * var_sz(probe); }

// ---------------------------------------------------------------------------
// Derivative of F with respect to the density matrix, as the Hermitian M with
// dF = Tr[M d rho].  With rho = V diag(p) V^+, A = V^+ [S^z, rho] V and the
// scaled commutator L_ij = 2 A_ij / (p_i + p_j), one gets
//
//   M = V ( -2 [L, V^+ S^z V] + L^2 ) V^+.
//
// This is what probe optimization backpropagates through the channel; its
// correctness is pinned by a finite-difference property test.

namespace detail {

inline Mat qfi_matrix_real(const Mat& rho) {
  const int n = static_cast<int>(rho.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  const Vec& p = es.eigenvalues();
  const Mat& V = es.eigenvectors();
  double pmax = p.maxCoeff();
  if (!(pmax > 0.0)) return Mat::Zero(n, n);
  const double eps = qfi_spectral_cutoff * pmax;

  Mat K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = static_cast<double>(i - j) * rho(i, j);
  Mat A = V.transpose() * K * V;
  Mat L = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double denom = p(i) + p(j);
      if (i != j && denom > eps) L(i, j) = 2.0 * A(i, j) / denom;
    }
  Vec g(n);
  for (int i = 0; i < n; ++i) g(i) = static_cast<double>(i);
  Mat Gt = V.transpose() * g.asDiagonal() * V;
  Mat Mt = -2.0 * (L * Gt - Gt * L) + L * L;
  Mat M = V * Mt * V.transpose();
  return 0.5 * (M + M.transpose());
}

inline CMat qfi_matrix_hermitian(const CMat& rho) {
  const int n = static_cast<int>(rho.rows());
  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  const Vec& p = es.eigenvalues();
  const CMat& V = es.eigenvectors();
  double pmax = p.maxCoeff();
  if (!(pmax > 0.0)) return CMat::Zero(n, n);
  const double eps = qfi_spectral_cutoff * pmax;

  CMat K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = static_cast<double>(i - j) * rho(i, j);
  CMat A = V.adjoint() * K * V;
  CMat L = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double denom = p(i) + p(j);
      if (i != j && denom > eps) L(i, j) = 2.0 * A(i, j) / denom;
    }
  Vec g(n);
  for (int i = 0; i < n; ++i) g(i) = static_cast<double>(i);
  CMat Gt = V.adjoint() * g.asDiagonal().toDenseMatrix().cast<Complex>() * V;
  CMat Mt = -2.0 * (L * Gt - Gt * L) + L * L;
  CMat M = V * Mt * V.adjoint();
  return 0.5 * (M + M.adjoint().eval());
}

}  // namespace detail

inline Mat qfi_matrix_real(const Mat& rho) { return detail::qfi_matrix_real(rho); }
inline CMat qfi_matrix(const CMat& rho) { return detail::qfi_matrix_hermitian(rho); }

}  // namespace phaselim
