#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phaselim/channels.hpp"
#include "phaselim/common.hpp"
#include "phaselim/density.hpp"
#include "phaselim/fisher.hpp"
#include "phaselim/individual.hpp"
#include "phaselim/loss.hpp"
#include "phaselim/probe.hpp"

// Direct maximization of the QFI over probe amplitudes: projected gradient
// ascent on the unit sphere of real amplitudes with backtracking line search
// and a deterministic multi-start schedule.  Gradients come either from the
// adjoint of the channel applied to the QFI derivative matrix (fast path) or
// from central finite differences; the two are pinned against each other in
// the test suite.

namespace phaselim {

enum class ChannelKind { none, collective_dephasing, collective, individual, loss };

struct ChannelSpec {
  ChannelKind kind = ChannelKind::none;
  double gamma0 = 0.0;        // collective dephasing exponent
  double gamma_minus = 0.0;   // collective relaxation exponent
  double gamma_plus = 0.0;    // collective excitation exponent
  double igamma0 = 0.0;       // per-qubit dephasing exponent
  double igamma_minus = 0.0;  // per-qubit relaxation exponent
  double igamma_plus = 0.0;   // per-qubit excitation exponent
  double loss1 = 0.0;         // photon-loss exponent, arm 1
  double loss2 = 0.0;         // photon-loss exponent, arm 2
};

inline ChannelSpec dephasing_channel(double gamma0) {
  ChannelSpec s;
  s.kind = ChannelKind::collective_dephasing;
  s.gamma0 = gamma0;
  return s;
}

inline ChannelSpec collective_channel(double gamma0, double gamma_minus, double gamma_plus) {
  ChannelSpec s;
  s.kind = ChannelKind::collective;
  s.gamma0 = gamma0;
  s.gamma_minus = gamma_minus;
  s.gamma_plus = gamma_plus;
  return s;
}

inline ChannelSpec individual_channel(double igamma0, double igamma_minus, double igamma_plus,
                                      double gamma0 = 0.0) {
  ChannelSpec s;
  s.kind = ChannelKind::individual;
  s.igamma0 = igamma0;
  s.igamma_minus = igamma_minus;
  s.igamma_plus = igamma_plus;
  s.gamma0 = gamma0;
  return s;
}

inline ChannelSpec loss_channel(double loss1, double loss2, double gamma0 = 0.0) {
  ChannelSpec s;
  s.kind = ChannelKind::loss;
  s.loss1 = loss1;
  s.loss2 = loss2;
  s.gamma0 = gamma0;
  return s;
}

inline void validate_channel(const ChannelSpec& s) {
  detail::require_nonneg(s.gamma0, "gamma0");
  detail::require_nonneg(s.gamma_minus, "gamma_minus");
  detail::require_nonneg(s.gamma_plus, "gamma_plus");
  detail::require_nonneg(s.igamma0, "igamma0");
  detail::require_nonneg(s.igamma_minus, "igamma_minus");
  detail::require_nonneg(s.igamma_plus, "igamma_plus");
  detail::require_nonneg(s.loss1, "loss1");
  detail::require_nonneg(s.loss2, "loss2");
  bool coll = s.gamma_minus > 0.0 || s.gamma_plus > 0.0;
  bool indiv = s.igamma0 > 0.0 || s.igamma_minus > 0.0 || s.igamma_plus > 0.0;
  bool lossy = s.loss1 > 0.0 || s.loss2 > 0.0;
  switch (s.kind) {
    case ChannelKind::none:
      detail::require(s.gamma0 == 0.0 && !coll && !indiv && !lossy,
                      "channel 'none' takes no noise parameters");
      break;
    case ChannelKind::collective_dephasing:
      detail::require(!coll && !indiv && !lossy,
                      "collective dephasing takes only gamma0");
      break;
    case ChannelKind::collective:
      detail::require(!indiv && !lossy, "collective channel: no individual or loss rates");
      break;
    case ChannelKind::individual:
      detail::require(!coll && !lossy,
                      "individual channel: collective relax/excite and loss unsupported");
      break;
    case ChannelKind::loss:
      detail::require(!coll && !indiv, "loss channel: only loss1/loss2 plus gamma0");
      break;
  }
}

// Channels whose action commutes with amplitude reversal m -> -m; for those
// the optimum can be searched in the mirror-symmetric subspace.
inline bool mirror_symmetric_channel(const ChannelSpec& s) {
  switch (s.kind) {
    case ChannelKind::none:
    case ChannelKind::collective_dephasing:
      return true;
    case ChannelKind::collective:
      return s.gamma_minus == s.gamma_plus;
    case ChannelKind::individual:
      return s.igamma_minus == s.igamma_plus;
    case ChannelKind::loss:
      return s.loss1 == s.loss2;
  }
  return false;
}

// One-shot channel application for CLI and cross-module checks.
inline BlockedDensityMatrix apply_channel(const ChannelSpec& spec, const ProbeState& probe) {
  validate_channel(spec);
  switch (spec.kind) {
    case ChannelKind::none:
      return to_blocked(to_density(probe));
    case ChannelKind::collective_dephasing:
      return to_blocked(collective_dephase(to_density(probe), spec.gamma0));
    case ChannelKind::collective: {
      double largest = std::max({spec.gamma0, spec.gamma_minus, spec.gamma_plus});
      if (largest == 0.0) return to_blocked(to_density(probe));
      return to_blocked(evolve_collective(to_density(probe), spec.gamma0, spec.gamma_minus,
                                          spec.gamma_plus, default_steps(largest)));
    }
    case ChannelKind::individual: {
      IndividualPropagator prop(probe.n_qubits, spec.igamma0, spec.igamma_minus,
                                        spec.igamma_plus, spec.gamma0);
      return prop.apply_pure(probe.amplitudes);
    }
    case ChannelKind::loss:
      return two_mode_loss_with_dephasing(probe, spec.loss1, spec.loss2, spec.gamma0);
  }
  throw std::logic_error("unreachable channel kind");
}

// ---------------------------------------------------------------------------
// Objective: F as a function of real unit amplitudes, with per-kind
// precomputation so repeated evaluations inside the ascent are cheap.

class ProbeObjective {
 public:
  ProbeObjective(const ChannelSpec& spec, int n_qubits) : spec_(spec), n_(n_qubits) {
    validate_channel(spec);
    detail::require(n_qubits >= 1 && n_qubits <= 200, "optimize_probe: need 1 <= N <= 200");
    const int dim = n_ + 1;
    switch (spec_.kind) {
      case ChannelKind::none:
      case ChannelKind::collective_dephasing:
        decay_ = dephasing_factors(dim, spec_.gamma0);
        break;
      case ChannelKind::collective:
        steps_ = default_steps(std::max({spec_.gamma0, spec_.gamma_minus, spec_.gamma_plus}));
        break;
      case ChannelKind::individual:
        propagator_ = std::make_unique<IndividualPropagator>(
            n_, spec_.igamma0, spec_.igamma_minus, spec_.igamma_plus, spec_.gamma0);
        break;
      case ChannelKind::loss: {
        auto maps = loss_branch_maps(n_, spec_.loss1, spec_.loss2);
        // group branches by detected photon number, largest sector first
        std::vector<int> order(maps.size());
        for (std::size_t i = 0; i < maps.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return maps[a].n_detected > maps[b].n_detected;
        });
        for (int idx : order) {
          if (sectors_.empty() || sectors_.back().n_detected != maps[idx].n_detected) {
            LossSector s;
            s.n_detected = maps[idx].n_detected;
            s.decay = dephasing_factors(maps[idx].n_detected + 1, spec_.gamma0);
            sectors_.push_back(std::move(s));
          }
          sectors_.back().kraus.push_back(maps[idx].K);
        }
        break;
      }
    }
  }

  int n_qubits() const { return n_; }
  const ChannelSpec& spec() const { return spec_; }

  bool has_analytic_gradient() const { return spec_.kind != ChannelKind::collective; }

  double value(const Vec& psi) const {
    switch (spec_.kind) {
      case ChannelKind::none:
      case ChannelKind::collective_dephasing:
        return detail::qfi_real_block(decay_.cwiseProduct(psi * psi.transpose()));
      case ChannelKind::collective: {
        SymmetricDensityMatrix in;
        in.n_qubits = n_;
        in.rho = (psi * psi.transpose()).cast<Complex>();
        return qfi(evolve_collective(in, spec_.gamma0, spec_.gamma_minus, spec_.gamma_plus,
                                     steps_));
      }
      case ChannelKind::individual:
        return qfi(propagator_->apply_pure(psi.cast<Complex>()));
      case ChannelKind::loss: {
        double F = 0.0;
        for (const auto& s : sectors_) {
          Mat rho = sector_state(s, psi);
          if (rho.trace() > 1e-300) F += detail::qfi_real_block(rho);
        }
        return F;
      }
    }
    throw std::logic_error("unreachable channel kind");
  }

  // Ambient-space gradient of value() through the channel adjoint; callers
  // project onto the sphere tangent.  Only the tangential component is
  // meaningful.
  Vec gradient_analytic(const Vec& psi) const {
    switch (spec_.kind) {
      case ChannelKind::none:
      case ChannelKind::collective_dephasing: {
        Mat rho = decay_.cwiseProduct(psi * psi.transpose());
        Mat M = detail::qfi_matrix_real(rho);
        return 2.0 * decay_.cwiseProduct(M) * psi;
      }
      case ChannelKind::individual: {
        BlockedDensityMatrix blocks = propagator_->apply_pure(psi.cast<Complex>());
        std::vector<Mat> Ms;
        Ms.reserve(blocks.blocks.size());
        for (const auto& blk : blocks.blocks) {
          Mat rho = blk.rho.real();
          // Sectors with negligible population are rounding-noise dominated
          // and contribute below tolerance; their derivative matrix is not
          // reliable, so drop them instead of amplifying noise.
          if (rho.trace() > 1e-14)
            Ms.push_back(detail::qfi_matrix_real(rho));
          else
            Ms.push_back(Mat::Zero(rho.rows(), rho.cols()));
        }
        return 2.0 * propagator_->adjoint_real(Ms) * psi;
      }
      case ChannelKind::loss: {
        Vec g = Vec::Zero(n_ + 1);
        for (const auto& s : sectors_) {
          Mat rho = sector_state(s, psi);
          if (rho.trace() <= 1e-300) continue;
          Mat W = s.decay.cwiseProduct(detail::qfi_matrix_real(rho));
          for (const auto& K : s.kraus) g += 2.0 * K.transpose() * (W * (K * psi));
        }
        return g;
      }
      case ChannelKind::collective:
        throw std::invalid_argument(
            "collective relax/excite channel has no analytic gradient; use finite differences");
    }
    throw std::logic_error("unreachable channel kind");
  }

  Vec gradient_fd(const Vec& psi, double step) const {
    const int dim = n_ + 1;
    Vec g(dim);
    for (int i = 0; i < dim; ++i) {
      Vec hi = psi;
      Vec lo = psi;
      hi(i) += step;
      lo(i) -= step;
      g(i) = (value(hi.normalized()) - value(lo.normalized())) / (2.0 * step);
    }
    return g;
  }

 private:
  struct LossSector {
    int n_detected = 0;
    std::vector<Mat> kraus;
    Mat decay;
  };

  static Mat dephasing_factors(int dim, double gamma0) {
    Mat D(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        D(i, j) = std::exp(-0.5 * gamma0 * static_cast<double>(i - j) * (i - j));
    return D;
  }

  Mat sector_state(const LossSector& s, const Vec& psi) const {
    Mat rho = Mat::Zero(s.n_detected + 1, s.n_detected + 1);
    for (const auto& K : s.kraus) {
      Vec v = K * psi;
      rho.noalias() += v * v.transpose();
    }
    return s.decay.cwiseProduct(rho);
  }

  ChannelSpec spec_;
  int n_ = 0;
  Mat decay_;                                               // dephasing kinds
  int steps_ = 0;                                           // collective kind
  std::unique_ptr<IndividualPropagator> propagator_;  // individual kind
  std::vector<LossSector> sectors_;                         // loss kind
};

// ---------------------------------------------------------------------------
// Ascent driver.

enum class GradientMode { analytic, finite_difference };

struct OptimizeOptions {
  int restarts = 8;            // noon, cosine, spin_coherent, then random fills
  double tolerance = 1e-10;    // relative F progress considered converged
  int max_iterations = 2000;
  double fd_step = 1e-5;
  GradientMode gradient = GradientMode::analytic;
  bool restrict_mirror = false;  // confine the ascent to psi_m = psi_{-m}
  unsigned seed = 20240901u;
  std::vector<double>* trace = nullptr;  // optional per-iteration F record
};

struct OptimizationResult {
  ProbeState probe;
  double qfi = 0.0;
  int iterations = 0;
  bool converged = false;
  int restarts_used = 0;
};

namespace detail {

inline Vec mirror_average(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 * (v(i) + v(n - 1 - i));
  return w;
}

struct AscentOutcome {
  Vec psi;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline AscentOutcome ascend(const ProbeObjective& obj, Vec psi, const OptimizeOptions& opts,
                            bool mirror) {
  const bool use_analytic =
      opts.gradient == GradientMode::analytic && obj.has_analytic_gradient();
  if (mirror) psi = mirror_average(psi);
  psi.normalize();
  AscentOutcome out;
  out.f = obj.value(psi);
  if (opts.trace != nullptr) opts.trace->push_back(out.f);
  double eta = 0.25;
  int stall = 0;
  bool stationary = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Vec g = use_analytic ? obj.gradient_analytic(psi) : obj.gradient_fd(psi, opts.fd_step);
    if (mirror) g = mirror_average(g);
    Vec gt = g - g.dot(psi) * psi;
    double gn2 = gt.squaredNorm();
    if (std::sqrt(gn2) <= 1e-13 * std::max(1.0, std::abs(out.f))) {
      stationary = true;
      break;
    }
    double step = std::min(4.0, 2.0 * eta);
    bool accepted = false;
    double f_new = out.f;
    Vec cand;
    while (step > 1e-14) {
      cand = psi + step * gt;
      if (mirror) cand = mirror_average(cand);
      cand.normalize();
      double fc = obj.value(cand);
      if (fc >= out.f + 1e-4 * step * gn2) {
        accepted = true;
        f_new = fc;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      stationary = true;
      break;
    }
    double rel = (f_new - out.f) / std::max(1.0, std::abs(f_new));
    psi = cand;
    out.f = f_new;
    eta = step;
    if (opts.trace != nullptr) opts.trace->push_back(out.f);
    if (rel < opts.tolerance) {
      if (++stall >= 2) {
        stationary = true;
        ++it;
        break;
      }
    } else {
      stall = 0;
    }
  }
  out.iterations = it;
  out.converged = stationary;
  out.psi = std::move(psi);
  return out;
}

inline std::vector<Vec> start_points(int n_qubits, const OptimizeOptions& opts) {
  std::vector<Vec> starts;
  const ProbeFamily named[] = {ProbeFamily::noon, ProbeFamily::cosine,
                               ProbeFamily::spin_coherent};
  int total = std::max(1, opts.restarts);
  for (int i = 0; i < total; ++i) {
    if (i < 3) {
      starts.push_back(make_probe(named[i], n_qubits).amplitudes.real());
    } else {
      std::mt19937_64 rng(opts.seed + 0x9e3779b9u * static_cast<unsigned>(i));
      std::normal_distribution<double> gauss;
      Vec v(n_qubits + 1);
      for (int k = 0; k <= n_qubits; ++k) v(k) = gauss(rng);
      starts.push_back(v.normalized());
    }
  }
  return starts;
}

// Fix the overall sign so identical optima serialize identically.
inline void canonical_sign(Vec& psi) {
  int imax = 0;
  for (int i = 1; i < psi.size(); ++i)
    if (std::abs(psi(i)) > std::abs(psi(imax))) imax = i;
  if (psi(imax) < 0.0) psi = -psi;
}

}  // namespace detail

inline OptimizationResult optimize_probe(const ChannelSpec& spec, int n_qubits,
                                         const OptimizeOptions& opts = {},
                                         const Vec* warm_start = nullptr) {
  ProbeObjective obj(spec, n_qubits);
  bool mirror = opts.restrict_mirror;
  if (mirror)
    detail::require(mirror_symmetric_channel(spec),
                    "mirror restriction requires a mirror-symmetric channel");

  std::vector<Vec> starts;
  if (warm_start != nullptr) {
    detail::require(warm_start->size() == n_qubits + 1, "warm start has wrong length");
    starts.push_back(*warm_start);
  }
  for (auto& s : detail::start_points(n_qubits, opts)) starts.push_back(std::move(s));

  OptimizationResult best;
  bool have = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    detail::AscentOutcome run = detail::ascend(obj, starts[i], opts, mirror);
    if (!have || run.f > best.qfi) {
      have = true;
      best.qfi = run.f;
      best.iterations = run.iterations;
      best.converged = run.converged;
      detail::canonical_sign(run.psi);
      best.probe = ProbeState{n_qubits, run.psi.cast<Complex>()};
    }
  }
  best.restarts_used = static_cast<int>(starts.size());
  return best;
}

// ---------------------------------------------------------------------------
// Bifurcation ("menorah") scan over dephasing strength.

struct MenorahScan {
  Vec gamma0_grid;
  Mat amplitudes;                      // row per grid point, |psi_m| columns
  std::vector<double> qfi;
  std::vector<int> component_counts;
  std::vector<double> bifurcations;    // grid values where the count increments
  std::vector<char> converged;
};

// Number of separated amplitude lobes: local maxima of |psi_m| above the
// threshold, with plateaus counted once.
inline int component_count(const Vec& abs_amp, double threshold = 1e-3) {
  const int n = static_cast<int>(abs_amp.size());
  int count = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && abs_amp(j + 1) == abs_amp(i)) ++j;
    bool left_ok = (i == 0) || abs_amp(i - 1) < abs_amp(i);
    bool right_ok = (j == n - 1) || abs_amp(j + 1) < abs_amp(i);
    if (left_ok && right_ok && abs_amp(i) > threshold) ++count;
    i = j + 1;
  }
  return count;
}

inline MenorahScan menorah_scan(int n_qubits, const Vec& gamma0_grid,
                                OptimizeOptions opts = {}) {
  detail::require(gamma0_grid.size() >= 1, "menorah_scan: need a non-empty grid");
  for (int i = 1; i < gamma0_grid.size(); ++i)
    detail::require(gamma0_grid(i) > gamma0_grid(i - 1),
                    "menorah_scan: grid must be sorted ascending");
  opts.trace = nullptr;
  MenorahScan scan;
  scan.gamma0_grid = gamma0_grid;
  scan.amplitudes.resize(gamma0_grid.size(), n_qubits + 1);
  Vec warm;
  int prev_count = 0;
  for (int row = 0; row < gamma0_grid.size(); ++row) {
    OptimizationResult res =
        optimize_probe(dephasing_channel(gamma0_grid(row)), n_qubits, opts,
                       row == 0 ? nullptr : &warm);
    warm = res.probe.amplitudes.real();
    Vec abs_amp = res.probe.amplitudes.cwiseAbs();
    scan.amplitudes.row(row) = abs_amp.transpose();
    scan.qfi.push_back(res.qfi);
    scan.converged.push_back(res.converged ? 1 : 0);
    int count = component_count(abs_amp);
    scan.component_counts.push_back(count);
    if (row > 0 && count > prev_count) scan.bifurcations.push_back(gamma0_grid(row));
    prev_count = count;
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Family comparison curves: 1/F and its quantum part for each probe family,
// plus the optimized-probe boundary.

struct FamilyErrorRow {
  std::string label;
  double gamma0 = 0.0;
  double inverse_qfi = 0.0;
  double quantum_component = 0.0;  // N^2 (1/F - Gamma0)
};

inline std::vector<FamilyErrorRow> family_error_curves(const std::vector<ProbeFamily>& families,
                                                       int n_qubits, const Vec& gamma0_grid,
                                                       bool include_optimized = true,
                                                       const OptimizeOptions& opts = {}) {
  std::vector<FamilyErrorRow> rows;
  const double nsq = static_cast<double>(n_qubits) * n_qubits;
  for (int i = 0; i < gamma0_grid.size(); ++i) {
    double g0 = gamma0_grid(i);
    for (ProbeFamily fam : families) {
      SymmetricDensityMatrix rho =
          collective_dephase(to_density(make_probe(fam, n_qubits)), g0);
      double F = qfi(rho);
      rows.push_back({family_name(fam), g0, 1.0 / F, nsq * (1.0 / F - g0)});
    }
    if (include_optimized) {
      OptimizationResult res = optimize_probe(dephasing_channel(g0), n_qubits, opts);
      rows.push_back({"optimized", g0, 1.0 / res.qfi, nsq * (1.0 / res.qfi - g0)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Critical dephasing below which k-qubit entangled clusters beat the best
// (k-1)-qubit clusters per particle.  For k = 2 the smaller cluster is a
// single qubit, whose optimum is exactly e^{-Gamma0}, so the comparison
// reduces to F_opt(2, Gamma0) = 2 e^{-Gamma0}.

inline double entanglement_threshold(int k, double tol = 1e-4,
                                     const OptimizeOptions& opts = {}) {
  detail::require(k >= 2 && k <= 4, "entanglement_threshold: k must be 2, 3, or 4");
  auto per_particle = [&](int size, double g0) {
    if (size == 1) return std::exp(-g0);
    return optimize_probe(dephasing_channel(g0), size, opts).qfi / size;
  };
  auto excess = [&](double g0) { return per_particle(k, g0) - per_particle(k - 1, g0); };
  double lo = 1e-4;
  double hi = 0.6;
  detail::require(excess(lo) > 0.0 && excess(hi) < 0.0,
                  "entanglement_threshold: bracket failed");
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace phaselim
