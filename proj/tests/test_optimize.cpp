#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "phaselim/channels.hpp"
#include "phaselim/fisher.hpp"
#include "phaselim/optimize.hpp"
#include "phaselim/probe.hpp"

using namespace phaselim;

namespace {

Vec random_unit(int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
  return v.normalized();
}

Vec tangent_part(const Vec& g, const Vec& psi) { return g - g.dot(psi) * psi; }

double family_qfi(const ChannelSpec& spec, ProbeFamily fam, int N) {
  return qfi(apply_channel(spec, make_probe(fam, N)));
}

// Ascent over complex amplitudes, parameterized by interleaved re/im parts
// on the real unit sphere.  Uses finite differences only; slow but channel
// agnostic, which is all the realness comparison needs.
double complex_optimum(const ChannelSpec& spec, int N, unsigned seed) {
  const int dim = 2 * (N + 1);
  auto value = [&](const Vec& x) {
    CVec amps(N + 1);
    for (int m = 0; m <= N; ++m) amps(m) = Complex(x(2 * m), x(2 * m + 1));
    return qfi(apply_channel(spec, ProbeState{N, amps}));
  };
  auto grad = [&](const Vec& x) {
    Vec g(dim);
    const double h = 1e-5;
    for (int i = 0; i < dim; ++i) {
      Vec hi = x, lo = x;
      hi(i) += h;
      lo(i) -= h;
      g(i) = (value(hi.normalized()) - value(lo.normalized())) / (2.0 * h);
    }
    return g;
  };
  double best = 0.0;
  for (int attempt = 0; attempt < 3; ++attempt) {
    Vec x = random_unit(dim, seed + 17u * attempt);
    double f = value(x);
    double eta = 0.25;
    for (int it = 0; it < 400; ++it) {
      Vec gt = tangent_part(grad(x), x);
      double gn2 = gt.squaredNorm();
      if (std::sqrt(gn2) < 1e-9 * std::max(1.0, f)) break;
      double step = std::min(4.0, 2.0 * eta);
      bool ok = false;
      while (step > 1e-12) {
        Vec cand = (x + step * gt).normalized();
        double fc = value(cand);
        if (fc >= f + 1e-4 * step * gn2) {
          x = cand;
          f = fc;
          eta = step;
          ok = true;
          break;
        }
        step *= 0.5;
      }
      if (!ok) break;
    }
    best = std::max(best, f);
  }
  return best;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences") {
  struct Case {
    const char* name;
    ChannelSpec spec;
    int N;
  };
  const Case cases[] = {
      {"dephasing", dephasing_channel(0.07), 9},
      {"loss", loss_channel(0.3, 0.12, 0.1), 8},
      {"individual", individual_channel(0.04, 0.03, 0.02, 0.05), 8},
  };
  for (const auto& c : cases) {
    ProbeObjective obj(c.spec, c.N);
    REQUIRE(obj.has_analytic_gradient());
    for (unsigned seed : {11u, 12u, 13u}) {
      Vec psi = random_unit(c.N + 1, seed);
      Vec ga = tangent_part(obj.gradient_analytic(psi), psi);
      Vec gf = tangent_part(obj.gradient_fd(psi, 1e-5), psi);
      INFO(c.name << " seed " << seed);
      REQUIRE((ga - gf).norm() <= 1e-6 * std::max(1.0, ga.norm()));
    }
  }
  ProbeObjective collective(collective_channel(0.02, 0.01, 0.005), 6);
  REQUIRE_FALSE(collective.has_analytic_gradient());
  REQUIRE_THROWS_AS(collective.gradient_analytic(random_unit(7, 3u)), std::invalid_argument);
  // the finite-difference path still drives the ascent for that channel
  Vec psi = random_unit(7, 4u);
  Vec g = tangent_part(collective.gradient_fd(psi, 1e-5), psi);
  REQUIRE(g.allFinite());
}

TEST_CASE("noiseless optimization reaches the Heisenberg bound") {
  for (int N : {5, 12, 30}) {
    OptimizationResult res = optimize_probe(ChannelSpec{}, N);
    REQUIRE(res.converged);
    REQUIRE_THAT(res.qfi, Catch::Matchers::WithinRel(static_cast<double>(N) * N, 1e-8));
    // the noiseless optimum is the NOON state
    Vec a = res.probe.amplitudes.cwiseAbs();
    REQUIRE(a(0) > 0.7);
    REQUIRE(a(N) > 0.7);
  }
}

TEST_CASE("two qubits at the critical dephasing match a brute-force scan") {
  const double g0 = 0.251;
  ProbeObjective obj(dephasing_channel(g0), 2);
  // exhaustive scan over the 2-sphere of amplitudes (sign is irrelevant)
  double brute = 0.0;
  const int nt = 600;
  for (int i = 0; i <= nt; ++i) {
    double th = M_PI * i / nt;
    for (int j = 0; j < 2 * nt; ++j) {
      double ph = M_PI * j / nt;
      Vec psi(3);
      psi << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
      brute = std::max(brute, obj.value(psi));
    }
  }
  OptimizationResult res = optimize_probe(dephasing_channel(g0), 2);
  REQUIRE(res.qfi >= brute - 1e-6);
  REQUIRE(res.qfi <= brute + 2e-5);  // grid resolution slack
  REQUIRE_THAT(res.qfi, Catch::Matchers::WithinAbs(2.0 * std::exp(-g0), 1e-3));
  // at the threshold the optimum is mirror symmetric with a populated center
  Vec a = res.probe.amplitudes.cwiseAbs();
  REQUIRE_THAT(a(0), Catch::Matchers::WithinAbs(a(2), 1e-6));
  REQUIRE(a(1) > 0.1);
}

TEST_CASE("entanglement thresholds reproduce the critical dephasing values") {
  REQUIRE_THAT(entanglement_threshold(2), Catch::Matchers::WithinAbs(0.251, 2e-3));
  REQUIRE_THAT(entanglement_threshold(3), Catch::Matchers::WithinAbs(0.081, 2e-3));
  REQUIRE_THAT(entanglement_threshold(4), Catch::Matchers::WithinAbs(0.041, 2e-3));
  REQUIRE_THROWS_AS(entanglement_threshold(1), std::invalid_argument);
  REQUIRE_THROWS_AS(entanglement_threshold(5), std::invalid_argument);
}

TEST_CASE("optimized probes dominate every family") {
  const int N = 12;
  const ProbeFamily families[] = {ProbeFamily::noon,         ProbeFamily::cosine,
                                  ProbeFamily::phase_uniform, ProbeFamily::holland_burnett,
                                  ProbeFamily::spin_coherent, ProbeFamily::trident,
                                  ProbeFamily::quad,          ProbeFamily::gaussian};
  const ChannelSpec specs[] = {dephasing_channel(0.02), loss_channel(0.2, 0.2, 0.05),
                               individual_channel(0.05, 0.03, 0.02)};
  for (const auto& spec : specs) {
    OptimizationResult res = optimize_probe(spec, N);
    for (ProbeFamily fam : families) {
      INFO("family " << family_name(fam));
      REQUIRE(res.qfi >= family_qfi(spec, fam, N) - 1e-8);
    }
  }
}

TEST_CASE("mirror-restricted and unrestricted optimization agree") {
  const ChannelSpec spec = dephasing_channel(0.05);
  const int N = 10;
  OptimizeOptions free_opts;
  free_opts.tolerance = 1e-13;
  free_opts.max_iterations = 20000;
  OptimizationResult unres = optimize_probe(spec, N, free_opts);
  OptimizeOptions mirror_opts;
  mirror_opts.restrict_mirror = true;
  OptimizationResult res = optimize_probe(spec, N, mirror_opts);
  REQUIRE(std::abs(res.qfi - unres.qfi) <= 1e-6 * std::max(1.0, unres.qfi));
  // the unrestricted optimum is mirror symmetric on its own
  Vec a = unres.probe.amplitudes.cwiseAbs();
  for (int m = 0; m <= N; ++m) REQUIRE_THAT(a(m), Catch::Matchers::WithinAbs(a(N - m), 1e-4));

  OptimizeOptions bad;
  bad.restrict_mirror = true;
  REQUIRE_THROWS_AS(optimize_probe(loss_channel(0.3, 0.1), 6, bad), std::invalid_argument);
}

TEST_CASE("warm starts never lose to cold starts") {
  const int N = 12;
  Vec grid(3);
  grid << 1e-3, 4e-3, 1e-2;
  MenorahScan scan = menorah_scan(N, grid);
  for (int i = 0; i < grid.size(); ++i) {
    OptimizationResult cold = optimize_probe(dephasing_channel(grid(i)), N);
    REQUIRE(scan.qfi[static_cast<std::size_t>(i)] >= cold.qfi - 1e-8);
    REQUIRE(scan.converged[static_cast<std::size_t>(i)] == 1);
  }
}

TEST_CASE("objective improves monotonically along the ascent") {
  // drive a single ascent; the multi-start wrapper would interleave runs.
  // A random start guarantees a nonzero initial gradient (the NOON state,
  // for example, is an exact critical point of the dephased objective).
  ProbeObjective obj(dephasing_channel(0.01), 14);
  std::vector<double> trace;
  OptimizeOptions opts;
  opts.trace = &trace;
  detail::AscentOutcome run = detail::ascend(obj, random_unit(15, 99u), opts, false);
  REQUIRE(run.converged);
  REQUIRE(trace.size() >= 10);
  for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] >= trace[i - 1]);
  REQUIRE_THAT(trace.back(), Catch::Matchers::WithinRel(run.f, 1e-15));

  // the NOON state really is stationary: the ascent accepts no step from it
  std::vector<double> noon_trace;
  OptimizeOptions noon_opts;
  noon_opts.trace = &noon_trace;
  Vec noon = make_probe(ProbeFamily::noon, 14).amplitudes.real();
  detail::AscentOutcome stuck = detail::ascend(obj, noon, noon_opts, false);
  REQUIRE(stuck.iterations == 0);
  REQUIRE(stuck.f < run.f);
}

TEST_CASE("component counting identifies lobes and plateaus") {
  auto count = [](std::initializer_list<double> vals) {
    Vec v(static_cast<int>(vals.size()));
    int i = 0;
    for (double x : vals) v(i++) = x;
    return component_count(v);
  };
  REQUIRE(count({0.7, 0.0, 0.0, 0.0, 0.7}) == 2);
  REQUIRE(count({0.6, 0.0, 0.5, 0.0, 0.6}) == 3);
  REQUIRE(count({0.4, 0.4, 0.4}) == 1);
  REQUIRE(count({1e-4, 0.0, 1e-4}) == 0);
  REQUIRE(count({0.1, 0.2, 0.3, 0.4}) == 1);
  REQUIRE(count({0.5, 0.2, 0.5, 0.2, 0.5, 0.2, 0.5}) == 4);
}

TEST_CASE("menorah scan shows the first bifurcations") {
  const int N = 12;
  // Gamma0 = mu0 / N^2 with mu0 picked inside the 2-, 3- and 4-lobe windows
  Vec grid(3);
  grid << 0.5 / 144.0, 1.5 / 144.0, 3.0 / 144.0;
  OptimizeOptions opts;
  opts.max_iterations = 8000;
  MenorahScan scan = menorah_scan(N, grid, opts);
  REQUIRE(scan.component_counts.size() == 3);
  CHECK(scan.component_counts[0] == 2);
  CHECK(scan.component_counts[1] == 3);
  CHECK(scan.component_counts[2] == 4);
  for (std::size_t i = 1; i < scan.component_counts.size(); ++i)
    REQUIRE(scan.component_counts[i] >= scan.component_counts[i - 1]);
  REQUIRE(scan.bifurcations.size() == 2);
  for (char c : scan.converged) REQUIRE(c == 1);
  // rows are unit probes
  for (int r = 0; r < grid.size(); ++r)
    REQUIRE_THAT(scan.amplitudes.row(r).squaredNorm(), Catch::Matchers::WithinAbs(1.0, 1e-10));

  Vec unsorted(2);
  unsorted << 0.1, 0.01;
  REQUIRE_THROWS_AS(menorah_scan(8, unsorted), std::invalid_argument);
}

TEST_CASE("sign flips are a gauge symmetry for hadamard channels") {
  // channels acting entrywise per sector commute with diagonal sign
  // conjugations, so the objective cannot depend on the component signs
  std::mt19937_64 rng(7u);
  auto flipped = [&](const Vec& v) {
    Vec out = v;
    for (int i = 0; i < out.size(); ++i)
      if (rng() & 1u) out(i) = -out(i);
    return out;
  };
  const ChannelSpec gauge_specs[] = {
      dephasing_channel(0.25),
      loss_channel(0.4, 0.0, 0.25),
      individual_channel(0.1, 0.0, 0.0),
  };
  Vec psi = random_unit(13, 11u).array() + 0.3;
  psi.normalize();
  for (const auto& spec : gauge_specs) {
    ProbeObjective obj(spec, 12);
    double f0 = obj.value(psi);
    for (int t = 0; t < 4; ++t)
      REQUIRE_THAT(obj.value(flipped(psi)), Catch::Matchers::WithinRel(f0, 1e-12));
  }

  // neighbor-coupling channels do not share the symmetry
  ProbeObjective relax(individual_channel(0.0, 0.1, 0.0), 12);
  double base = relax.value(psi);
  double spread = 0.0;
  for (int t = 0; t < 6; ++t)
    spread = std::max(spread, std::abs(relax.value(flipped(psi)) - base));
  REQUIRE(spread > 1e-6 * base);
}

TEST_CASE("complex amplitudes do not beat real ones") {
  struct Case {
    const char* name;
    ChannelSpec spec;
    int N;
  };
  const Case cases[] = {
      {"dephasing", dephasing_channel(0.1), 6},
      {"loss", loss_channel(0.4, 0.15, 0.05), 6},
      {"individual", individual_channel(0.06, 0.03, 0.01), 6},
  };
  for (const auto& c : cases) {
    double real_best = optimize_probe(c.spec, c.N).qfi;
    double complex_best = complex_optimum(c.spec, c.N, 101u);
    INFO(c.name);
    REQUIRE(complex_best <= real_best + 1e-6 * std::max(1.0, real_best));
  }
}

TEST_CASE("identical seeds give identical optima") {
  OptimizeOptions opts;
  opts.seed = 424242u;
  OptimizationResult a = optimize_probe(dephasing_channel(0.03), 9, opts);
  OptimizationResult b = optimize_probe(dephasing_channel(0.03), 9, opts);
  REQUIRE(a.qfi == b.qfi);
  REQUIRE(a.iterations == b.iterations);
  REQUIRE((a.probe.amplitudes.array() == b.probe.amplitudes.array()).all());
}

TEST_CASE("family error curves include shot noise and the optimized boundary") {
  const int N = 10;
  Vec grid(2);
  grid << 0.0, 0.01;
  std::vector<ProbeFamily> fams = {ProbeFamily::spin_coherent, ProbeFamily::cosine,
                                   ProbeFamily::noon};
  auto rows = family_error_curves(fams, N, grid);
  REQUIRE(rows.size() == (fams.size() + 1) * 2);
  // spin coherent at zero noise sits exactly at shot noise 1/N
  REQUIRE(rows[0].label == "spin_coherent");
  REQUIRE(rows[0].gamma0 == 0.0);
  REQUIRE_THAT(rows[0].inverse_qfi, Catch::Matchers::WithinRel(1.0 / N, 1e-12));
  REQUIRE_THAT(rows[0].quantum_component, Catch::Matchers::WithinRel(static_cast<double>(N), 1e-12));
  for (std::size_t base = 0; base < rows.size(); base += fams.size() + 1) {
    const auto& opt = rows[base + fams.size()];
    REQUIRE(opt.label == "optimized");
    for (std::size_t j = 0; j < fams.size(); ++j)
      REQUIRE(opt.inverse_qfi <= rows[base + j].inverse_qfi + 1e-12);
  }
}

TEST_CASE("noon loses its advantage sooner for larger ensembles") {
  auto crossover = [](int N) {
    auto diff = [&](double g0) {
      ChannelSpec spec = dephasing_channel(g0);
      return family_qfi(spec, ProbeFamily::noon, N) - family_qfi(spec, ProbeFamily::cosine, N);
    };
    double lo = 1e-9, hi = 0.1;
    REQUIRE(diff(lo) > 0.0);
    REQUIRE(diff(hi) < 0.0);
    for (int i = 0; i < 60; ++i) {
      double mid = std::sqrt(lo * hi);
      (diff(mid) > 0.0 ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
  };
  double c20 = crossover(20);
  double c40 = crossover(40);
  REQUIRE(c40 < c20);
  REQUIRE(c20 < 0.1);
  REQUIRE(c40 > 1e-9);
}

TEST_CASE("individual noise splits behave consistently at moderate size") {
  const int N = 14;
  const double gamma = 0.1;
  const ChannelSpec splits[] = {
      individual_channel(gamma, 0.0, 0.0),
      individual_channel(0.0, gamma, 0.0),
      individual_channel(0.0, 0.0, gamma),
      individual_channel(gamma / 3, gamma / 3, gamma / 3),
  };
  std::vector<double> inv;
  for (const auto& spec : splits) inv.push_back(1.0 / optimize_probe(spec, N).qfi);
  // relaxation and excitation are exact mirror images of each other
  REQUIRE_THAT(inv[1], Catch::Matchers::WithinRel(inv[2], 1e-8));
  // the splits share the same error scale well before the large-N regime
  // where they coincide; the sharp comparison lives at N=40
  const double r = N * std::expm1(gamma);
  const double law = std::expm1(gamma) / N + 2.0 * std::sqrt(r) / (N * N);
  for (double v : inv) {
    REQUIRE(v > 0.5 * law);
    REQUIRE(v < 1.5 * law);
  }
}

TEST_CASE("channel specs are validated") {
  ChannelSpec bad = dephasing_channel(0.1);
  bad.loss1 = 0.2;
  REQUIRE_THROWS_AS(validate_channel(bad), std::invalid_argument);
  ChannelSpec neg = dephasing_channel(-0.1);
  REQUIRE_THROWS_AS(validate_channel(neg), std::invalid_argument);
  ChannelSpec none;
  none.gamma0 = 0.1;
  REQUIRE_THROWS_AS(validate_channel(none), std::invalid_argument);
  ChannelSpec mixed = individual_channel(0.1, 0.0, 0.0);
  mixed.gamma_minus = 0.05;
  REQUIRE_THROWS_AS(validate_channel(mixed), std::invalid_argument);

  REQUIRE(mirror_symmetric_channel(dephasing_channel(0.3)));
  REQUIRE(mirror_symmetric_channel(loss_channel(0.2, 0.2)));
  REQUIRE_FALSE(mirror_symmetric_channel(loss_channel(0.2, 0.1)));
  REQUIRE_FALSE(mirror_symmetric_channel(individual_channel(0.0, 0.1, 0.0)));

  Vec short_warm(3);
  short_warm << 1.0, 0.0, 0.0;
  REQUIRE_THROWS_AS(optimize_probe(dephasing_channel(0.1), 5, {}, &short_warm),
                    std::invalid_argument);
}

TEST_CASE("collective relax and excite channel optimizes via finite differences") {
  const ChannelSpec spec = collective_channel(0.01, 0.02, 0.0);
  OptimizeOptions opts;
  opts.restarts = 4;
  opts.max_iterations = 300;
  opts.tolerance = 1e-8;
  OptimizationResult res = optimize_probe(spec, 6, opts);
  REQUIRE(res.qfi > family_qfi(spec, ProbeFamily::spin_coherent, 6) - 1e-8);
  REQUIRE(res.qfi > family_qfi(spec, ProbeFamily::noon, 6) - 1e-8);
  REQUIRE(res.qfi <= 36.0 + 1e-8);
}
