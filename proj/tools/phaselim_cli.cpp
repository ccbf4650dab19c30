// Command line front end for the phaselim library.
//
// Subcommands cover the standard experiments: single-state QFI, probe
// optimization, the dephasing bifurcation sweep, family comparison curves,
// the semiclassical ground-state solver, cluster sizing, photon loss
// profiles, and the entanglement thresholds.  Output is CSV (17 significant
// digits, LF) plus a JSON sidecar with the effective configuration, so a
// rerun with the same config and seed reproduces the bytes exactly.
//
// Exit codes: 0 success, 2 configuration or validation error, 3 numerical
// failure (non-converged rows are flagged in the CSV, which is still
// written).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phaselim/channels.hpp"
#include "phaselim/csv.hpp"
#include "phaselim/fisher.hpp"
#include "phaselim/optimize.hpp"
#include "phaselim/probe.hpp"
#include "phaselim/semiclassical.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace phaselim;

constexpr const char* kToolName = "phaselim";
constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Channel flags shared by the subcommands that take a noise model.

struct ChannelFlags {
  std::string channel;  // empty: infer from which rates are nonzero
  double gamma0 = 0.0;
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  double igamma0 = 0.0;
  double igamma_minus = 0.0;
  double igamma_plus = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
};

const char* channel_kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::none: return "none";
    case ChannelKind::collective_dephasing: return "dephasing";
    case ChannelKind::collective: return "collective";
    case ChannelKind::individual: return "individual";
    case ChannelKind::loss: return "loss";
  }
  return "unknown";
}

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "none") return ChannelKind::none;
  if (name == "dephasing") return ChannelKind::collective_dephasing;
  if (name == "collective") return ChannelKind::collective;
  if (name == "individual") return ChannelKind::individual;
  if (name == "loss") return ChannelKind::loss;
  throw std::invalid_argument("unknown channel kind: " + name +
                              " (expected none, dephasing, collective, individual, loss)");
}

ChannelSpec to_channel_spec(const ChannelFlags& f) {
  ChannelSpec s;
  s.gamma0 = f.gamma0;
  s.gamma_minus = f.gamma_minus;
  s.gamma_plus = f.gamma_plus;
  s.igamma0 = f.igamma0;
  s.igamma_minus = f.igamma_minus;
  s.igamma_plus = f.igamma_plus;
  s.loss1 = f.loss1;
  s.loss2 = f.loss2;
  if (!f.channel.empty()) {
    s.kind = parse_channel_kind(f.channel);
  } else if (f.loss1 > 0.0 || f.loss2 > 0.0) {
    s.kind = ChannelKind::loss;
  } else if (f.igamma0 > 0.0 || f.igamma_minus > 0.0 || f.igamma_plus > 0.0) {
    s.kind = ChannelKind::individual;
  } else if (f.gamma_minus > 0.0 || f.gamma_plus > 0.0) {
    s.kind = ChannelKind::collective;
  } else if (f.gamma0 > 0.0) {
    s.kind = ChannelKind::collective_dephasing;
  } else {
    s.kind = ChannelKind::none;
  }
  validate_channel(s);
  return s;
}

// Derived strengths reported next to the raw exponents so every row can be
// read without the invocation at hand.
struct DerivedStrengths {
  double mu0 = 0.0;
  double r_individual = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
};

DerivedStrengths derive_strengths(const ChannelSpec& s, int n_qubits) {
  const double n = n_qubits;
  DerivedStrengths d;
  d.mu0 = n * n * s.gamma0;
  d.r_individual = n * std::expm1(s.igamma0 + s.igamma_minus + s.igamma_plus);
  d.r1 = n * std::expm1(s.loss1);
  d.r2 = n * std::expm1(s.loss2);
  return d;
}

std::vector<std::string> channel_headers() {
  return {"channel", "gamma0",        "gamma_minus", "gamma_plus", "igamma0",
          "igamma_minus", "igamma_plus", "loss1",       "loss2"};
}

void append_channel_cells(std::vector<CsvWriter::Cell>& cells, const ChannelSpec& s) {
  cells.emplace_back(std::string(channel_kind_name(s.kind)));
  cells.emplace_back(s.gamma0);
  cells.emplace_back(s.gamma_minus);
  cells.emplace_back(s.gamma_plus);
  cells.emplace_back(s.igamma0);
  cells.emplace_back(s.igamma_minus);
  cells.emplace_back(s.igamma_plus);
  cells.emplace_back(s.loss1);
  cells.emplace_back(s.loss2);
}

json channel_json(const ChannelSpec& s) {
  json j;
  j["channel"] = channel_kind_name(s.kind);
  j["gamma0"] = s.gamma0;
  j["gamma-minus"] = s.gamma_minus;
  j["gamma-plus"] = s.gamma_plus;
  j["igamma0"] = s.igamma0;
  j["igamma-minus"] = s.igamma_minus;
  j["igamma-plus"] = s.igamma_plus;
  j["loss1"] = s.loss1;
  j["loss2"] = s.loss2;
  return j;
}

// ---------------------------------------------------------------------------
// JSON config file: a flat object of long-option names (without the leading
// dashes) providing defaults; explicit command line flags override it.

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "channel", "gamma0", "gamma-minus", "gamma-plus", "igamma0", "igamma-minus",
      "igamma-plus", "loss1", "loss2", "N", "grid", "family", "seed", "out",
      "threads", "svg", "grid-points", "restarts", "max-iter", "tol", "budget",
      "source", "sizes", "r1", "r2", "threshold-tol", "component-threshold"};
  return keys;
}

json load_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 >= argc) throw std::invalid_argument("--config needs a file argument");
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  for (const auto& item : cfg.items()) {
    if (!known_config_keys().count(item.key()))
      throw std::invalid_argument("config: unknown key '" + item.key() + "'");
  }
  return cfg;
}

void cfg_apply(const json& cfg, const char* key, double& v) {
  if (!cfg.contains(key)) return;
  if (!cfg[key].is_number()) throw std::invalid_argument(std::string("config: '") + key + "' must be a number");
  v = cfg[key].get<double>();
}

void cfg_apply(const json& cfg, const char* key, int& v) {
  if (!cfg.contains(key)) return;
  if (!cfg[key].is_number_integer()) throw std::invalid_argument(std::string("config: '") + key + "' must be an integer");
  v = cfg[key].get<int>();
}

void cfg_apply(const json& cfg, const char* key, long& v) {
  if (!cfg.contains(key)) return;
  if (!cfg[key].is_number_integer()) throw std::invalid_argument(std::string("config: '") + key + "' must be an integer");
  v = cfg[key].get<long>();
}

void cfg_apply(const json& cfg, const char* key, unsigned& v) {
  if (!cfg.contains(key)) return;
  if (!cfg[key].is_number_unsigned() && !cfg[key].is_number_integer())
    throw std::invalid_argument(std::string("config: '") + key + "' must be a non-negative integer");
  long raw = cfg[key].get<long>();
  if (raw < 0) throw std::invalid_argument(std::string("config: '") + key + "' must be non-negative");
  v = static_cast<unsigned>(raw);
}

void cfg_apply(const json& cfg, const char* key, std::string& v) {
  if (!cfg.contains(key)) return;
  if (!cfg[key].is_string()) throw std::invalid_argument(std::string("config: '") + key + "' must be a string");
  v = cfg[key].get<std::string>();
}

// ---------------------------------------------------------------------------
// Bounded worker pool over an index range.  Tasks write into pre-sized slots,
// so the merge order is the grid order regardless of scheduling.

template <class Fn>
void run_indexed(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Output plumbing.

struct CommonOpts {
  std::string out;  // empty: CSV to stdout, no sidecar
  std::string svg;
  unsigned seed = 20240901u;
  int threads = 1;
};

struct OptKnobs {
  int restarts = 8;
  int max_iter = 2000;
  double tol = 1e-10;
};

OptimizeOptions to_optimize_options(const OptKnobs& k, unsigned seed) {
  OptimizeOptions o;
  o.restarts = k.restarts;
  o.max_iterations = k.max_iter;
  o.tolerance = k.tol;
  o.seed = seed;
  return o;
}

json knob_json(const OptKnobs& k) {
  json j;
  j["restarts"] = k.restarts;
  j["max-iter"] = k.max_iter;
  j["tol"] = k.tol;
  return j;
}

void add_common_flags(CLI::App* sub, CommonOpts& c, const json& cfg) {
  cfg_apply(cfg, "out", c.out);
  cfg_apply(cfg, "svg", c.svg);
  cfg_apply(cfg, "seed", c.seed);
  cfg_apply(cfg, "threads", c.threads);
  sub->add_option("--out", c.out, "output CSV path (stdout when omitted)");
  sub->add_option("--seed", c.seed, "optimizer restart seed");
  sub->add_option("--threads", c.threads, "worker pool size for sweeps")
      ->check(CLI::Range(1, 256));
}

void add_svg_flag(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--svg", c.svg, "also render a static SVG line chart");
}

void add_knob_flags(CLI::App* sub, OptKnobs& k, const json& cfg) {
  cfg_apply(cfg, "restarts", k.restarts);
  cfg_apply(cfg, "max-iter", k.max_iter);
  cfg_apply(cfg, "tol", k.tol);
  sub->add_option("--restarts", k.restarts, "optimizer restarts per point")->check(CLI::Range(1, 64));
  sub->add_option("--max-iter", k.max_iter, "ascent iteration cap")->check(CLI::Range(1, 1000000));
  sub->add_option("--tol", k.tol, "relative QFI progress treated as converged");
}

void add_channel_flags(CLI::App* sub, ChannelFlags& f, const json& cfg) {
  cfg_apply(cfg, "channel", f.channel);
  cfg_apply(cfg, "gamma0", f.gamma0);
  cfg_apply(cfg, "gamma-minus", f.gamma_minus);
  cfg_apply(cfg, "gamma-plus", f.gamma_plus);
  cfg_apply(cfg, "igamma0", f.igamma0);
  cfg_apply(cfg, "igamma-minus", f.igamma_minus);
  cfg_apply(cfg, "igamma-plus", f.igamma_plus);
  cfg_apply(cfg, "loss1", f.loss1);
  cfg_apply(cfg, "loss2", f.loss2);
  sub->add_option("--channel", f.channel,
                  "noise model: none, dephasing, collective, individual, loss "
                  "(inferred from the rates when omitted)");
  sub->add_option("--gamma0", f.gamma0, "collective dephasing exponent");
  sub->add_option("--gamma-minus", f.gamma_minus, "collective relaxation exponent");
  sub->add_option("--gamma-plus", f.gamma_plus, "collective excitation exponent");
  sub->add_option("--igamma0", f.igamma0, "per-qubit dephasing exponent");
  sub->add_option("--igamma-minus", f.igamma_minus, "per-qubit relaxation exponent");
  sub->add_option("--igamma-plus", f.igamma_plus, "per-qubit excitation exponent");
  sub->add_option("--loss1", f.loss1, "photon loss exponent, arm 1");
  sub->add_option("--loss2", f.loss2, "photon loss exponent, arm 2");
}

json make_sidecar(const std::string& command, const CommonOpts& c, json config) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = c.seed;
  j["config"] = std::move(config);
  return j;
}

// Writes CSV (plus sidecar and optional SVG) or streams the CSV to stdout.
void emit_outputs(const CsvWriter& csv, const CommonOpts& c, const json& sidecar,
                  const SvgChart* chart) {
  if (c.out.empty()) {
    std::fwrite(csv.str().data(), 1, csv.str().size(), stdout);
  } else {
    csv.write(c.out);
    std::ofstream f(c.out + ".json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open sidecar: " + c.out + ".json");
    f << sidecar.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + c.out + ".json");
  }
  if (chart && !c.svg.empty()) chart->write(c.svg);
}

int finish(bool all_converged, const char* what) {
  if (all_converged) return 0;
  std::fprintf(stderr,
               "%s: some points did not converge; the converged column flags them (exit 3)\n",
               what);
  return 3;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::string cur;
  auto push = [&] {
    if (cur.empty()) throw std::invalid_argument(std::string(what) + ": empty entry");
    out.push_back(std::stoi(cur));
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',') push();
    else cur.push_back(ch);
  }
  push();
  return out;
}

ProbeFamily parse_plain_family(const std::string& name) {
  for (ProbeFamily f : {ProbeFamily::noon, ProbeFamily::cosine, ProbeFamily::phase_uniform,
                        ProbeFamily::holland_burnett, ProbeFamily::spin_coherent,
                        ProbeFamily::trident, ProbeFamily::quad, ProbeFamily::gaussian}) {
    if (name == family_name(f)) return f;
  }
  throw std::invalid_argument("unknown probe family: " + name);
}

// ---------------------------------------------------------------------------
// thresholds: critical dephasing for k = 2, 3, 4 clusters.

int run_thresholds(const CommonOpts& c, const OptKnobs& knobs, double tol) {
  OptimizeOptions opts = to_optimize_options(knobs, c.seed);
  std::vector<int> ks = {2, 3, 4};
  std::vector<double> critical(ks.size());
  run_indexed(static_cast<int>(ks.size()), c.threads,
              [&](int i) { critical[i] = entanglement_threshold(ks[i], tol, opts); });

  CsvWriter csv(2);
  csv.header({"k", "gamma0_critical"});
  for (std::size_t i = 0; i < ks.size(); ++i)
    csv.row({static_cast<long>(ks[i]), critical[i]});

  json config;
  config["threshold-tol"] = tol;
  config["threads"] = c.threads;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("thresholds", c, config), nullptr);
  return 0;
}

// ---------------------------------------------------------------------------
// qfi: one probe state through one channel.

int run_qfi(const CommonOpts& c, const ChannelFlags& flags, const std::string& family, int N) {
  ChannelSpec spec = to_channel_spec(flags);
  FamilySpec fam = parse_family(family);
  ProbeState probe = make_probe(fam, N);
  // The channel-free value comes from the variance identity, which is exact
  // for the standard families (e.g. 36 for a six-qubit NOON state).
  double F = spec.kind == ChannelKind::none ? qfi_pure(probe) : qfi(apply_channel(spec, probe));
  DerivedStrengths d = derive_strengths(spec, N);

  CsvWriter csv(16);
  std::vector<std::string> head = {"family", "N"};
  for (auto& h : channel_headers()) head.push_back(h);
  for (auto& h : {"mu0", "r_individual", "r1", "r2", "qfi"}) head.push_back(h);
  csv.header(head);
  std::vector<CsvWriter::Cell> cells = {family, static_cast<long>(N)};
  append_channel_cells(cells, spec);
  cells.insert(cells.end(), {d.mu0, d.r_individual, d.r1, d.r2, F});
  csv.row(cells);

  json config = channel_json(spec);
  config["family"] = family;
  config["N"] = N;
  emit_outputs(csv, c, make_sidecar("qfi", c, config), nullptr);
  return 0;
}

// ---------------------------------------------------------------------------
// optimize: best probe for one channel, emitted as a profile.

int run_optimize(const CommonOpts& c, const ChannelFlags& flags, int N, const OptKnobs& knobs) {
  ChannelSpec spec = to_channel_spec(flags);
  OptimizationResult res = optimize_probe(spec, N, to_optimize_options(knobs, c.seed));
  DerivedStrengths d = derive_strengths(spec, N);

  CsvWriter csv(20);
  std::vector<std::string> head = {"N"};
  for (auto& h : channel_headers()) head.push_back(h);
  for (auto& h : {"mu0", "r_individual", "r1", "r2", "m", "x", "amplitude", "qfi", "converged",
                  "iterations"})
    head.push_back(h);
  csv.header(head);

  SvgChart chart("optimized probe profile", "x = m/N", "amplitude");
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < res.probe.dim(); ++i) {
    double m = res.probe.m_of(i);
    double x = m / N;
    double amp = res.probe.amplitudes(i).real();
    std::vector<CsvWriter::Cell> cells = {static_cast<long>(N)};
    append_channel_cells(cells, spec);
    cells.insert(cells.end(), {d.mu0, d.r_individual, d.r1, d.r2, m, x, amp, res.qfi,
                               static_cast<long>(res.converged ? 1 : 0),
                               static_cast<long>(res.iterations)});
    csv.row(cells);
    pts.emplace_back(x, amp);
  }
  chart.add_series("amplitude", pts);

  json config = channel_json(spec);
  config["N"] = N;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("optimize", c, config), &chart);
  return finish(res.converged, "optimize");
}

// ---------------------------------------------------------------------------
// menorah: optimized dephasing profiles across a Gamma0 grid, with the
// resolved component count per point.

int run_menorah(const CommonOpts& c, int N, const std::string& grid_spec, double gamma0,
                const OptKnobs& knobs, double component_threshold) {
  std::vector<double> grid =
      grid_spec.empty() ? std::vector<double>{gamma0} : parse_grid_spec(grid_spec);
  if (grid.empty()) throw std::invalid_argument("menorah: empty gamma0 grid");
  OptimizeOptions opts = to_optimize_options(knobs, c.seed);

  CsvWriter csv(11);
  csv.header({"N", "channel", "gamma0", "mu0", "m", "x", "amplitude", "qfi", "components",
              "converged", "iterations"});
  SvgChart chart("optimized probes across dephasing strengths", "x = m/N", "amplitude");
  bool all_converged = true;

  // Solved in grid order; each point is cheap enough that the pool adds
  // nothing here and serial execution keeps the progression easy to follow.
  for (double g0 : grid) {
    OptimizationResult res = optimize_probe(dephasing_channel(g0), N, opts);
    all_converged = all_converged && res.converged;
    Vec abs_amp = res.probe.amplitudes.cwiseAbs();
    int components = component_count(abs_amp, component_threshold);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < res.probe.dim(); ++i) {
      double m = res.probe.m_of(i);
      double x = m / N;
      double amp = res.probe.amplitudes(i).real();
      csv.row({static_cast<long>(N), std::string("dephasing"), g0, N * static_cast<double>(N) * g0,
               m, x, amp, res.qfi, static_cast<long>(components),
               static_cast<long>(res.converged ? 1 : 0), static_cast<long>(res.iterations)});
      pts.emplace_back(x, amp);
    }
    chart.add_series("gamma0=" + format_number(g0), pts);
  }

  json config;
  config["N"] = N;
  config["grid"] = grid_spec.empty() ? format_number(gamma0) : grid_spec;
  config["component-threshold"] = component_threshold;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("menorah", c, config), &chart);
  return finish(all_converged, "menorah");
}

// ---------------------------------------------------------------------------
// families: 1/F and its quantum part per family over a Gamma0 grid, plus the
// optimized boundary.

int run_families(const CommonOpts& c, int N, const std::string& grid_spec,
                 const std::string& family_list, const OptKnobs& knobs) {
  std::vector<double> grid = parse_grid_spec(grid_spec);
  std::vector<ProbeFamily> fams;
  {
    std::string cur;
    auto push = [&] {
      if (!cur.empty()) fams.push_back(parse_plain_family(cur));
      cur.clear();
    };
    for (char ch : family_list) {
      if (ch == ',') push();
      else cur.push_back(ch);
    }
    push();
  }
  if (fams.empty()) throw std::invalid_argument("families: no probe families given");
  OptimizeOptions opts = to_optimize_options(knobs, c.seed);

  // One task per grid point; slots keep the merge in grid order.
  std::vector<std::vector<FamilyErrorRow>> slots(grid.size());
  run_indexed(static_cast<int>(grid.size()), c.threads, [&](int i) {
    Vec point(1);
    point(0) = grid[i];
    slots[i] = family_error_curves(fams, N, point, true, opts);
  });

  CsvWriter csv(6);
  csv.header({"family", "N", "gamma0", "mu0", "inverse_qfi", "quantum_component"});
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& rows : slots) {
    for (const auto& r : rows) {
      csv.row({r.label, static_cast<long>(N), r.gamma0, N * static_cast<double>(N) * r.gamma0,
               r.inverse_qfi, r.quantum_component});
      series[r.label].emplace_back(r.gamma0, r.inverse_qfi);
    }
  }
  SvgChart chart("phase variance bound per family", "gamma0", "1/F");
  for (auto& [label, pts] : series) chart.add_series(label, pts);

  json config;
  config["N"] = N;
  config["grid"] = grid_spec;
  config["family"] = family_list;
  config["threads"] = c.threads;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("families", c, config), &chart);
  return 0;
}

// ---------------------------------------------------------------------------
// semiclassical: continuum ground state for the channel's potential, with the
// closed-form precision bound next to the numeric one.

int run_semiclassical(const CommonOpts& c, const ChannelFlags& flags, int N, int grid_points) {
  ChannelSpec spec = to_channel_spec(flags);
  Potential pot = build_potential(spec, N);
  GroundState gs = ground_state(pot, grid_points);
  PrecisionBound bound = precision_bound(spec, N, grid_points);
  DerivedStrengths d = derive_strengths(spec, N);

  CsvWriter csv(23);
  std::vector<std::string> head = {"N"};
  for (auto& h : channel_headers()) head.push_back(h);
  for (auto& h : {"mu0", "mu1", "s_star", "r_individual", "r1", "r2", "x", "psi", "lambda_min",
                  "richardson_gap", "bound_closed_form", "bound_numeric", "conditions_met"})
    head.push_back(h);
  csv.header(head);

  SvgChart chart("semiclassical ground state", "x", "psi");
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < gs.psi.size(); ++i) {
    std::vector<CsvWriter::Cell> cells = {static_cast<long>(N)};
    append_channel_cells(cells, spec);
    cells.insert(cells.end(),
                 {pot.mu0, pot.mu1, pot.s_star, d.r_individual, d.r1, d.r2, gs.x(i), gs.psi(i),
                  gs.lambda_min, gs.richardson_gap, bound.closed_form, bound.numeric,
                  static_cast<long>(bound.conditions_met ? 1 : 0)});
    csv.row(cells);
    pts.emplace_back(gs.x(i), gs.psi(i));
  }
  chart.add_series("psi", pts);

  json config = channel_json(spec);
  config["N"] = N;
  config["grid-points"] = grid_points;
  emit_outputs(csv, c, make_sidecar("semiclassical", c, config), &chart);
  return 0;
}

// ---------------------------------------------------------------------------
// cluster: optimal cluster size under collective dephasing for a fixed
// particle budget.

int run_cluster(const CommonOpts& c, double gamma0, long budget, const std::string& source,
                const std::string& sizes_text, const OptKnobs& knobs) {
  AlphaSource src;
  if (source == "table") src = AlphaSource::table;
  else if (source == "numeric") src = AlphaSource::numeric;
  else throw std::invalid_argument("cluster: source must be 'table' or 'numeric'");
  std::vector<int> sizes = parse_int_list(sizes_text, "cluster sizes");

  ClusterAnalysis res = cluster_optimize(ChannelKind::collective_dephasing, gamma0, budget, src,
                                         sizes, to_optimize_options(knobs, c.seed));

  CsvWriter csv(11);
  csv.header({"gamma0", "budget", "source", "mu0", "sqrt_mu0", "alpha", "beta", "mu0_star",
              "cluster_size", "prefactor", "variance_at_optimum"});
  SvgChart chart("cluster size tradeoff", "sqrt(mu0)", "beta = alpha/sqrt(mu0)");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < res.mu0.size(); ++i) {
    csv.row({gamma0, static_cast<long>(budget), source, res.mu0[i], res.sqrt_mu0[i], res.alpha[i],
             res.beta[i], res.mu0_star, res.cluster_size, res.prefactor,
             res.variance_at_optimum});
    pts.emplace_back(res.sqrt_mu0[i], res.beta[i]);
  }
  chart.add_series("beta", pts);

  json config;
  config["gamma0"] = gamma0;
  config["budget"] = budget;
  config["source"] = source;
  config["sizes"] = sizes_text;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("cluster", c, config), &chart);
  return 0;
}

// ---------------------------------------------------------------------------
// loss: optimized probe under photon loss next to the semiclassical ground
// state, with the overlap between the two profiles.

int run_loss(const CommonOpts& c, int N, double gamma0, double r1, double r2, double loss1,
             double loss2, const OptKnobs& knobs, int grid_points) {
  if (r1 > 0.0 && loss1 > 0.0)
    throw std::invalid_argument("loss: give either --r1 or --loss1, not both");
  if (r2 > 0.0 && loss2 > 0.0)
    throw std::invalid_argument("loss: give either --r2 or --loss2, not both");
  LossRate arm1 = r1 > 0.0 ? loss_rate_from_r(N, r1) : loss_rate_from_gamma(N, loss1);
  LossRate arm2 = r2 > 0.0 ? loss_rate_from_r(N, r2) : loss_rate_from_gamma(N, loss2);

  ChannelSpec spec = loss_channel(arm1.gamma, arm2.gamma, gamma0);
  OptimizationResult res = optimize_probe(spec, N, to_optimize_options(knobs, c.seed));
  RelaxedProfile ansatz = relaxed_ground_profile(spec, N, grid_points);

  // Component signs are a gauge freedom of the loss channel, so the profile
  // comparison uses magnitudes.
  Vec abs_amp = res.probe.amplitudes.cwiseAbs();
  double overlap = abs_amp.dot(ansatz.amplitudes);

  CsvWriter csv(19);
  csv.header({"N", "gamma0", "loss1", "loss2", "r1", "r2", "transmittivity1", "transmittivity2",
              "mu0", "m", "x", "amplitude_abs", "groundstate_amplitude", "wall_extension",
              "overlap", "qfi", "qfi_ansatz", "converged", "iterations"});
  SvgChart chart("loss channel probe profile", "x = m/N", "amplitude");
  std::vector<std::pair<double, double>> opt_pts, gs_pts;
  for (int i = 0; i < res.probe.dim(); ++i) {
    double m = res.probe.m_of(i);
    double x = m / N;
    csv.row({static_cast<long>(N), gamma0, arm1.gamma, arm2.gamma, arm1.r, arm2.r,
             arm1.transmittivity, arm2.transmittivity, N * static_cast<double>(N) * gamma0, m, x,
             abs_amp(i), ansatz.amplitudes(i), ansatz.delta, overlap, res.qfi, ansatz.qfi,
             static_cast<long>(res.converged ? 1 : 0), static_cast<long>(res.iterations)});
    opt_pts.emplace_back(x, abs_amp(i));
    gs_pts.emplace_back(x, ansatz.amplitudes(i));
  }
  chart.add_series("optimized", opt_pts);
  chart.add_series("ground state", gs_pts);

  json config;
  config["N"] = N;
  config["gamma0"] = gamma0;
  config["loss1"] = arm1.gamma;
  config["loss2"] = arm2.gamma;
  config["r1"] = arm1.r;
  config["r2"] = arm2.r;
  config["grid-points"] = grid_points;
  config.update(knob_json(knobs));
  emit_outputs(csv, c, make_sidecar("loss", c, config), &chart);
  return finish(res.converged, "loss");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    json cfg = load_config(argc, argv);

    CLI::App app{"phase estimation limits under collective and local noise"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file of flag defaults")
        ->check(CLI::ExistingFile);

    // thresholds
    CommonOpts th_common;
    OptKnobs th_knobs;
    double th_tol = 1e-4;
    CLI::App* th = app.add_subcommand("thresholds", "critical dephasing for 2/3/4-qubit clusters")->fallthrough();
    add_common_flags(th, th_common, cfg);
    add_knob_flags(th, th_knobs, cfg);
    cfg_apply(cfg, "threshold-tol", th_tol);
    th->add_option("--threshold-tol", th_tol, "bisection width on gamma0");

    // qfi
    CommonOpts qf_common;
    ChannelFlags qf_channel;
    std::string qf_family = "cosine";
    int qf_N = 10;
    CLI::App* qf = app.add_subcommand("qfi", "QFI of one probe state through one channel")->fallthrough();
    add_common_flags(qf, qf_common, cfg);
    add_channel_flags(qf, qf_channel, cfg);
    cfg_apply(cfg, "family", qf_family);
    cfg_apply(cfg, "N", qf_N);
    qf->add_option("--family", qf_family, "probe family, e.g. noon, cosine, gaussian:64");
    qf->add_option("--N", qf_N, "qubit number")->check(CLI::Range(1, 4096));

    // optimize
    CommonOpts op_common;
    ChannelFlags op_channel;
    OptKnobs op_knobs;
    int op_N = 10;
    CLI::App* op = app.add_subcommand("optimize", "optimal probe for one channel")->fallthrough();
    add_common_flags(op, op_common, cfg);
    add_svg_flag(op, op_common);
    add_channel_flags(op, op_channel, cfg);
    add_knob_flags(op, op_knobs, cfg);
    cfg_apply(cfg, "N", op_N);
    op->add_option("--N", op_N, "qubit number")->check(CLI::Range(1, 4096));

    // menorah
    CommonOpts me_common;
    OptKnobs me_knobs;
    me_knobs.max_iter = 8000;  // the multi-component profiles converge slowly
    int me_N = 12;
    std::string me_grid;
    double me_gamma0 = 0.01;
    double me_component_threshold = 1e-3;
    CLI::App* me = app.add_subcommand(
        "menorah", "optimized dephasing profiles and component counts over a gamma0 grid")->fallthrough();
    add_common_flags(me, me_common, cfg);
    add_svg_flag(me, me_common);
    add_knob_flags(me, me_knobs, cfg);
    cfg_apply(cfg, "N", me_N);
    cfg_apply(cfg, "grid", me_grid);
    cfg_apply(cfg, "gamma0", me_gamma0);
    cfg_apply(cfg, "component-threshold", me_component_threshold);
    me->add_option("--N", me_N, "qubit number")->check(CLI::Range(1, 4096));
    me->add_option("--grid", me_grid,
                   "gamma0 grid: 'a,b,c', 'start:stop:count', or 'log:start:stop:count'");
    me->add_option("--gamma0", me_gamma0, "single gamma0 when no grid is given");
    me->add_option("--component-threshold", me_component_threshold,
                   "amplitude cutoff when counting profile components");

    // families
    CommonOpts fa_common;
    OptKnobs fa_knobs;
    int fa_N = 20;
    std::string fa_grid = "log:0.0001:0.3:25";
    std::string fa_families = "noon,cosine,phase_uniform,holland_burnett,spin_coherent";
    CLI::App* fa =
        app.add_subcommand("families", "1/F per probe family over a gamma0 grid, with optimum")->fallthrough();
    add_common_flags(fa, fa_common, cfg);
    add_svg_flag(fa, fa_common);
    add_knob_flags(fa, fa_knobs, cfg);
    cfg_apply(cfg, "N", fa_N);
    cfg_apply(cfg, "grid", fa_grid);
    cfg_apply(cfg, "family", fa_families);
    fa->add_option("--N", fa_N, "qubit number")->check(CLI::Range(1, 4096));
    fa->add_option("--grid", fa_grid, "gamma0 grid specification");
    fa->add_option("--family", fa_families, "comma separated probe families");

    // semiclassical
    CommonOpts se_common;
    ChannelFlags se_channel;
    int se_N = 40;
    int se_grid_points = 2001;
    CLI::App* se =
        app.add_subcommand("semiclassical", "continuum ground state and precision bounds")->fallthrough();
    add_common_flags(se, se_common, cfg);
    add_svg_flag(se, se_common);
    add_channel_flags(se, se_channel, cfg);
    cfg_apply(cfg, "N", se_N);
    cfg_apply(cfg, "grid-points", se_grid_points);
    se->add_option("--N", se_N, "qubit number")->check(CLI::Range(1, 1000000));
    se->add_option("--grid-points", se_grid_points, "spatial resolution of the solver")
        ->check(CLI::Range(501, 200001));

    // cluster
    CommonOpts cl_common;
    OptKnobs cl_knobs;
    double cl_gamma0 = 0.01;
    long cl_budget = 1000000;
    std::string cl_source = "table";
    std::string cl_sizes = "10,14,20,28,40";
    CLI::App* cl = app.add_subcommand("cluster", "optimal cluster size for a particle budget")->fallthrough();
    add_common_flags(cl, cl_common, cfg);
    add_svg_flag(cl, cl_common);
    add_knob_flags(cl, cl_knobs, cfg);
    cfg_apply(cfg, "gamma0", cl_gamma0);
    cfg_apply(cfg, "budget", cl_budget);
    cfg_apply(cfg, "source", cl_source);
    cfg_apply(cfg, "sizes", cl_sizes);
    cl->add_option("--gamma0", cl_gamma0, "collective dephasing exponent");
    cl->add_option("--budget", cl_budget, "total particle budget nu * N")
        ->check(CLI::Range(1L, 1000000000000L));
    cl->add_option("--source", cl_source, "alpha source: table or numeric");
    cl->add_option("--sizes", cl_sizes, "cluster sizes for the numeric sweep");

    // loss
    CommonOpts lo_common;
    OptKnobs lo_knobs;
    int lo_N = 30;
    int lo_grid_points = 2001;
    double lo_gamma0 = 0.0;
    double lo_r1 = 0.0, lo_r2 = 0.0, lo_loss1 = 0.0, lo_loss2 = 0.0;
    CLI::App* lo =
        app.add_subcommand("loss", "optimized probe under photon loss vs the ground state")->fallthrough();
    add_common_flags(lo, lo_common, cfg);
    add_svg_flag(lo, lo_common);
    add_knob_flags(lo, lo_knobs, cfg);
    cfg_apply(cfg, "N", lo_N);
    cfg_apply(cfg, "grid-points", lo_grid_points);
    cfg_apply(cfg, "gamma0", lo_gamma0);
    cfg_apply(cfg, "r1", lo_r1);
    cfg_apply(cfg, "r2", lo_r2);
    cfg_apply(cfg, "loss1", lo_loss1);
    cfg_apply(cfg, "loss2", lo_loss2);
    lo->add_option("--N", lo_N, "qubit number")->check(CLI::Range(1, 4096));
    lo->add_option("--grid-points", lo_grid_points, "solver resolution")
        ->check(CLI::Range(501, 200001));
    lo->add_option("--gamma0", lo_gamma0, "collective dephasing exponent");
    lo->add_option("--r1", lo_r1, "rescaled loss strength, arm 1: r = N (e^l - 1)");
    lo->add_option("--r2", lo_r2, "rescaled loss strength, arm 2");
    lo->add_option("--loss1", lo_loss1, "loss exponent, arm 1");
    lo->add_option("--loss2", lo_loss2, "loss exponent, arm 2");

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::fprintf(stderr, "%s\n", e.what());
      return 2;
    }

    if (*th) return run_thresholds(th_common, th_knobs, th_tol);
    if (*qf) return run_qfi(qf_common, qf_channel, qf_family, qf_N);
    if (*op) return run_optimize(op_common, op_channel, op_N, op_knobs);
    if (*me)
      return run_menorah(me_common, me_N, me_grid, me_gamma0, me_knobs, me_component_threshold);
    if (*fa) return run_families(fa_common, fa_N, fa_grid, fa_families, fa_knobs);
    if (*se) return run_semiclassical(se_common, se_channel, se_N, se_grid_points);
    if (*cl) return run_cluster(cl_common, cl_gamma0, cl_budget, cl_source, cl_sizes, cl_knobs);
    if (*lo)
      return run_loss(lo_common, lo_N, lo_gamma0, lo_r1, lo_r2, lo_loss1, lo_loss2, lo_knobs,
                      lo_grid_points);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
