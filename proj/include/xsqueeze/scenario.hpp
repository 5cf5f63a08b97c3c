// scenario.hpp
// Config-driven experiment runner: strict JSON configs, one output directory
// per run (data files + manifest.json + run.log), and parameter sweeps.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "csqz_protocol.hpp"
#include "errors.hpp"
#include "fock_core.hpp"
#include "io.hpp"
#include "lattice_dynamics.hpp"
#include "phase_space.hpp"

#ifndef XSQUEEZE_VERSION
#define XSQUEEZE_VERSION "0.0.0"
#endif

namespace xsq {

inline constexpr const char* kVersion = XSQUEEZE_VERSION;

enum class ScenarioKind { derive_params, squeeze_sim, csqz_fidelity, xstate, charfun, zeros };

inline const std::map<std::string, ScenarioKind>& scenario_names() {
  static const std::map<std::string, ScenarioKind> names{
      {"derive-params", ScenarioKind::derive_params}, {"squeeze-sim", ScenarioKind::squeeze_sim},
      {"csqz-fidelity", ScenarioKind::csqz_fidelity}, {"xstate", ScenarioKind::xstate},
      {"charfun", ScenarioKind::charfun},             {"zeros", ScenarioKind::zeros}};
  return names;
}

inline std::string to_string(ScenarioKind k) {
  for (const auto& [name, kind] : scenario_names())
    if (kind == k) return name;
  return "?";
}

// Exit codes of run()/sweep().
enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_numerical = 2, exit_io = 3, exit_internal = 4 };

// ---------------------------------------------------------------------------
// Config

// Drive as written in a config: ω_d is either absolute or a multiple of ω_e.
struct DriveSpec {
  double epsilon = 0.0;
  std::optional<double> omega_d;
  std::optional<double> omega_d_ratio;
  std::optional<double> theta;
};

struct Numerics {
  std::string solver = "grid";  // grid | fock | both
  std::string model = "full";   // full | quadratic
  std::optional<std::size_t> n_points;
  std::optional<double> x_max;
  std::optional<double> dt;
  std::size_t samples = 200;  // snapshots per time series
  std::size_t n_max = 10;
  std::optional<std::size_t> dim;
  std::size_t subspace = 4;
  bool audit = true;
  double audit_tol = 1e-6;
  std::string method = "numeric";  // charfun: numeric | closed-form
  std::optional<double> half_width;
  std::optional<std::size_t> points;
  bool wigner = true;
  double u_max = 25.0;
  double du = 1e-4;
  std::size_t trials = 0;  // xstate: Monte Carlo repetitions of the measurement
};

struct SweepSpec {
  std::string parameter;  // dotted path, e.g. trap.phi
  std::vector<double> values;
  std::size_t workers = 1;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::derive_params;
  std::optional<TrapConfig> trap;
  std::optional<DriveSpec> drive;
  std::optional<double> r;
  std::optional<Parity> parity;
  std::optional<std::string> mode;
  std::optional<double> t_final;
  std::optional<double> periods;
  Numerics numerics;
  std::optional<std::string> output_dir;
  OutputFormat format = OutputFormat::csv;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
  json raw;  // config as read, echoed into the manifest
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw config_error(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw config_error("unknown key '" + key + "' in " + where);
}

inline double get_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw config_error("missing required key '" + key + "' in " + where);
  const json& v = obj.at(key);
  if (!v.is_number()) throw config_error("'" + key + "' in " + where + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw config_error("'" + key + "' in " + where + " must be finite");
  return d;
}

inline std::optional<double> opt_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  return get_number(obj, key, where);
}

inline std::optional<std::size_t> opt_count(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw config_error("'" + key + "' in " + where + " must be a non-negative integer");
  return v.get<std::size_t>();
}

inline std::optional<std::string> opt_string(const json& obj, const std::string& key, const std::string& where,
                                             const std::set<std::string>& choices = {}) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  if (!v.is_string()) throw config_error("'" + key + "' in " + where + " must be a string");
  const auto s = v.get<std::string>();
  if (!choices.empty() && !choices.count(s)) {
    std::string list;
    for (const auto& c : choices) list += (list.empty() ? "" : "|") + c;
    throw config_error("'" + key + "' in " + where + " must be one of " + list + ", got '" + s + "'");
  }
  return s;
}

inline std::optional<bool> opt_bool(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  if (!obj.at(key).is_boolean()) throw config_error("'" + key + "' in " + where + " must be true or false");
  return obj.at(key).get<bool>();
}

inline TrapConfig parse_trap(const json& j) {
  reject_unknown(j, {"omega_t", "eta_g", "phi"}, "trap");
  TrapConfig t;
  t.omega_t = get_number(j, "omega_t", "trap");
  t.eta_g = get_number(j, "eta_g", "trap");
  t.phi = get_number(j, "phi", "trap");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("trap: ") + e.what());
  }
  return t;
}

inline DriveSpec parse_drive(const json& j) {
  reject_unknown(j, {"epsilon", "omega_d", "omega_d_ratio", "theta"}, "drive");
  DriveSpec d;
  d.epsilon = get_number(j, "epsilon", "drive");
  if (d.epsilon < 0.0) throw config_error("drive.epsilon must be >= 0");
  d.omega_d = opt_number(j, "omega_d", "drive");
  d.omega_d_ratio = opt_number(j, "omega_d_ratio", "drive");
  d.theta = opt_number(j, "theta", "drive");
  if (d.omega_d && d.omega_d_ratio) throw config_error("drive: give omega_d or omega_d_ratio, not both");
  if ((d.omega_d && *d.omega_d < 0.0) || (d.omega_d_ratio && *d.omega_d_ratio < 0.0))
    throw config_error("drive frequency must be >= 0");
  return d;
}

inline Numerics parse_numerics(const json& j) {
  reject_unknown(j,
                 {"solver", "model", "n_points", "x_max", "dt", "samples", "n_max", "dim", "subspace", "audit",
                  "audit_tol", "method", "half_width", "points", "wigner", "u_max", "du", "trials"},
                 "numerics");
  Numerics n;
  const std::string w = "numerics";
  if (auto v = opt_string(j, "solver", w, {"grid", "fock", "both"})) n.solver = *v;
  if (auto v = opt_string(j, "model", w, {"full", "quadratic"})) n.model = *v;
  n.n_points = opt_count(j, "n_points", w);
  n.x_max = opt_number(j, "x_max", w);
  n.dt = opt_number(j, "dt", w);
  if (auto v = opt_count(j, "samples", w)) n.samples = *v;
  if (auto v = opt_count(j, "n_max", w)) n.n_max = *v;
  n.dim = opt_count(j, "dim", w);
  if (auto v = opt_count(j, "subspace", w)) n.subspace = *v;
  if (auto v = opt_bool(j, "audit", w)) n.audit = *v;
  if (auto v = opt_number(j, "audit_tol", w)) n.audit_tol = *v;
  if (auto v = opt_string(j, "method", w, {"numeric", "closed-form"})) n.method = *v;
  n.half_width = opt_number(j, "half_width", w);
  n.points = opt_count(j, "points", w);
  if (auto v = opt_bool(j, "wigner", w)) n.wigner = *v;
  if (auto v = opt_number(j, "u_max", w)) n.u_max = *v;
  if (auto v = opt_number(j, "du", w)) n.du = *v;
  if (auto v = opt_count(j, "trials", w)) n.trials = *v;
  if (n.samples == 0) throw config_error("numerics.samples must be >= 1");
  if (n.dt && !(*n.dt > 0.0)) throw config_error("numerics.dt must be > 0");
  if (n.x_max && !(*n.x_max > 0.0)) throw config_error("numerics.x_max must be > 0");
  if (n.dim && *n.dim < 2) throw config_error("numerics.dim must be >= 2");
  if (n.n_points && (*n.n_points < 128 || (*n.n_points & (*n.n_points - 1)) != 0))
    throw config_error("numerics.n_points must be a power of two >= 128");
  if (n.points && *n.points < 2) throw config_error("numerics.points must be >= 2");
  if (n.half_width && !(*n.half_width > 0.0)) throw config_error("numerics.half_width must be > 0");
  if (!(n.u_max > 0.0) || !(n.du > 0.0)) throw config_error("numerics.u_max and numerics.du must be > 0");
  if (!(n.audit_tol > 0.0)) throw config_error("numerics.audit_tol must be > 0");
  return n;
}

inline SweepSpec parse_sweep(const json& j) {
  reject_unknown(j, {"parameter", "values", "workers"}, "sweep");
  SweepSpec s;
  auto p = opt_string(j, "parameter", "sweep");
  if (!p || p->empty()) throw config_error("sweep.parameter is required");
  s.parameter = *p;
  if (!j.contains("values") || !j.at("values").is_array() || j.at("values").empty())
    throw config_error("sweep.values must be a non-empty array of numbers");
  for (const auto& v : j.at("values")) {
    if (!v.is_number()) throw config_error("sweep.values must contain only numbers");
    s.values.push_back(v.get<double>());
  }
  if (auto w = opt_count(j, "workers", "sweep")) s.workers = std::max<std::size_t>(1, *w);
  return s;
}

inline void require(bool present, const std::string& what, ScenarioKind kind) {
  if (!present) throw config_error("scenario " + to_string(kind) + " requires " + what);
}

}  // namespace detail

// Strict parse: unknown keys anywhere are rejected; physics has no defaults.
inline ScenarioConfig parse_config(const json& j) {
  using namespace detail;
  reject_unknown(j,
                 {"scenario", "trap", "drive", "r", "parity", "mode", "t_final", "periods", "numerics", "output",
                  "rng_seed", "sweep"},
                 "config");
  ScenarioConfig c;
  c.raw = j;
  const auto name = opt_string(j, "scenario", "config");
  if (!name) throw config_error("missing required key 'scenario'");
  const auto it = scenario_names().find(*name);
  if (it == scenario_names().end()) throw config_error("unknown scenario '" + *name + "'");
  c.kind = it->second;

  if (j.contains("trap")) c.trap = parse_trap(j.at("trap"));
  if (j.contains("drive")) c.drive = parse_drive(j.at("drive"));
  c.r = opt_number(j, "r", "config");
  if (c.r && *c.r < 0.0) throw config_error("r must be >= 0");
  if (auto p = opt_string(j, "parity", "config", {"even", "odd"})) c.parity = *p == "even" ? Parity::even : Parity::odd;
  c.mode = opt_string(j, "mode", "config", {"ideal", "physical"});
  c.t_final = opt_number(j, "t_final", "config");
  c.periods = opt_number(j, "periods", "config");
  if (j.contains("numerics")) c.numerics = parse_numerics(j.at("numerics"));
  if (j.contains("output")) {
    reject_unknown(j.at("output"), {"dir", "format"}, "output");
    c.output_dir = opt_string(j.at("output"), "dir", "output");
    if (auto f = opt_string(j.at("output"), "format", "output")) c.format = parse_format(*f);
  }
  if (j.contains("rng_seed")) {
    const json& seed = j.at("rng_seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
      throw config_error("rng_seed must be a non-negative integer");
    c.seed = j.at("rng_seed").get<std::uint64_t>();
  }
  if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));

  const auto k = c.kind;
  switch (k) {
    case ScenarioKind::derive_params:
      require(c.trap.has_value(), "trap", k);
      require(c.drive.has_value(), "drive", k);
      break;
    case ScenarioKind::squeeze_sim: {
      require(c.trap.has_value(), "trap", k);
      require(c.drive.has_value(), "drive", k);
      require(c.drive->theta.has_value(), "drive.theta", k);
      require(c.drive->omega_d || c.drive->omega_d_ratio, "drive.omega_d or drive.omega_d_ratio", k);
      const int durations = int(c.r.has_value()) + int(c.t_final.has_value()) + int(c.periods.has_value());
      if (durations != 1) throw config_error("squeeze-sim needs exactly one of r, t_final, periods");
      break;
    }
    case ScenarioKind::csqz_fidelity:
      require(c.trap.has_value(), "trap", k);
      require(c.drive.has_value(), "drive", k);
      require(c.drive->theta.has_value(), "drive.theta", k);
      require(c.drive->omega_d || c.drive->omega_d_ratio, "drive.omega_d or drive.omega_d_ratio", k);
      require(c.r.has_value(), "r", k);
      break;
    case ScenarioKind::xstate:
      require(c.r.has_value(), "r", k);
      require(c.mode.has_value(), "mode", k);
      if (*c.mode == "physical") {
        require(c.trap.has_value(), "trap (physical mode)", k);
        require(c.drive.has_value(), "drive (physical mode)", k);
        require(c.drive->omega_d_ratio.has_value(), "drive.omega_d_ratio (physical mode)", k);
      }
      break;
    case ScenarioKind::charfun:
    case ScenarioKind::zeros:
      require(c.r.has_value(), "r", k);
      require(c.parity.has_value(), "parity", k);
      if (*c.parity == Parity::odd && !(*c.r > 0.0)) throw config_error("odd parity requires r > 0");
      break;
  }
  return c;
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline ScenarioConfig load_config(const fs::path& path) { return parse_config(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Run context

class RunLog {
 public:
  void line(const std::string& s) { lines_ << s << '\n'; }
  std::string text() const { return lines_.str(); }

 private:
  std::ostringstream lines_;
};

struct RunContext {
  RunWriter& out;
  RunLog& log;
  json audit = json::object();
  json summary = json::object();  // scalar results, merged into sweep tables
  std::string frame;
};

namespace detail {

inline DriveConfig resolve_drive(const TrapConfig& trap, const DriveSpec& spec) {
  DriveConfig d;
  d.epsilon = spec.epsilon;
  d.theta = spec.theta.value_or(0.0);
  const DerivedParams p = derive_params(trap, d);
  if (spec.omega_d) d.omega_d = *spec.omega_d;
  else if (spec.omega_d_ratio) d.omega_d = *spec.omega_d_ratio * p.omega_e;
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenarios

inline void run_derive_params(const ScenarioConfig& c, RunContext& ctx) {
  const DriveConfig drive = detail::resolve_drive(*c.trap, *c.drive);
  const DerivedParams d = derive_params(*c.trap, drive);
  Table t{{"omega_e", "sigma_ratio", "eta_e", "g_rate", "t_for_r1"}, {}};
  const double t1 = d.g_rate > 0.0 ? time_for_squeezing(d, 1.0) : std::numeric_limits<double>::infinity();
  t.add_row({d.omega_e, d.sigma_ratio, d.eta_e, d.g_rate, t1});
  ctx.out.table("params", "params", t);
  ctx.summary = json{{"omega_e", d.omega_e}, {"sigma_ratio", d.sigma_ratio}, {"eta_e", d.eta_e},
                     {"g_rate", d.g_rate}, {"t_for_r1", json_number(t1)}};
  ctx.log.line("omega_e=" + format_number(d.omega_e) + " eta_e=" + format_number(d.eta_e) +
               " G=" + format_number(d.g_rate));
}

inline std::size_t comparison_dim(double r_est) {
  return std::max<std::size_t>(128, recommended_dim(std::min(r_est, 3.0), 1e-14) * 3 / 2);
}

inline void run_squeeze_sim(const ScenarioConfig& c, RunContext& ctx) {
  const TrapConfig trap = *c.trap;
  const DriveConfig drive = detail::resolve_drive(trap, *c.drive);
  const DerivedParams d = derive_params(trap, drive);
  double t_final = 0.0;
  if (c.r) t_final = time_for_squeezing(d, *c.r);
  else if (c.t_final) t_final = *c.t_final;
  else {
    if (!(drive.omega_d > 0.0)) throw config_error("periods needs a non-zero drive frequency");
    t_final = *c.periods * 2.0 * pi / drive.omega_d;
  }
  if (!(t_final > 0.0)) throw config_error("run duration must be > 0");

  const Numerics& n = c.numerics;
  const double r_est = std::min(0.5 * d.g_rate * t_final, 2.5);
  GridConfig grid = default_grid(drive, r_est, t_final);
  if (n.n_points) grid.n_points = *n.n_points;
  if (n.x_max) grid.x_max = *n.x_max;
  if (n.dt) grid.dt = *n.dt;
  const LatticeModel model = n.model == "full" ? LatticeModel::full : LatticeModel::quadratic;
  const std::size_t steps = detail::step_count(t_final, grid.dt);
  PropagationOptions popt;
  popt.model = model;
  popt.snapshot_stride = std::max<std::size_t>(1, steps / n.samples);

  OverlapOptions oopt;
  oopt.dim = n.dim.value_or(comparison_dim(r_est));
  oopt.n_max = n.n_max;
  ctx.frame = "interaction picture of H_e0 (omega_e, sigma_e basis)";
  ctx.log.line("t_final=" + format_number(t_final) + " steps=" + std::to_string(steps) +
               " dt=" + format_number(grid.dt) + " solver=" + n.solver);

  std::optional<GridState> grid_final;
  std::optional<MotionalState> fock_final;
  auto emit = [&](const OverlapSeries& series, const std::string& tag) {
    Table t{{"t", "fidelity"}, {}};
    for (std::size_t k = 0; k <= n.n_max; ++k) t.columns.push_back("P" + std::to_string(k));
    t.columns.push_back("norm_defect");
    t.columns.push_back("boundary_leak");
    for (const auto& s : series.samples) {
      std::vector<double> row{s.t, s.fidelity};
      for (std::size_t k = 0; k <= n.n_max; ++k) row.push_back(k < s.populations.size() ? s.populations[k] : 0.0);
      row.push_back(s.norm_defect);
      row.push_back(s.boundary_leak);
      t.add_row(row);
    }
    ctx.out.table("overlap" + tag, "overlap", t);
    ctx.summary["min_fidelity" + tag] = series.min_fidelity();
    ctx.summary["final_fidelity" + tag] = series.samples.back().fidelity;
  };

  const bool use_grid = n.solver != "fock";
  const bool use_fock = n.solver != "grid";
  const std::string grid_tag = use_fock ? "_grid" : "";
  const std::string fock_tag = use_grid ? "_fock" : "";

  if (use_grid) {
    const PositionGrid pg(grid.n_points, grid.x_max);
    const GridState initial = oscillator_state(pg, 0, d.sigma_ratio);
    const GridEvolution evo = propagate_grid(initial, trap, drive, grid, popt);
    const OverlapSeries series = overlap_series(evo, d, drive.theta, oopt);
    emit(series, grid_tag);
    grid_final = evo.final_state();
    if (n.audit) {
      const StepSizeAudit a = audit_step_size(initial, trap, drive, grid, n.audit_tol, popt, false);
      ctx.audit["step_size"] = json{{"dt", a.dt}, {"fidelity_deficit", a.fidelity_deficit},
                                    {"tolerance", a.tolerance}, {"passed", a.passed}};
      ctx.log.line("step-size audit: deficit=" + format_number(a.fidelity_deficit));
      if (!a.passed)
        throw step_size_error("halving dt changes the final state by fidelity " +
                              format_number(a.fidelity_deficit) + " > " + format_number(a.tolerance));
    }
    double max_leak = 0.0;
    for (const auto& s : evo.snapshots) max_leak = std::max(max_leak, s.boundary_leak);
    ctx.audit["boundary_leak_max"] = max_leak;
  }
  if (use_fock) {
    const std::size_t dim = oopt.dim;
    const MotionalState initial = e_to_g_basis(MotionalState::vacuum(dim), d);
    FockStepConfig fc{grid.dt, t_final, popt.snapshot_stride};
    const FockEvolution evo = propagate_fock(initial, trap, drive, fc, popt);
    emit(overlap_series(evo, d, drive.theta, oopt), fock_tag);
    fock_final = evo.final_state();
    double max_tail = 0.0;
    for (const auto& s : evo.snapshots) max_tail = std::max(max_tail, s.tail_probability);
    ctx.audit["fock_tail_max"] = max_tail;
  }
  if (grid_final && fock_final) {
    const MotionalState from_grid = fock_from_grid(*grid_final, fock_final->dim(), 1.0);
    const double deficit = 1.0 - fidelity(from_grid, *fock_final);
    ctx.audit["cross_solver_deficit"] = deficit;
    ctx.summary["cross_solver_deficit"] = deficit;
  }

  // Final phonon distribution against the ideal squeezed state.
  const double r_final = 0.5 * d.g_rate * t_final;
  ctx.summary["r_final"] = r_final;
  MotionalState final_e = grid_final ? fock_from_grid(*grid_final, oopt.dim, d.sigma_ratio, 1e-6)
                                     : g_to_e_basis(*fock_final, d).resized(oopt.dim);
  final_e = to_interaction_picture(final_e, d.omega_e, t_final);
  std::optional<MotionalState> ideal;
  if (squeezed_tail_probability(r_final, oopt.dim) < 1e-10)
    ideal = squeezed_state_analytic(SqueezeParam(r_final, drive.theta), oopt.dim);
  Table pops{{"n", "P_numeric", "P_ideal"}, {}};
  for (std::size_t k = 0; k <= std::max<std::size_t>(n.n_max, 20) && k < oopt.dim; ++k)
    pops.add_row({static_cast<double>(k), std::norm(final_e[k]),
                  ideal ? std::norm((*ideal)[k]) : std::numeric_limits<double>::quiet_NaN()});
  ctx.out.table("populations", "populations", pops);
  ctx.summary["vacuum_population_final"] = std::norm(final_e[0]);
}

inline void run_csqz_fidelity(const ScenarioConfig& c, RunContext& ctx) {
  const TrapConfig trap = *c.trap;
  const DriveConfig drive = detail::resolve_drive(trap, *c.drive);
  const DerivedParams d = derive_params(trap, drive);
  PhysicalGateOptions opt;
  opt.dim = c.numerics.dim.value_or(comparison_dim(*c.r));
  opt.subspace = c.numerics.subspace;
  opt.dt = c.numerics.dt.value_or(0.0);
  opt.model = c.numerics.model == "full" ? LatticeModel::full : LatticeModel::quadratic;
  const double duration = time_for_squeezing(d, *c.r);
  const PhysicalGateReport rep = csqz_physical(trap, drive, duration, opt);
  ctx.frame = "interaction picture of H_g0";
  json out{{"duration", rep.duration},
           {"target", {{"r", rep.target.r}, {"theta", rep.target.theta}}},
           {"derived", {{"omega_e", d.omega_e}, {"eta_e", d.eta_e}, {"g_rate", d.g_rate}}},
           {"dim", opt.dim},
           {"subspace", opt.subspace},
           {"process_fidelity", rep.process_fidelity},
           {"process_fidelity_optimized", rep.process_fidelity_optimized},
           {"optimal_rotation", rep.optimal_rotation},
           {"frame", ctx.frame}};
  ctx.out.document("gate.json", "gate", out);
  ctx.summary = json{{"process_fidelity", rep.process_fidelity},
                     {"process_fidelity_optimized", rep.process_fidelity_optimized},
                     {"optimal_rotation", rep.optimal_rotation}};
  ctx.log.line("process fidelity " + format_number(rep.process_fidelity) + " (optimized " +
               format_number(rep.process_fidelity_optimized) + ")");
}

inline json outcome_json(const ProtocolOutcome& o, double fid) {
  return json{{"branch", to_string(o.branch)}, {"probability", o.probability},
              {"fidelity_to_analytic", fid}, {"frame", o.frame_tag}};
}

inline void run_xstate(const ScenarioConfig& c, RunContext& ctx) {
  const double r = *c.r;
  const bool physical = *c.mode == "physical";
  std::optional<PhysicalSetup> setup;
  std::size_t dim = c.numerics.dim.value_or(std::max<std::size_t>(64, recommended_dim(r, 1e-14) * 3 / 2));
  if (physical) {
    PhysicalSetup s;
    s.trap = *c.trap;
    s.epsilon = c.drive->epsilon;
    s.resonance_ratio = *c.drive->omega_d_ratio;
    s.gate.dim = dim;
    s.gate.dt = c.numerics.dt.value_or(0.0);
    s.gate.model = c.numerics.model == "full" ? LatticeModel::full : LatticeModel::quadratic;
    setup = s;
  }
  const XStateRun run = prepare_xstate(r, dim, physical ? ProtocolMode::physical : ProtocolMode::ideal, c.seed, setup);
  ctx.frame = kFrameHe;

  json steps = json::array();
  for (const auto& s : run.steps) {
    json top = json::array();
    for (const auto& [level, p] : s.top_populations) top.push_back(json{{"n", level}, {"p", p}});
    steps.push_back(json{{"step", s.label}, {"norm_g", s.norm_g}, {"norm_e", s.norm_e}, {"top_populations", top}});
  }
  json transcript{{"r", r},
                  {"mode", *c.mode},
                  {"dim", dim},
                  {"seed", c.seed},
                  {"steps", steps},
                  {"branches", json::array({outcome_json(run.branches[0], run.fidelity_to_analytic[0]),
                                            outcome_json(run.branches[1], run.fidelity_to_analytic[1])})},
                  {"outcome", outcome_json(run.sampled, run.sampled_fidelity)},
                  {"analytic_probability", {{"g", xstate_branch_probability(Parity::odd, r)},
                                            {"e", xstate_branch_probability(Parity::even, r)}}}};

  if (c.numerics.trials > 0) {
    ProtocolRng root(c.seed);
    std::size_t count_g = 0;
    for (std::size_t k = 0; k < c.numerics.trials; ++k) {
      ProtocolRng rng = root.split(k);
      if (rng.uniform() < run.branches[0].probability) ++count_g;
    }
    transcript["monte_carlo"] = json{{"trials", c.numerics.trials}, {"count_g", count_g},
                                     {"count_e", c.numerics.trials - count_g}};
    ctx.summary["frequency_g"] = static_cast<double>(count_g) / static_cast<double>(c.numerics.trials);
  }
  ctx.out.document("transcript.json", "transcript", transcript);

  Table pops{{"n", "P_g_branch", "P_e_branch"}, {}};
  const auto pg = phonon_distribution(run.branches[0].post_state);
  const auto pe = phonon_distribution(run.branches[1].post_state);
  for (std::size_t k = 0; k <= std::max<std::size_t>(c.numerics.n_max, 20) && k < dim; ++k)
    pops.add_row({static_cast<double>(k), pg[k], pe[k]});
  ctx.out.table("populations", "populations", pops);

  ctx.summary["probability_g"] = run.branches[0].probability;
  ctx.summary["probability_e"] = run.branches[1].probability;
  ctx.summary["fidelity_g"] = run.fidelity_to_analytic[0];
  ctx.summary["fidelity_e"] = run.fidelity_to_analytic[1];
  ctx.summary["sampled_branch_is_e"] = run.sampled.branch == Branch::e ? 1.0 : 0.0;
  ctx.log.line("P(g)=" + format_number(run.branches[0].probability) + " P(e)=" +
               format_number(run.branches[1].probability) + " sampled=" + to_string(run.sampled.branch));
}

inline void run_charfun(const ScenarioConfig& c, RunContext& ctx) {
  const XStateSpec spec(*c.parity, *c.r);
  PhaseGrid grid = default_phase_grid(spec.r);
  if (c.numerics.half_width || c.numerics.points)
    grid = make_phase_grid(c.numerics.half_width.value_or(grid.x_values.back()),
                           c.numerics.points.value_or(grid.nx()));
  const bool numeric = c.numerics.method == "numeric";
  const std::size_t dim = c.numerics.dim.value_or(std::max<std::size_t>(256, recommended_dim(spec.r, 1e-16)));
  json meta{{"quantity", "characteristic function C(alpha) = <psi|D(alpha)|psi>"},
            {"convention", "alpha = x + i p; D(alpha) = exp(alpha a^dag - alpha^* a); X = (a + a^dag)/sqrt(2)"},
            {"orientation", "rows x, columns p"},
            {"parity", to_string(spec.parity)},
            {"r", spec.r},
            {"method", c.numerics.method},
            {"dim", numeric ? json(dim) : json(nullptr)},
            {"half_width", grid.x_values.back()},
            {"points", grid.nx()}};

  PhaseGrid values;
  std::optional<MotionalState> state;
  if (numeric) {
    state = x_state(spec.parity, spec.r, dim);
    values = char_function_numeric(*state, grid);
    for (const auto& w : values.warnings) ctx.log.line("warning: " + w);
    meta["warnings"] = values.warnings;
    const PhaseGrid closed = char_function_closed_form(spec, grid);
    const double dev = (values.values - closed.values).cwiseAbs().maxCoeff();
    ctx.audit["closed_form_max_deviation"] = dev;
    ctx.summary["closed_form_max_deviation"] = dev;
  } else {
    values = char_function_closed_form(spec, grid);
  }
  ctx.out.grid("charfun", "charfun", values.x_values, values.p_values, values.real(), meta);
  if (numeric) {
    json im = meta;
    im["quantity"] = "imaginary part of the characteristic function";
    ctx.out.grid("charfun_imag", "charfun-imag", values.x_values, values.p_values, values.values.imag(), im);
  }
  const Index cx = static_cast<Index>(values.nx() / 2), cp = static_cast<Index>(values.np() / 2);
  ctx.summary["c_origin"] = values.values(cx, cp).real();
  ctx.summary["c_min"] = values.real().minCoeff();

  if (c.numerics.wigner) {
    const PhaseGrid w = numeric ? wigner_from_parity(*state, grid) : wigner_from_parity(spec, grid);
    json wm = meta;
    wm["quantity"] = "Wigner function from parity";
    wm["convention"] = kWignerConvention;
    ctx.out.grid("wigner", "wigner", w.x_values, w.p_values, w.real(), wm);
    ctx.summary["wigner_origin"] = wigner_point(spec, 0.0, 0.0);
  }
  ctx.frame = "phase space of the motional state (dimensionless quadratures)";
}

inline void run_zeros(const ScenarioConfig& c, RunContext& ctx) {
  const XStateSpec spec(*c.parity, *c.r);
  const auto roots = diagonal_zeros(spec, ZeroSearch{c.numerics.u_max, c.numerics.du});
  Table t{{"index", "u", "x", "residual"}, {}};
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const double x = roots[i];
    t.add_row({static_cast<double>(i), x * x, x, char_function_closed_form(spec, x, x)});
  }
  ctx.out.table("zeros", "zeros", t);

  json decay = json::object();
  for (Axis axis : {Axis::x, Axis::p}) {
    const DecayProfile prof = quadrature_decay_profile(spec, axis);
    decay[axis == Axis::x ? "x" : "p"] =
        json{{"origin", prof.origin},       {"plateau", prof.plateau},     {"level", prof.level},
             {"crossing", prof.crossing},   {"window_lo", prof.window_lo}, {"window_hi", prof.window_hi},
             {"plateau_variation", prof.plateau_variation}};
  }
  decay["reference_e_minus_r"] = std::exp(-spec.r);
  ctx.out.document("decay.json", "decay", decay);

  Table diag{{"x", "C_diagonal"}, {}};
  const double x_hi = std::sqrt(c.numerics.u_max);
  for (std::size_t i = 0; i <= 1000; ++i) {
    const double x = x_hi * static_cast<double>(i) / 1000.0;
    diag.add_row({x, char_function_closed_form(spec, x, x)});
  }
  ctx.out.table("diagonal", "diagonal-profile", diag);

  ctx.summary["zero_count"] = static_cast<double>(roots.size());
  ctx.summary["first_zero_u"] = roots.empty() ? std::numeric_limits<double>::quiet_NaN() : roots[0] * roots[0];
  ctx.summary["crossing_x"] = decay["x"]["crossing"].get<double>();
  ctx.frame = "phase space of the motional state (dimensionless quadratures)";
}

// ---------------------------------------------------------------------------
// run / sweep

struct RunOptions {
  std::optional<fs::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<OutputFormat> format;
  std::optional<std::size_t> workers;
};

struct RunResult {
  int exit_code = exit_ok;
  std::string error;
  fs::path dir;
  json summary = json::object();
};

inline int exit_code_for(const std::exception_ptr& ep, std::string& message) {
  try {
    std::rethrow_exception(ep);
  } catch (const config_error& e) {
    message = std::string("config error: ") + e.what();
    return exit_config;
  } catch (const numerical_health_error& e) {
    message = std::string("numerical health: ") + e.what();
    return exit_numerical;
  } catch (const io_error& e) {
    message = std::string("I/O error: ") + e.what();
    return exit_io;
  } catch (const fs::filesystem_error& e) {
    message = std::string("I/O error: ") + e.what();
    return exit_io;
  } catch (const std::invalid_argument& e) {
    message = std::string("invalid parameter: ") + e.what();
    return exit_config;
  } catch (const std::exception& e) {
    message = std::string("internal error: ") + e.what();
    return exit_internal;
  }
}

namespace detail {

inline void dispatch(const ScenarioConfig& c, RunContext& ctx) {
  switch (c.kind) {
    case ScenarioKind::derive_params: return run_derive_params(c, ctx);
    case ScenarioKind::squeeze_sim: return run_squeeze_sim(c, ctx);
    case ScenarioKind::csqz_fidelity: return run_csqz_fidelity(c, ctx);
    case ScenarioKind::xstate: return run_xstate(c, ctx);
    case ScenarioKind::charfun: return run_charfun(c, ctx);
    case ScenarioKind::zeros: return run_zeros(c, ctx);
  }
}

inline fs::path resolve_out(const ScenarioConfig& c, const RunOptions& opt) {
  if (opt.out_dir) return *opt.out_dir;
  if (c.output_dir) return *c.output_dir;
  throw config_error("no output directory: set output.dir or pass --out");
}

}  // namespace detail

// Runs one (non-sweep) scenario into `dir`. Always leaves a manifest behind
// once the directory exists; the exit code names the failure family.
inline RunResult run_single(ScenarioConfig c, const fs::path& dir) {
  RunResult result;
  result.dir = dir;
  const auto start = std::chrono::steady_clock::now();
  std::optional<RunWriter> writer;
  RunLog log;
  json audit = json::object();
  std::string frame;
  try {
    writer.emplace(dir, c.format);
    log.line("xsqueeze " + std::string(kVersion) + " scenario=" + to_string(c.kind) + " seed=" + std::to_string(c.seed));
    RunContext ctx{*writer, log};
    detail::dispatch(c, ctx);
    audit = ctx.audit;
    frame = ctx.frame;
    result.summary = ctx.summary;
  } catch (...) {
    result.exit_code = exit_code_for(std::current_exception(), result.error);
    log.line(result.error);
  }
  if (!writer) return result;

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log.line("status=" + std::string(result.exit_code == exit_ok ? "ok" : "failed") +
           " duration_s=" + format_number(seconds));
  json manifest{{"schema_version", kSchemaVersion},
                {"tool", "xsqueeze"},
                {"version", kVersion},
                {"scenario", to_string(c.kind)},
                {"seed", c.seed},
                {"format", to_string(c.format)},
                {"frame", frame},
                {"config", c.raw},
                {"status", result.exit_code == exit_ok ? "ok" : "failed"},
                {"exit_code", result.exit_code},
                {"error", result.error},
                {"audit", audit},
                {"summary", result.summary},
                {"files", writer->files()},
                {"log", "run.log"},
                {"duration_s", seconds}};
  try {
    detail::write_text(dir / "run.log", log.text());
    detail::write_text(dir / "manifest.json", dump(manifest));
  } catch (...) {
    std::string msg;
    const int code = exit_code_for(std::current_exception(), msg);
    if (result.exit_code == exit_ok) {
      result.exit_code = code;
      result.error = msg;
    }
  }
  return result;
}

namespace detail {

// Sets a dotted path (e.g. "trap.phi") inside a config tree; the field must exist.
inline void set_path(json& j, const std::string& dotted, double value) {
  json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw config_error("empty sweep parameter");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i]))
      throw config_error("sweep parameter '" + dotted + "' does not name a config field");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back()) || !(*node)[parts.back()].is_number())
    throw config_error("sweep parameter '" + dotted + "' must name an existing numeric field");
  (*node)[parts.back()] = value;
}

}  // namespace detail

// One sub-run per value in run_<k>/, executed by a worker pool; summary table
// keyed by the swept value. Failed sub-runs stay in the table with their error.
inline RunResult run_sweep(const ScenarioConfig& c, const fs::path& dir, std::size_t workers) {
  RunResult result;
  result.dir = dir;
  const SweepSpec& sweep = *c.sweep;
  const auto start = std::chrono::steady_clock::now();

  std::vector<ScenarioConfig> subs;
  for (double v : sweep.values) {
    json j = c.raw;
    j.erase("sweep");
    detail::set_path(j, sweep.parameter, v);
    ScenarioConfig sc = parse_config(j);
    sc.seed = c.seed;
    sc.format = c.format;
    subs.push_back(std::move(sc));
  }

  RunWriter writer(dir, c.format);
  std::vector<RunResult> results(subs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < subs.size(); k = next++) {
      char name[32];
      std::snprintf(name, sizeof name, "run_%03zu", k);
      results[k] = run_single(subs[k], dir / name);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(workers, subs.size()));
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<std::string> keys;
  for (const auto& r : results)
    for (const auto& [key, value] : r.summary.items())
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  Table t{{sweep.parameter, "run", "status"}, {}};
  for (const auto& k : keys) t.columns.push_back(k);
  t.columns.push_back("error");
  json runs = json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const RunResult& r = results[k];
    std::vector<std::string> row{format_number(sweep.values[k]), r.dir.filename().string(),
                                 r.exit_code == exit_ok ? "ok" : "failed"};
    for (const auto& key : keys) {
      const json v = r.summary.contains(key) ? r.summary.at(key) : json(nullptr);
      row.push_back(v.is_number() ? format_number(v.get<double>()) : "nan");
    }
    row.push_back(r.error);
    t.push(std::move(row));
    runs.push_back(json{{"value", sweep.values[k]}, {"dir", r.dir.filename().string()}, {"exit_code", r.exit_code},
                        {"error", r.error}});
    if (r.exit_code != exit_ok && result.exit_code == exit_ok) {
      result.exit_code = r.exit_code;
      result.error = r.error;
    }
  }
  writer.table("summary", "sweep-summary", t);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"schema_version", kSchemaVersion},
                {"tool", "xsqueeze"},
                {"version", kVersion},
                {"scenario", to_string(c.kind)},
                {"seed", c.seed},
                {"format", to_string(c.format)},
                {"config", c.raw},
                {"sweep", {{"parameter", sweep.parameter}, {"values", sweep.values}, {"workers", n_workers}}},
                {"status", result.exit_code == exit_ok ? "ok" : "failed"},
                {"exit_code", result.exit_code},
                {"error", result.error},
                {"runs", runs},
                {"files", writer.files()},
                {"duration_s", seconds}};
  detail::write_text(dir / "manifest.json", dump(manifest));
  return result;
}

// Entry point behind `run`: loads, applies overrides, executes.
inline RunResult run(const fs::path& config_path, const RunOptions& opt = {}) {
  RunResult result;
  try {
    ScenarioConfig c = load_config(config_path);
    if (opt.seed) c.seed = *opt.seed;
    if (opt.format) c.format = *opt.format;
    const fs::path dir = detail::resolve_out(c, opt);
    if (c.sweep) return run_sweep(c, dir, opt.workers.value_or(c.sweep->workers));
    return run_single(std::move(c), dir);
  } catch (...) {
    result.exit_code = exit_code_for(std::current_exception(), result.error);
    return result;
  }
}

}  // namespace xsq
