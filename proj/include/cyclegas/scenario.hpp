// Scenario front end: parse a config file (dotted key-value text, or JSON),
// validate it, run the requested mode and emit a JSON report plus CSV tables.

#ifndef CYCLEGAS_SCENARIO_HPP
#define CYCLEGAS_SCENARIO_HPP

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cyclegas/cycle_oracle.hpp"
#include "cyclegas/free_gas.hpp"
#include "cyclegas/meanfield.hpp"
#include "cyclegas/report.hpp"

namespace cyclegas {

// ---------------------------------------------------------------------------
// Config file parsing.

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_number(const std::string& s, double* out) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return false;
    *out = v;
    return true;
  } catch (...) {
    return false;
  }
}

inline json parse_scalar(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  double v;
  if (parse_number(s, &v)) {
    if (s.find_first_of(".eE") == std::string::npos &&
        v == std::floor(v) && std::abs(v) < 9e15)
      return static_cast<std::int64_t>(v);
    return v;
  }
  return s;
}

inline json parse_value(const std::string& raw, int line_no) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
  if (s.find(';') != std::string::npos) {
    // list of vectors: "0 0 0; 1 0 0"
    json outer = json::array();
    std::stringstream groups(s);
    std::string group;
    while (std::getline(groups, group, ';')) {
      json inner = json::array();
      std::stringstream items(group);
      std::string item;
      while (items >> item) inner.push_back(parse_scalar(item));
      outer.push_back(inner);
    }
    return outer;
  }
  if (s.find(',') != std::string::npos) {
    json arr = json::array();
    std::stringstream items(s);
    std::string item;
    while (std::getline(items, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) arr.push_back(parse_scalar(t));
    }
    return arr;
  }
  return parse_scalar(s);
}

}  // namespace detail

/// Parse config text: dotted-key assignments, '#' comments; a file whose
/// first character is '{' is parsed as JSON instead.
inline json parse_config_text(const std::string& text) {
  const std::string body = detail::trim(text);
  if (!body.empty() && body.front() == '{') {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON config");
    return j;
  }
  json root = json::object();
  std::stringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    json* node = &root;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) path.push_back(part);
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      node = &(*node)[path[i]];
    (*node)[path.back()] = detail::parse_value(line.substr(eq + 1), line_no);
  }
  return root;
}

inline json load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (buf.str().empty()) throw ConfigError("empty config file " + path.string());
  return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// Resolved scenario configuration.

struct ScenarioConfig {
  std::string mode;
  std::string name = "scenario";
  std::uint64_t seed = 1;

  ModelParams model;
  double free_alpha = -1.0;
  GridSpec grid;
  int angular_order = 64;
  bool grid_auto_kmax = false;

  std::vector<int> q_cutoffs;
  double lambda = 0.0;
  double fd_step = 1e-5;

  SolverOptions solver;

  double oracle_volume = 248.05021344239853;  // (2 pi)^3
  std::vector<std::vector<double>> oracle_modes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  int oracle_n_max = 14;

  McOptions mc;

  std::string out_json = "report.json";
  std::string out_nodes_csv;
  std::string out_sweep_csv;
  std::string out_cycles_csv;
};

namespace detail {

template <typename T>
inline T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (...) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

inline const json& subtree(const json& j, const std::string& key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object())
    throw ConfigError("config section '" + key + "' must be a group");
  return j.at(key);
}

inline std::vector<int> int_list(const json& j, const std::string& name) {
  std::vector<int> out;
  if (j.is_array())
    for (const auto& v : j) out.push_back(v.get<int>());
  else if (j.is_number())
    out.push_back(j.get<int>());
  else
    throw ConfigError("'" + name + "' must be an integer or list of integers");
  return out;
}

}  // namespace detail

inline ScenarioConfig resolve_config(const json& j) {
  ScenarioConfig c;
  if (!j.contains("mode")) throw ConfigError("missing required field 'mode'");
  c.mode = j.at("mode").get<std::string>();
  static const std::vector<std::string> modes = {"free",   "meanfield", "oracle",
                                                 "mc",     "sweep",     "theoremA"};
  if (std::find(modes.begin(), modes.end(), c.mode) == modes.end())
    throw ConfigError("unknown mode '" + c.mode + "'");
  c.name = detail::get_or<std::string>(j, "name", c.mode);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", 1);

  const json& m = detail::subtree(j, "model");
  c.model.beta = detail::get_or(m, "beta", 1.0);
  c.model.mu = detail::get_or(m, "mu", 0.0);
  c.model.mean_field_a = detail::get_or(m, "mean_field_a", 1.0);
  c.model.dimension = detail::get_or(m, "dimension", 3);
  c.model.dispersion_coefficient = detail::get_or(m, "dispersion_coefficient", 1.0);

  const json& k = detail::subtree(j, "kernel");
  const std::string kind = detail::get_or<std::string>(k, "kind", "none");
  if (kind == "none")
    c.model.kernel = KernelSpec::none();
  else if (kind == "gaussian")
    c.model.kernel = KernelSpec::gaussian(detail::get_or(k, "v0", 1.0),
                                          detail::get_or(k, "c", 1.0));
  else if (kind == "exponential")
    c.model.kernel = KernelSpec::exponential(detail::get_or(k, "v0", 1.0),
                                             detail::get_or(k, "c", 1.0));
  else
    throw ConfigError("kernel.kind must be none, gaussian or exponential");

  const json& e = detail::subtree(j, "ensemble");
  if (e.contains("q_cutoffs"))
    c.q_cutoffs = detail::int_list(e.at("q_cutoffs"), "ensemble.q_cutoffs");
  else if (e.contains("q_cutoff"))
    c.q_cutoffs = {detail::get_or(e, "q_cutoff", 64)};
  else if (c.mode == "sweep")
    c.q_cutoffs = {4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
  else if (c.mode == "theoremA")
    c.q_cutoffs = {4, 32, 256};
  else
    c.q_cutoffs = {64};
  c.lambda = detail::get_or(e, "lambda", 0.0);
  c.fd_step = detail::get_or(e, "fd_step", 1e-5);

  c.free_alpha = detail::get_or(detail::subtree(j, "free"), "alpha", -1.0);

  const json& g = detail::subtree(j, "grid");
  c.grid.dimension = c.model.dimension;
  c.grid_auto_kmax = !g.contains("k_max");
  const double auto_kmax = std::sqrt(
      (34.0 / c.model.beta + std::max(c.model.mu, 0.0)) /
      c.model.dispersion_coefficient);
  c.grid.k_max = detail::get_or(g, "k_max", auto_kmax);
  c.grid.panels = detail::get_or(g, "panels", 16);
  c.grid.order = detail::get_or(g, "order", 16);
  c.grid.refine_levels = detail::get_or(g, "refine_levels", 12);
  c.angular_order = detail::get_or(g, "angular_order", 64);

  const json& s = detail::subtree(j, "solver");
  c.solver.tol = detail::get_or(s, "tol", 1e-10);
  c.solver.max_sweeps = detail::get_or(s, "max_sweeps", 20000);
  c.solver.omega = detail::get_or(s, "omega", 0.5);
  c.solver.throw_on_failure = detail::get_or(s, "throw_on_failure", true);

  const json& o = detail::subtree(j, "oracle");
  c.oracle_volume = detail::get_or(o, "volume", c.oracle_volume);
  c.oracle_n_max = detail::get_or(o, "n_max", 14);
  if (o.contains("modes")) {
    c.oracle_modes.clear();
    for (const auto& row : o.at("modes")) {
      std::vector<double> kv;
      for (const auto& x : row) kv.push_back(x.get<double>());
      c.oracle_modes.push_back(kv);
    }
  }

  const json& mcj = detail::subtree(j, "mc");
  c.mc.steps = detail::get_or<std::int64_t>(mcj, "steps", 400000);
  c.mc.burn_in = detail::get_or<std::int64_t>(mcj, "burn_in", 40000);
  c.mc.batches = detail::get_or(mcj, "batches", 32);
  c.mc.q_propose_max = detail::get_or(mcj, "q_propose_max", 4);
  c.mc.q_track_max = detail::get_or(mcj, "q_track_max", 16);
  c.mc.seed = c.seed;

  const json& out = detail::subtree(j, "output");
  c.out_json = detail::get_or<std::string>(out, "json", "report.json");
  c.out_nodes_csv = detail::get_or<std::string>(out, "nodes_csv", "");
  c.out_sweep_csv = detail::get_or<std::string>(out, "sweep_csv", "");
  c.out_cycles_csv = detail::get_or<std::string>(out, "cycles_csv", "");
  return c;
}

/// Static validation: every module precondition reachable without running.
/// Returns diagnostics; `ok` is false on any error.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> errors;
  json resolved;
};

inline ValidationReport validate_config(const json& j) {
  ValidationReport r;
  ScenarioConfig c;
  try {
    c = resolve_config(j);
  } catch (const std::exception& ex) {
    r.ok = false;
    r.errors.emplace_back(ex.what());
    return r;
  }
  const auto fail = [&](const std::string& msg) {
    r.ok = false;
    r.errors.push_back(msg);
  };
  if (!(c.model.beta > 0.0)) fail("model.beta must be > 0");
  if (!(c.model.mean_field_a > 0.0) && (c.mode == "meanfield" || c.mode == "sweep" || c.mode == "theoremA"))
    fail("model.mean_field_a must be > 0: the variational analysis needs the superstable mean-field term");
  if (c.model.mean_field_a < 0.0) fail("model.mean_field_a must be >= 0");
  if (c.model.dimension < 1 || c.model.dimension > 4)
    fail("model.dimension must be in 1..4");
  if (!(c.model.dispersion_coefficient > 0.0))
    fail("model.dispersion_coefficient must be > 0");
  try {
    c.model.kernel.validate();
  } catch (const std::exception& ex) {
    fail(ex.what());
  }
  if (std::abs(c.lambda) > 1.0) fail("ensemble.lambda must satisfy |lambda| <= 1");
  for (int q : c.q_cutoffs)
    if (q < 1) fail("ensemble cutoffs must be >= 1");
  for (std::size_t i = 0; i + 1 < c.q_cutoffs.size(); ++i)
    if (c.q_cutoffs[i] >= c.q_cutoffs[i + 1]) fail("ensemble.q_cutoffs must be strictly increasing");
  if (!(c.grid.k_max > 0.0)) fail("grid.k_max must be > 0");
  if (c.grid.panels < 1) fail("grid.panels must be >= 1");
  if (c.grid.order < 2) fail("grid.order must be >= 2");
  if (c.grid.refine_levels < 0 || c.grid.refine_levels > 48)
    fail("grid.refine_levels must be in 0..48");
  if (c.angular_order < 2) fail("grid.angular_order must be >= 2");
  if (c.mode == "free") {
    if (c.free_alpha > 0.0) fail("free.alpha must be <= 0");
    if (c.free_alpha == 0.0 && c.model.dimension <= 2)
      fail("free.alpha = 0 with dimension <= 2: the occupation integral diverges");
  }
  if (c.mode == "oracle" || c.mode == "mc") {
    if (!(c.oracle_volume > 0.0)) fail("oracle.volume must be > 0");
    if (c.oracle_modes.empty()) fail("oracle.modes must not be empty");
    if (c.oracle_n_max < 1 || c.oracle_n_max > 64)
      fail("oracle.n_max must be in 1..64");
    double eps_min = std::numeric_limits<double>::infinity();
    for (const auto& kv : c.oracle_modes) {
      double e2 = 0.0;
      for (double x : kv) e2 += x * x;
      eps_min = std::min(eps_min, c.model.dispersion_coefficient * e2);
    }
    if (c.model.mu + std::max(c.lambda, 0.0) - eps_min >= 0.0)
      fail("oracle: need mu + lambda < min mode energy for a finite tail bound");
  }
  if (!(c.solver.tol > 0.0)) fail("solver.tol must be > 0");
  if (c.solver.max_sweeps < 1) fail("solver.max_sweeps must be >= 1");
  if (!(c.solver.omega > 0.0 && c.solver.omega <= 1.0))
    fail("solver.omega must be in (0, 1]");
  if (c.mc.steps < c.mc.batches) fail("mc.steps must cover at least one step per batch");

  // Echo the resolved configuration so published numbers are reproducible.
  json res;
  res["mode"] = c.mode;
  res["name"] = c.name;
  res["seed"] = c.seed;
  res["model"] = {{"beta", c.model.beta},
                  {"mu", c.model.mu},
                  {"mean_field_a", c.model.mean_field_a},
                  {"dimension", c.model.dimension},
                  {"dispersion_coefficient", c.model.dispersion_coefficient}};
  const char* kind_name =
      c.model.kernel.kind == KernelKind::none ? "none"
      : c.model.kernel.kind == KernelKind::gaussian ? "gaussian"
                                                    : "exponential";
  res["kernel"] = {{"kind", kind_name}};
  if (c.model.kernel.kind != KernelKind::none) {
    res["kernel"]["v0"] = c.model.kernel.v0;
    res["kernel"]["c"] = c.model.kernel.c;
  }
  res["grid"] = {{"k_max", c.grid.k_max},
                 {"k_max_auto", c.grid_auto_kmax},
                 {"panels", c.grid.panels},
                 {"order", c.grid.order},
                 {"refine_levels", c.grid.refine_levels},
                 {"angular_order", c.angular_order}};
  res["ensemble"] = {{"q_cutoffs", c.q_cutoffs},
                     {"lambda", c.lambda},
                     {"fd_step", c.fd_step}};
  res["solver"] = {{"tol", c.solver.tol},
                   {"max_sweeps", c.solver.max_sweeps},
                   {"omega", c.solver.omega}};
  if (c.mode == "free") res["free"] = {{"alpha", c.free_alpha}};
  if (c.mode == "oracle" || c.mode == "mc") {
    res["oracle"] = {{"volume", c.oracle_volume},
                     {"modes", c.oracle_modes},
                     {"n_max", c.oracle_n_max}};
  }
  if (c.mode == "mc")
    res["mc"] = {{"steps", c.mc.steps},
                 {"burn_in", c.mc.burn_in},
                 {"batches", c.mc.batches},
                 {"q_propose_max", c.mc.q_propose_max},
                 {"q_track_max", c.mc.q_track_max}};
  r.resolved = std::move(res);
  return r;
}

// ---------------------------------------------------------------------------
// Scenario execution.

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool reproducible = false;
  bool dump_grid = false;
};

struct RunResult {
  json report;
  bool checks_passed = true;
  std::vector<std::filesystem::path> artifacts;
  std::string summary;  // human-readable digest
};

namespace detail {

inline json solution_to_json(const EquilibriumSolution& sol) {
  return {{"regime", regime_name(sol.regime)},
          {"nu_c", sol.measure.condensate},
          {"nu_e", sol.nu_e_total},
          {"rho_total", sol.rho_total},
          {"pressure", sol.pressure},
          {"g_zero", sol.g_zero},
          {"converged", sol.converged},
          {"iterations", sol.iterations},
          {"residual", sol.residual},
          {"density_tail_bound", sol.density_tail_bound}};
}

inline CsvTable nodes_table(const EquilibriumSolution& sol, const RadialGrid& grid) {
  CsvTable t;
  t.header = {"k", "weight", "nu_e", "g"};
  for (std::size_t i = 0; i < grid.size(); ++i)
    t.rows.push_back({grid.nodes()[i], grid.weights()[i],
                      sol.measure.continuous[i], sol.effective_field[i]});
  return t;
}

}  // namespace detail

/// Execute one resolved scenario.  Throws ConfigError for bad configs and
/// NumericalError when a computation cannot complete; check failures are
/// reported, not thrown.
inline RunResult run_scenario(const ScenarioConfig& c, const RunOptions& ropts) {
  RunResult rr;
  std::vector<Check> checks;
  json results;
  std::ostringstream summary;
  summary.precision(10);

  const std::uint64_t seed = ropts.seed.value_or(c.seed);

  if (c.mode == "oracle" || c.mode == "mc") {
    const FiniteVolume vol = make_finite_volume(c.oracle_volume, c.oracle_modes,
                                                c.model.dispersion_coefficient);
    ModifiedEnsembleParams ens{c.q_cutoffs.front(), c.lambda, c.model.beta};
    const auto cyc = xi_cycle_sum(vol, c.model, ens, c.oracle_n_max);
    const auto occ = xi_occupation_sum(vol, c.model, c.oracle_n_max);
    const auto dist = cycle_density(vol, c.model, c.oracle_n_max);
    const double rel_gap = std::abs(cyc.xi - occ.xi) / occ.xi;
    const double tail_rel = (cyc.tail_bound + occ.tail_bound) / occ.xi;
    double sum_p = 0.0;
    for (double pq : dist.p_q) sum_p += pq;

    results["xi_cycle"] = cyc.xi;
    results["xi_occupation"] = occ.xi;
    results["tail_bound_rel"] = tail_rel;
    results["configurations"] = cyc.configurations;
    results["rho"] = dist.rho;
    results["sum_p"] = sum_p;
    checks.push_back(check_le("cross_representation_rel_gap", rel_gap,
                              std::max(1e-8, tail_rel)));
    checks.push_back(
        check_le("cycle_probability_normalization", std::abs(sum_p - 1.0),
                 std::max(1e-10, tail_rel)));
    const auto ld = finite_volume_lambda_derivative(vol, c.model, ens,
                                                    c.oracle_n_max, c.fd_step);
    results["lambda_derivative_fd"] = ld.finite_difference;
    results["lambda_derivative_sum"] = ld.direct_sum;
    checks.push_back(check_le("lambda_derivative_identity", ld.abs_gap, 1e-6));
    summary << "oracle: xi_cycle=" << cyc.xi << " xi_occ=" << occ.xi
            << " rel_gap=" << rel_gap << " sum_p=" << sum_p << "\n";

    if (c.mode == "mc") {
      McOptions mo = c.mc;
      mo.seed = seed;
      const auto mc = mc_sample_cycles(vol, c.model, ens, mo);
      json hist = json::array();
      int worst_q = 0;
      double worst_pull = 0.0;
      for (int q = 1; q < std::min<int>(dist.p_q.size(), mc.dist.p_q.size()); ++q) {
        json row = {{"q", q},
                    {"p_mc", mc.dist.p_q[q]},
                    {"stderr", mc.dist.p_q_err[q]},
                    {"p_exact", dist.p_q[q]}};
        hist.push_back(row);
        if (dist.p_q[q] >= 1e-4 && mc.dist.p_q_err[q] > 0.0) {
          const double pull =
              std::abs(mc.dist.p_q[q] - dist.p_q[q]) / mc.dist.p_q_err[q];
          if (pull > worst_pull) {
            worst_pull = pull;
            worst_q = q;
          }
        }
      }
      results["mc"] = {{"acceptance_rate", mc.acceptance_rate},
                       {"samples", mc.samples},
                       {"seed", seed},
                       {"worst_pull_q", worst_q},
                       {"histogram", hist}};
      checks.push_back(check_le("mc_vs_enumeration_worst_pull", worst_pull, 3.0));
      checks.push_back(check_ge("mc_acceptance_rate_low", mc.acceptance_rate, 0.1));
      checks.push_back(check_le("mc_acceptance_rate_high", mc.acceptance_rate, 0.9));
      summary << "mc: acceptance=" << mc.acceptance_rate
              << " worst_pull=" << worst_pull << " (q=" << worst_q << ")\n";

      if (!c.out_cycles_csv.empty()) {
        CsvTable t;
        t.header = {"q", "rho_q", "p_q", "stderr"};
        for (int q = 1; q < static_cast<int>(mc.dist.p_q.size()); ++q)
          t.rows.push_back({double(q), mc.dist.rho_q[q], mc.dist.p_q[q],
                            mc.dist.p_q_err[q]});
        const auto path = ropts.out_dir / c.out_cycles_csv;
        write_file_atomic(path, t.to_string());
        rr.artifacts.push_back(path);
      }
    } else if (!c.out_cycles_csv.empty()) {
      CsvTable t;
      t.header = {"q", "rho_q", "p_q", "stderr"};
      for (int q = 1; q < static_cast<int>(dist.p_q.size()); ++q)
        t.rows.push_back({double(q), dist.rho_q[q], dist.p_q[q], 0.0});
      const auto path = ropts.out_dir / c.out_cycles_csv;
      write_file_atomic(path, t.to_string());
      rr.artifacts.push_back(path);
    }
  } else {
    // Grid-based modes.
    RadialGrid grid = [&] {
      try {
        return RadialGrid(c.grid);
      } catch (const std::exception& ex) {
        throw NumericalError(ex.what());
      }
    }();
    results["grid"] = {{"nodes", grid.size()},
                       {"self_test_error", grid.self_test_error()},
                       {"k_max", grid.k_max()}};

    if (ropts.dump_grid) {
      CsvTable t;
      t.header = {"k", "weight"};
      for (std::size_t i = 0; i < grid.size(); ++i)
        t.rows.push_back({grid.nodes()[i], grid.weights()[i]});
      const auto path = ropts.out_dir / (c.name + "_grid.csv");
      write_file_atomic(path, t.to_string());
      rr.artifacts.push_back(path);
    }

    if (c.mode == "free") {
      FreeGasParams fp;
      fp.alpha = c.free_alpha;
      fp.beta = c.model.beta;
      fp.dimension = c.model.dimension;
      fp.dispersion_coefficient = c.model.dispersion_coefficient;
      try {
        json table = json::array();
        for (int Q : c.q_cutoffs) {
          const double quad = free_rho_short(fp, Q, grid);
          const double series = free_rho_short_series(fp, Q);
          table.push_back({{"Q", Q}, {"rho_short", quad}, {"rho_short_series", series}});
          checks.push_back(check_le(
              "series_vs_quadrature_Q" + std::to_string(Q),
              std::abs(quad - series) / std::max(std::abs(series), 1e-300), 1e-8));
        }
        results["rho_short_by_Q"] = table;
        const double nu_e = free_density(fp, grid);
        results["nu_e"] = nu_e;
        if (fp.alpha == 0.0) {
          const auto crit = critical_density(fp.beta, fp.dimension, grid);
          results["critical_density"] = crit.value;
          results["critical_density_tail_bound"] = crit.tail_bound;
          summary << "free: critical density = " << crit.value << "\n";
        } else {
          ModifiedEnsembleParams ens{c.q_cutoffs.front(), c.lambda, c.model.beta};
          results["modified_pressure"] = free_modified_pressure(fp, ens, grid);
          const double h = c.fd_step;
          ModifiedEnsembleParams ep{c.q_cutoffs.front(), h, c.model.beta};
          ModifiedEnsembleParams em{c.q_cutoffs.front(), -h, c.model.beta};
          const double fd = (free_modified_pressure(fp, ep, grid) -
                             free_modified_pressure(fp, em, grid)) /
                            (2.0 * h);
          const double direct = free_rho_short(fp, c.q_cutoffs.front(), grid);
          checks.push_back(check_le(
              "lambda_derivative_identity",
              std::abs(fd - direct) / std::max(std::abs(direct), 1e-300), 1e-8));
        }
        summary << "free: nu_e(alpha=" << fp.alpha << ") = " << nu_e << "\n";
      } catch (const std::domain_error& ex) {
        throw NumericalError(ex.what());
      }
    } else {
      const KernelMatrix km =
          angular_average_kernel(c.model.kernel, grid, c.angular_order);

      if (c.mode == "meanfield") {
        ModifiedEnsembleParams ens{c.q_cutoffs.front(), c.lambda, c.model.beta};
        SolverOptions so = c.solver;
        so.throw_on_failure = false;
        const auto sol = solve_equilibrium(c.model, ens, grid, km, so);
        results["solution"] = detail::solution_to_json(sol);
        checks.push_back(check_true("solver_converged", sol.converged));
        checks.push_back(check_le("stationarity_residual", sol.residual,
                                  std::max(c.solver.tol, 1e-9)));
        if (sol.regime == Regime::condensed)
          checks.push_back(check_le("condensed_field_at_zero",
                                    std::abs(sol.g_zero), 1e-9));
        else
          checks.push_back(check_ge("normal_field_at_zero", sol.g_zero, 0.0));
        summary << "meanfield: regime=" << regime_name(sol.regime)
                << " nu_c=" << sol.measure.condensate << " nu_e=" << sol.nu_e_total
                << " P=" << sol.pressure << " residual=" << sol.residual << "\n";
        if (!c.out_nodes_csv.empty()) {
          const auto path = ropts.out_dir / c.out_nodes_csv;
          write_file_atomic(path, detail::nodes_table(sol, grid).to_string());
          rr.artifacts.push_back(path);
        }
      } else if (c.mode == "theoremA") {
        ModifiedEnsembleParams ens0{c.q_cutoffs.back(), 0.0, c.model.beta};
        SolverOptions so = c.solver;
        const auto sol0 = solve_equilibrium(c.model, ens0, grid, km, so);
        results["solution"] = detail::solution_to_json(sol0);
        json table = json::array();
        summary << "theoremA: regime=" << regime_name(sol0.regime) << "\n";
        for (int Q : c.q_cutoffs) {
          const auto tc = theorem_a_check(c.model, Q, c.fd_step, sol0, grid, km, so);
          table.push_back({{"Q", Q},
                           {"analytic", tc.analytic},
                           {"finite_difference", tc.finite_difference},
                           {"rel_gap", tc.rel_gap}});
          checks.push_back(
              check_le("theoremA_rel_gap_Q" + std::to_string(Q), tc.rel_gap, 1e-4));
          summary << "  Q=" << Q << " analytic=" << tc.analytic
                  << " fd=" << tc.finite_difference << " rel_gap=" << tc.rel_gap
                  << "\n";
        }
        results["derivative_table"] = table;
      } else {  // sweep
        SolverOptions so = c.solver;
        const auto rep = [&] {
          try {
            return q_sweep(c.model, c.q_cutoffs, grid, km, so);
          } catch (const std::exception& ex) {
            throw NumericalError(ex.what());
          }
        }();
        results["solution"] = detail::solution_to_json(rep.solution);
        json table = json::array();
        for (const auto& [q, v] : rep.rho_short_by_q)
          table.push_back({{"Q", q}, {"rho_short", v}});
        results["rho_short_by_Q"] = table;
        results["rho_short_limit"] = rep.rho_short_limit;
        results["rho_short_at_max_Q"] = rep.rho_short_at_max_q;
        results["rho_long"] = rep.rho_long;
        results["nu_c"] = rep.nu_c;
        results["nu_e"] = rep.nu_e;
        results["rho_total"] = rep.rho_total;
        results["headline_gap"] = rep.headline_gap;
        results["extrapolation"] = {{"valid", rep.fit.valid},
                                    {"rate", rep.fit.rate},
                                    {"gap_at_max_Q", rep.fit.gap_at_max}};
        if (rep.solution.regime == Regime::condensed)
          checks.push_back(
              check_le("long_cycles_equal_condensate", rep.headline_gap, 1e-3));
        else
          checks.push_back(check_le("normal_phase_rho_long",
                                    std::abs(rep.rho_long), 1e-8));
        summary << "sweep: regime=" << regime_name(rep.solution.regime)
                << " rho_total=" << rep.rho_total << " nu_c=" << rep.nu_c
                << " nu_e=" << rep.nu_e << " rho_long=" << rep.rho_long
                << " |rho_long-nu_c|/nu_c=" << rep.headline_gap << "\n";
        summary << "  rho_short(Q): ";
        for (const auto& [q, v] : rep.rho_short_by_q) summary << q << ":" << v << " ";
        summary << "\n";
        if (!c.out_sweep_csv.empty()) {
          CsvTable t;
          t.header = {"Q", "rho_short"};
          for (const auto& [q, v] : rep.rho_short_by_q)
            t.rows.push_back({double(q), v});
          const auto path = ropts.out_dir / c.out_sweep_csv;
          write_file_atomic(path, t.to_string());
          rr.artifacts.push_back(path);
        }
        if (!c.out_nodes_csv.empty()) {
          const auto path = ropts.out_dir / c.out_nodes_csv;
          write_file_atomic(path,
                            detail::nodes_table(rep.solution, grid).to_string());
          rr.artifacts.push_back(path);
        }
      }
    }
  }

  for (const auto& ch : checks)
    summary << "  [" << (ch.pass ? "PASS" : "FAIL") << "] " << ch.name << ": "
            << ch.value << " " << ch.comparison << " " << ch.threshold << "\n";

  json report;
  report["schema"] = "cyclegas.report/v1";
  report["mode"] = c.mode;
  report["name"] = c.name;
  report["seed"] = seed;
  if (!ropts.reproducible) {
    const auto now = std::chrono::system_clock::now();
    report["timestamp"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
            .count();
  }
  report["results"] = std::move(results);
  report["checks"] = checks_to_json(checks);
  rr.checks_passed = all_pass(checks);
  report["pass"] = rr.checks_passed;
  rr.report = std::move(report);
  rr.summary = summary.str();
  return rr;
}

/// Load, validate, run and write artifacts for one config file.
/// Returns the CLI exit code: 0 ok, 2 config error, 3 numerical failure,
/// 4 tolerance-check failure.
inline int run_config_file(const std::filesystem::path& config_path,
                           const RunOptions& ropts, std::ostream& out) {
  json raw;
  ScenarioConfig cfg;
  ValidationReport vr;
  try {
    raw = load_config(config_path);
    vr = validate_config(raw);
    if (!vr.ok) {
      out << "config error in " << config_path.string() << ":\n";
      for (const auto& e : vr.errors) out << "  - " << e << "\n";
      return 2;
    }
    cfg = resolve_config(raw);
  } catch (const ConfigError& ex) {
    out << "config error in " << config_path.string() << ": " << ex.what() << "\n";
    return 2;
  }
  if (cfg.name == cfg.mode) {
    cfg.name = config_path.stem().string();
  }
  try {
    RunResult rr = run_scenario(cfg, ropts);
    rr.report["config"] = vr.resolved;
    const auto json_path = ropts.out_dir / cfg.out_json;
    write_file_atomic(json_path, rr.report.dump(2) + "\n");
    out << "== " << cfg.name << " (" << cfg.mode << ") ==\n" << rr.summary;
    out << "report: " << json_path.string() << "\n";
    return rr.checks_passed ? 0 : 4;
  } catch (const NumericalError& ex) {
    out << "numerical failure: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    out << "numerical failure: " << ex.what() << "\n";
    return 3;
  }
}

}  // namespace cyclegas

#endif  // CYCLEGAS_SCENARIO_HPP
