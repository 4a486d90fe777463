#pragma once

// Subcommand drivers. Each returns the process exit code:
//   0 success / checks passed, 2 configuration error, 3 numerical or solver
//   error, 4 a check on the results failed.
// Every output directory receives a `manifest` (command, config hash, seed,
// version) and `config.json`, the effective config after command-line
// overrides.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "otlab/cli/config.hpp"
#include "otlab/fivegrad.hpp"
#include "otlab/jko.hpp"
#include "otlab/ot/io.hpp"
#include "otlab/version.hpp"

namespace otlab::cli {

enum ExitCode : int { ok = 0, config_error = 2, solver_error = 3, check_failed = 4 };

struct Invocation {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the effective config; the worker count does not change results and
/// is left out.
inline std::string config_hash(json j) {
  j.erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const json& effective,
                           std::uint64_t seed) {
  write_key_values(dir / "manifest", {{"command", command},
                                      {"config_hash", config_hash(effective)},
                                      {"seed", std::to_string(seed)},
                                      {"version", version}});
  std::ofstream os(dir / "config.json", std::ios::binary);
  if (!os) throw Error(ErrorKind::input, "cannot write " + (dir / "config.json").string());
  os << effective.dump(2) << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::input, "cannot open " + path.string() + " for writing");
  return os;
}

// ---- solve-ot --------------------------------------------------------------

inline int cmd_solve_ot(const SolveOtConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const auto cost = c.cost.build(c.grid);
  const auto rho = c.source.build(c.grid, 2 * c.common.seed);
  const auto g = c.target.build(c.grid, 2 * c.common.seed + 1);
  std::optional<MapField> map;
  TransportResult r = [&] {
    if (c.solver == "exact1d") {
      auto sol = solve_exact_1d(rho, g, cost);
      if (c.map) map = std::move(sol.map);
      return std::move(sol.result);
    }
    if (c.solver == "entropic") {
      EntropicOptions o;
      o.epsilon_final = c.epsilon;
      o.max_iterations = c.max_iterations;
      o.tolerance = c.tolerance;
      o.threads = c.common.threads;
      return solve_entropic(rho, g, cost, o);
    }
    LpOptions o;
    o.threads = c.common.threads;
    return solve_lp(rho, g, cost, o);
  }();
  if (c.map && !map) map = transport_map_from_potential(r.phi, cost, rho);
  write_transport_result(out, r, map);
  log << "solve-ot: solver=" << r.solver << " primal=" << format_double(r.primal) << " gap=" << format_double(r.gap)
      << '\n';
  return ok;
}

// ---- verify-5g -------------------------------------------------------------

inline int cmd_verify_5g(const VerifyConfig& c, const std::filesystem::path& out, std::ostream& log) {
  BatchSpec spec;
  spec.seeds = c.seeds;
  spec.p = c.p;
  spec.q = c.q;
  spec.n = c.n;
  spec.dim = c.dim;
  spec.solver = c.solver;
  spec.identical_pair = c.identical_pair;
  spec.kappa = c.kappa;
  spec.modes = c.modes;
  spec.floor = c.floor;
  spec.entropic_epsilon = c.entropic_epsilon;
  spec.threads = c.common.threads;
  const auto reports = verify_batch(spec);
  {
    auto os = open_output(out / "reports.csv");
    write_reports_csv(os, reports);
  }
  const auto s = summarize(reports);
  const bool fraction_ok = s.fraction_nonnegative() >= c.min_nonnegative_fraction;
  write_key_values(out / "summary", {{"count", std::to_string(s.count)},
                                     {"errors", std::to_string(s.errors)},
                                     {"passed", std::to_string(s.passed)},
                                     {"nonnegative", std::to_string(s.nonnegative)},
                                     {"fraction_nonnegative", format_double(s.fraction_nonnegative())},
                                     {"min_lhs", format_double(s.min_lhs)},
                                     {"required_kappa", format_double(s.required_kappa)},
                                     {"kappa", format_double(c.kappa)}});
  for (const auto& r : reports)
    if (!r.error.empty()) log << "instance seed=" << r.seed << " p=" << r.p << " n=" << r.n << ": " << r.error << '\n';
  log << "verify-5g: " << s.passed << "/" << s.count << " pass, " << s.nonnegative << " with lhs >= 0, min lhs "
      << format_double(s.min_lhs) << ", errors " << s.errors << '\n';
  if (s.errors > 0 && s.passed + s.errors == s.count) return solver_error;
  return s.all_pass() && fraction_ok ? ok : check_failed;
}

// ---- jko -------------------------------------------------------------------

inline JkoConfig to_jko_config(const JkoCliConfig& c) {
  JkoConfig j;
  j.p = c.p;
  j.tau = c.tau;
  j.steps = c.steps;
  j.energy = c.energy == "entropy" ? Energy::entropy() : Energy::power(c.m);
  j.epsilon = c.epsilon;
  j.max_inner_iterations = c.max_inner_iterations;
  j.inner_tolerance = c.inner_tolerance;
  j.descent_tolerance = c.descent_tolerance;
  j.max_backtracks = c.max_backtracks;
  j.polish_iterations = c.polish_iterations;
  j.threads = c.common.threads;
  return j;
}

inline void write_trace_csv(std::ostream& os, const Trajectory& tr) {
  os << "step,time,tv,energy,cost,residual\n";
  for (const auto& e : tr.entries)
    os << e.step << ',' << format_double(e.time) << ',' << format_double(e.tv) << ',' << format_double(e.energy) << ','
       << format_double(e.cost) << ',' << format_double(e.residual) << '\n';
}

struct TrajectoryChecks {
  double max_tv_increase = 0.0;
  double max_descent = 0.0;
  bool tv_ok = true;
  bool descent_ok = true;
};

inline TrajectoryChecks check_trajectory(const Trajectory& tr, double tv_slack, double descent_tolerance) {
  TrajectoryChecks out;
  if (tr.entries.size() > 1) out.max_tv_increase = out.max_descent = -std::numeric_limits<double>::infinity();
  const double slack = tv_slack * tr.entries.front().tv;
  for (std::size_t k = 1; k < tr.entries.size(); ++k)
    out.max_tv_increase = std::max(out.max_tv_increase, tr.entries[k].tv - tr.entries[k - 1].tv);
  for (double d : tr.descent) out.max_descent = std::max(out.max_descent, d);
  out.tv_ok = out.max_tv_increase <= slack;
  out.descent_ok = out.max_descent <= descent_tolerance;
  return out;
}

inline int cmd_jko(const JkoCliConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const auto rho0 = c.initial.build(c.grid, c.common.seed);
  const auto config = to_jko_config(c);
  validate(config);
  Trajectory tr;
  std::optional<JkoPdeReport> rep;
  if (c.compare && c.steps > 0) {
    const double dt = c.compare_dt > 0.0
                          ? c.compare_dt
                          : 0.5 * pde_stable_dt(c.grid, rho0.values(), c.p, config.energy);
    try {
      rep = jko_vs_pde_report(rho0, config, dt, c.compare_refinement);
      tr = rep->jko;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parameter) throw;
      tr = run_jko(rho0, config);  // recovers the partial trajectory
      if (!tr.error) throw;
    }
  } else {
    tr = run_jko(rho0, config);
  }
  {
    auto os = open_output(out / "trace.csv");
    write_trace_csv(os, tr);
  }
  if (c.write_densities) {
    std::filesystem::create_directories(out / "densities");
    for (std::size_t k = 0; k < tr.densities.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "density_%04zu.csv", k);
      write_field_csv(out / "densities" / name, c.grid, tr.densities[k].values());
    }
  }
  if (tr.error) {
    log << "jko: stopped after " << tr.densities.size() - 1 << " steps: " << *tr.error << '\n';
    return solver_error;
  }
  const auto chk = check_trajectory(tr, c.tv_slack, c.descent_tolerance);
  std::map<std::string, std::string> summary{{"steps", std::to_string(tr.densities.size() - 1)},
                                             {"max_tv_increase", format_double(chk.max_tv_increase)},
                                             {"tv_slack", format_double(c.tv_slack * tr.entries.front().tv)},
                                             {"max_descent", format_double(chk.max_descent)},
                                             {"tv_ok", chk.tv_ok ? "1" : "0"},
                                             {"descent_ok", chk.descent_ok ? "1" : "0"}};
  bool pass = chk.tv_ok && chk.descent_ok;
  if (rep) {
    auto os = open_output(out / "compare.csv");
    os << "time,jko_step,l1\n";
    for (const auto& cp : rep->checkpoints)
      os << format_double(cp.time) << ',' << cp.jko_step << ',' << format_double(cp.l1_distance) << '\n';
    const double final_l1 = rep->checkpoints.back().l1_distance;
    summary["final_l1"] = format_double(final_l1);
    if (c.compare_refinement) {
      summary["halved_tau_l1"] = format_double(rep->halved_tau_distance);
      summary["refinement_ok"] = rep->refinement_nonincreasing ? "1" : "0";
      pass = pass && rep->refinement_nonincreasing;
    }
    if (c.compare_max_l1) {
      summary["max_l1"] = format_double(*c.compare_max_l1);
      pass = pass && final_l1 <= *c.compare_max_l1;
    }
  }
  write_key_values(out / "summary", summary);
  log << "jko: " << tr.densities.size() - 1 << " steps, max tv increase " << format_double(chk.max_tv_increase)
      << ", max descent " << format_double(chk.max_descent);
  if (rep) log << ", final l1 " << format_double(rep->checkpoints.back().l1_distance);
  log << '\n';
  return pass ? ok : check_failed;
}

// ---- mollify-study ---------------------------------------------------------

inline int cmd_mollify_study(const MollifyConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const auto cost = c.cost.build(c.grid);
  const auto rho = c.source.build(c.grid, 2 * c.common.seed);
  const auto g = c.target.build(c.grid, 2 * c.common.seed + 1);
  MollificationOptions o;
  o.quadrature_order = c.quadrature_order;
  o.slack = c.slack;
  o.lp.threads = c.common.threads;
  const auto study = mollification_convergence_experiment(rho, g, cost, c.epsilons, o);
  {
    auto os = open_output(out / "convergence.csv");
    os << "epsilon,slope_deviation,deviation_measure,lp_distance,primal\n";
    for (const auto& r : study.rows)
      os << format_double(r.epsilon) << ',' << format_double(r.slope_deviation) << ','
         << format_double(r.deviation_measure) << ',' << format_double(r.lp_distance) << ',' << format_double(r.primal)
         << '\n';
  }
  write_key_values(out / "summary", {{"reference_primal", format_double(study.reference_primal)},
                                     {"slope_deviation_nonincreasing", study.slope_deviation_nonincreasing ? "1" : "0"},
                                     {"measure_nonincreasing", study.measure_nonincreasing ? "1" : "0"},
                                     {"distance_nonincreasing", study.distance_nonincreasing ? "1" : "0"},
                                     {"final_below_threshold", study.final_below_threshold ? "1" : "0"}});
  log << "mollify-study: " << study.rows.size() << " epsilons, slope deviation "
      << (study.slope_deviation_nonincreasing ? "nonincreasing" : "NOT nonincreasing") << ", measure "
      << (study.measure_nonincreasing ? "nonincreasing" : "NOT nonincreasing") << '\n';
  return study.slope_deviation_nonincreasing && study.measure_nonincreasing ? ok : check_failed;
}

// ---- ctransform ------------------------------------------------------------

inline int cmd_ctransform(const CTransformConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const auto in = read_field_csv(c.input);
  const auto cost = c.cost.build(in.grid);
  const auto m = CostMatrix::on_grid(in.grid, cost);
  std::vector<double> result;
  if (c.mode == "c")
    result = c_transform(in.values, m, c.common.threads);
  else if (c.mode == "cbar")
    result = cbar_transform(in.values, m, c.common.threads);
  else
    result = canonicalize(in.values, m, c.common.threads).psi;
  write_field_csv(out / "transform.csv", in.grid, result);
  log << "ctransform: mode " << c.mode << ", " << result.size() << " cells\n";
  return ok;
}

// ---- dispatch --------------------------------------------------------------

inline int map_error(ErrorKind kind) {
  return kind == ErrorKind::parameter || kind == ErrorKind::input ? config_error : solver_error;
}

/// Loads the config, applies overrides, runs the subcommand and writes the
/// manifest. Diagnostics go to `log`.
inline int run(const Invocation& inv, std::ostream& log) {
  json effective;
  std::uint64_t seed = 0;
  auto stage = config_error;
  try {
    effective = load_json(inv.config);
    if (!effective.is_object()) throw ConfigError("config root must be an object");
    if (inv.seed) effective["seed"] = *inv.seed;
    if (inv.threads) effective["threads"] = *inv.threads;
    const auto base = inv.config.parent_path();

    std::function<int()> body;
    if (inv.command == "solve-ot") {
      auto c = parse_solve_ot(effective, base);
      seed = c.common.seed;
      body = [c, &inv, &log] { return cmd_solve_ot(c, inv.out, log); };
    } else if (inv.command == "verify-5g") {
      auto c = parse_verify(effective);
      seed = c.common.seed;
      body = [c, &inv, &log] { return cmd_verify_5g(c, inv.out, log); };
    } else if (inv.command == "jko") {
      auto c = parse_jko(effective, base);
      seed = c.common.seed;
      body = [c, &inv, &log] { return cmd_jko(c, inv.out, log); };
    } else if (inv.command == "mollify-study") {
      auto c = parse_mollify(effective, base);
      seed = c.common.seed;
      body = [c, &inv, &log] { return cmd_mollify_study(c, inv.out, log); };
    } else if (inv.command == "ctransform") {
      auto c = parse_ctransform(effective, base);
      seed = c.common.seed;
      body = [c, &inv, &log] { return cmd_ctransform(c, inv.out, log); };
    } else {
      throw ConfigError("unknown subcommand " + inv.command);
    }

    std::filesystem::create_directories(inv.out);
    write_manifest(inv.out, inv.command, effective, seed);
    stage = solver_error;
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "output error: " << e.what() << '\n';
    return config_error;
  } catch (const Error& e) {
    log << e.what() << '\n';
    return stage == config_error ? config_error : map_error(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return stage;
  }
}

}  // namespace otlab::cli
