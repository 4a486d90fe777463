// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// pass. Tolerances are fixed here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "otlab/cli/commands.hpp"
#include "otlab/cost.hpp"
#include "otlab/fivegrad.hpp"
#include "otlab/jko.hpp"
#include "otlab/ot/exact_1d.hpp"
#include "otlab/ot/map.hpp"
#include "otlab/ot/transport_lp.hpp"

using namespace otlab;

namespace {

constexpr double kappa = 0.1;
constexpr double batch_budget_s = 600.0;
constexpr double jko_budget_s = 300.0;

int workers() { return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency()))); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- shared runs -----------------------------------------------------------

BatchSpec acceptance_batch(int threads) {
  BatchSpec spec;
  spec.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) spec.seeds.push_back(s);
  spec.p = {1.5, 2.0, 3.0};
  spec.q = {1.5, 2.0, 4.0};
  spec.n = {128};
  spec.solver = "lp";
  spec.kappa = kappa;
  spec.threads = threads;
  return spec;
}

std::string reports_csv(const std::vector<InequalityReport>& reports) {
  std::ostringstream os;
  write_reports_csv(os, reports);
  return os.str();
}

DensityField heat_initial() {
  const auto g = Grid::line(0.0, 1.0, 128);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = g.center(i)[0];
    v[i] = 0.05 + std::exp(-(x - 0.4) * (x - 0.4) / (2 * 0.08 * 0.08));
  }
  return normalize(DensityField(g, v));
}

JkoConfig heat_config() {
  JkoConfig c;
  c.p = 2.0;
  c.tau = 1e-3;
  c.steps = 50;
  c.energy = Energy::entropy();
  return c;
}

constexpr double heat_dt = 0.2 / (128.0 * 128.0);

std::string heat_csv(const JkoPdeReport& rep) {
  std::ostringstream os;
  cli::write_trace_csv(os, rep.jko);
  os << "time,jko_step,l1\n";
  for (const auto& cp : rep.checkpoints)
    os << format_double(cp.time) << ',' << cp.jko_step << ',' << format_double(cp.l1_distance) << '\n';
  return os.str();
}

struct Shared {
  std::vector<InequalityReport> batch;
  double batch_seconds = 0.0;
  std::string batch_csv;
  std::optional<JkoPdeReport> heat;
  double heat_seconds = 0.0;
  std::string heat_csv;
};

// ---- criteria --------------------------------------------------------------

Outcome batch_criterion(Shared& sh) {
  const auto t0 = std::chrono::steady_clock::now();
  sh.batch = verify_batch(acceptance_batch(workers()));
  sh.batch_seconds = seconds_since(t0);
  sh.batch_csv = reports_csv(sh.batch);
  const auto s = summarize(sh.batch);
  const bool ok = s.count == 180 && s.errors == 0 && s.all_pass() && s.fraction_nonnegative() >= 0.9 &&
                  sh.batch_seconds <= batch_budget_s;
  return {ok, std::to_string(s.passed) + "/" + std::to_string(s.count) + " within tolerance (kappa " + fmt(kappa) +
                  "), " + fmt(100.0 * s.fraction_nonnegative()) + "% with lhs >= 0, min lhs " + fmt(s.min_lhs) +
                  ", errors " + std::to_string(s.errors) + ", " + fmt(sh.batch_seconds) + " s"};
}

Outcome refinement_criterion(const Shared& sh) {
  std::vector<InequalityReport> negative;
  for (const auto& r : sh.batch)
    if (r.error.empty() && r.lhs < 0.0) negative.push_back(r);
  if (negative.empty()) return {true, "no instance has lhs < 0 at n=128; nothing to refine"};
  if (negative.size() > 5) negative.resize(5);
  bool ok = true;
  double worst_ratio = 0.0;
  for (const auto& r : negative) {
    BatchSpec spec = acceptance_batch(workers());
    spec.seeds = {r.seed};
    spec.p = {r.p};
    spec.q = {r.q};
    spec.n = {512};
    const auto fine = verify_batch(spec).front();
    if (!fine.error.empty()) return {false, "n=512 rerun failed: " + fine.error};
    const double ratio = std::max(0.0, -fine.lhs) / -r.lhs;
    worst_ratio = std::max(worst_ratio, ratio);
    ok = ok && ratio <= 0.5;
  }
  return {ok, std::to_string(negative.size()) + " negative instances, worst excursion ratio n=512/n=128 " +
                  fmt(worst_ratio) + " (limit 0.5)"};
}

Outcome oracle_criterion() {
  const auto grid = Grid::line(0.0, 1.0, 128);
  double worst_rel = 0.0, worst_map = 0.0;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto cost = RadialCost::power(p, grid.diameter());
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const auto rho = random_smooth_density(grid, 2 * seed, 4, 0.1);
      const auto g = random_smooth_density(grid, 2 * seed + 1, 4, 0.1);
      const auto lp = solve_lp(rho, g, cost);
      const auto ex = solve_exact_1d(rho, g, cost);
      worst_rel = std::max(worst_rel, std::abs(lp.primal - ex.result.primal) / std::abs(ex.result.primal));
      const auto lp_map = transport_map_from_potential(lp.phi, cost, rho);
      worst_map = std::max(worst_map, map_discrepancy_quantile(lp_map, ex.map, rho, 0.95));
    }
  }
  const double dx = grid.width(0);
  return {worst_rel <= 1e-6 && worst_map <= dx, "30 pairs, worst relative primal gap " + fmt(worst_rel) +
                                                    " (limit 1e-6), worst p95 map discrepancy " + fmt(worst_map / dx) +
                                                    " cells (limit 1)"};
}

Outcome roundtrip_criterion() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    const auto h = RadialCost::power(p, 2.0);
    for (int k = 0; k < 1000; ++k) {
      Point z;
      do z = {u(rng), u(rng)};
      while (norm(z) > 1.0 || norm(z) == 0.0);
      z = 2.0 * z;
      worst = std::max(worst, norm(h.grad_star(h.grad(z)) - z) / norm(z));
    }
  }
  return {worst <= 1e-8, "4 power costs x 1000 points, worst relative error " + fmt(worst) + " (limit 1e-8)"};
}

Outcome mollification_criterion() {
  const auto quad = RadialCost::power(2.0, 1.0);
  double quad_dev = 0.0;
  for (double eps : {0.2, 0.1, 0.05}) quad_dev = std::max(quad_dev, sup_slope_deviation(quad, mollify(quad, eps, 16)));
  const auto grid = Grid::line(0.0, 1.0, 128);
  const auto rho = random_smooth_density(grid, 40, 4, 0.1), g = random_smooth_density(grid, 41, 4, 0.1);
  const auto study =
      mollification_convergence_experiment(rho, g, RadialCost::power(1.5, grid.diameter()), {0.2, 0.1, 0.05});
  std::string devs;
  for (const auto& r : study.rows) devs += (devs.empty() ? "" : " > ") + fmt(r.slope_deviation);
  const bool ok = quad_dev <= 1e-8 && study.slope_deviation_nonincreasing && study.measure_nonincreasing;
  return {ok, "quadratic deviation " + fmt(quad_dev) + " (limit 1e-8), p=1.5 slope deviation " + devs +
                  ", map measure " + (study.measure_nonincreasing ? "nonincreasing" : "increasing")};
}

Outcome diagnostics_criterion() {
  const int n = 256;
  const auto grid = Grid::line(0.0, 1.0, n);
  const auto cost = RadialCost::power(2.0, grid.diameter());
  const double C = semiconcavity_constant(cost, cost.radius(), 200).constant;
  bool ok = true;
  double worst_median = 0.0, worst_p95_ratio = 0.0;
  int semi_fail = 0;
  for (std::uint64_t seed = 200; seed < 205; ++seed) {
    const auto rho = random_smooth_density(grid, 2 * seed, 4, 0.1);
    const auto g = random_smooth_density(grid, 2 * seed + 1, 4, 0.1);
    const auto r = solve_lp(rho, g, cost);
    const auto map = transport_map_from_potential(r.phi, cost, rho);
    const auto mc = map_consistency_check(r.phi, r.psi, map, cost, rho);
    worst_median = std::max({worst_median, mc.median_phi_residual, mc.median_psi_residual});
    const auto so = second_order_check(r.phi, r.psi, map, rho, C);
    worst_p95_ratio = std::max(worst_p95_ratio, so.p95 / so.tolerance);
    const auto sc = semiconcavity_check(r.phi, semiconcavity_constant(cost, cost.radius(), 200));
    if (!sc.pass) ++semi_fail;
    ok = ok && so.pass && sc.pass;
  }
  ok = ok && worst_median <= 5.0 / n;
  return {ok, "5 seeds, worst median map residual " + fmt(worst_median) + " (limit " + fmt(5.0 / n) +
                  "), worst second-order p95 / (20 dx C) " + fmt(worst_p95_ratio) + ", semiconcavity failures " +
                  std::to_string(semi_fail)};
}

Outcome boundary_criterion() {
  const auto grid = Grid::line(0.0, 1.0, 128);
  const double dx = grid.width(0);
  bool ok = true;
  double worst_flux_ratio = -std::numeric_limits<double>::infinity(), worst_normal = 0.0;
  const double ps[] = {1.5, 2.0, 3.0};
  for (std::uint64_t k = 0; k < 10; ++k) {
    const std::uint64_t seed = 300 + k;
    const double p = ps[k % 3];
    const auto cost = RadialCost::power(p, grid.diameter());
    const auto s = sample_smooth_density(grid, 2 * seed, 4, 0.1);
    const auto g = random_smooth_density(grid, 2 * seed + 1, 4, 0.1);
    const auto r = solve_lp(s.density, g, cost);
    const double scale = tv_norm(s.density) + tv_norm(g);
    const double flux = boundary_flux(s.density, g, r.phi, r.psi, HFunction(2.0));
    worst_flux_ratio = std::max(worst_flux_ratio, -flux / scale);
    const auto sign = boundary_sign_check(r.phi, cost, s.density, 0.5 * s.floor, 10.0 * dx);
    worst_normal = std::min(worst_normal, sign.min_normal_component);
    ok = ok && flux >= -1e-2 * scale && sign.pass && sign.facets > 0;
  }
  return {ok, "10 instances, worst -flux/(TV sum) " + fmt(worst_flux_ratio) +
                  " (limit 1e-2), smallest boundary normal component " + fmt(worst_normal) + " (limit " +
                  fmt(-10.0 * dx) + ")"};
}

Outcome heat_criterion(Shared& sh) {
  const auto rho0 = heat_initial();
  const auto cfg = heat_config();
  const auto t0 = std::chrono::steady_clock::now();
  sh.heat = jko_vs_pde_report(rho0, cfg, heat_dt, true);
  sh.heat_seconds = seconds_since(t0);
  sh.heat_csv = heat_csv(*sh.heat);
  const auto& rep = *sh.heat;
  const auto chk = cli::check_trajectory(rep.jko, 1e-3, cfg.descent_tolerance);
  const double final_l1 = rep.checkpoints.back().l1_distance;
  const bool ok = final_l1 <= 0.05 && rep.refinement_nonincreasing && chk.tv_ok && chk.descent_ok &&
                  sh.heat_seconds <= jko_budget_s;
  return {ok, "final L1 " + fmt(final_l1) + " (limit 0.05), with tau/2 " + fmt(rep.halved_tau_distance) +
                  ", max TV increase " + fmt(chk.max_tv_increase) + " (slack " +
                  fmt(1e-3 * rep.jko.entries.front().tv) + "), max F change " + fmt(chk.max_descent) +
                  " (limit 1e-10), " + fmt(sh.heat_seconds) + " s"};
}

Outcome power_criterion() {
  const auto grid = Grid::line(0.0, 1.0, 128);
  JkoConfig c;
  c.p = 3.0;
  c.tau = 1e-3;
  c.steps = 20;
  c.energy = Energy::power(2.0);
  const auto tr = run_jko(random_smooth_density(grid, 9, 4, 0.1), c);
  if (tr.error) return {false, "trajectory stopped: " + *tr.error};
  const auto chk = cli::check_trajectory(tr, 1e-3, c.descent_tolerance);
  double worst_mass = 0.0, min_value = std::numeric_limits<double>::infinity();
  for (const auto& d : tr.densities) {
    worst_mass = std::max(worst_mass, std::abs(d.mass() - 1.0));
    for (double v : d.values()) min_value = std::min(min_value, v);
  }
  const bool ok = tr.densities.size() == 21 && chk.tv_ok && worst_mass <= 1e-10 && min_value >= 0.0;
  return {ok, std::to_string(tr.densities.size() - 1) + " steps, max TV increase " + fmt(chk.max_tv_increase) +
                  ", worst mass error " + fmt(worst_mass) + ", min density " + fmt(min_value)};
}

Outcome determinism_criterion(const Shared& sh) {
  if (sh.batch.empty() || !sh.heat) return {false, "criteria 1 or 8 did not produce outputs"};
  const auto batch_again = reports_csv(verify_batch(acceptance_batch(workers() == 1 ? 2 : 1)));
  const auto heat_again = heat_csv(jko_vs_pde_report(heat_initial(), heat_config(), heat_dt, true));
  const bool same_batch = batch_again == sh.batch_csv, same_heat = heat_again == sh.heat_csv;
  return {same_batch && same_heat, std::string("batch CSV ") + (same_batch ? "identical" : "differs") + " (" +
                                       std::to_string(sh.batch_csv.size()) + " bytes), JKO trace CSV " +
                                       (same_heat ? "identical" : "differs") + " (" +
                                       std::to_string(sh.heat_csv.size()) + " bytes)"};
}

}  // namespace

int main() {
  Shared sh;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"five-gradients batch", [&] { return batch_criterion(sh); }},
      {"refinement trend", [&] { return refinement_criterion(sh); }},
      {"1D oracle equivalence", oracle_criterion},
      {"conjugate round-trip", roundtrip_criterion},
      {"mollification", mollification_criterion},
      {"proof-identity diagnostics", diagnostics_criterion},
      {"boundary flux", boundary_criterion},
      {"JKO heat benchmark", [&] { return heat_criterion(sh); }},
      {"JKO general-p smoke", power_criterion},
      {"determinism", [&] { return determinism_criterion(sh); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
