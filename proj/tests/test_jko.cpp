#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "otlab/jko.hpp"

using namespace otlab;

namespace {

DensityField bump(const Grid& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = g.center(i)[0];
    v[i] = 0.05 + std::exp(-(x - 0.4) * (x - 0.4) / (2 * 0.08 * 0.08));
  }
  return normalize(DensityField(g, v));
}

DensityField uniform(const Grid& g) { return normalize(DensityField(g, std::vector<double>(g.size(), 1.0))); }

// Inverse CDF of a cellwise-constant density, by direct search.
double inverse_cdf(const Grid& g, const std::vector<double>& mass, double s) {
  double acc = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (acc + mass[k] >= s && mass[k] > 0.0) return g.lower(0) + g.width(0) * (k + (s - acc) / mass[k]);
    acc += mass[k];
  }
  return g.upper(0);
}

}  // namespace

TEST(Energy, ClosedForms) {
  const auto ent = Energy::entropy();
  EXPECT_DOUBLE_EQ(ent.g(0.7, 2.0), 0.7);
  EXPECT_DOUBLE_EQ(ent.g_prime(0.7, 2.0), 1.0);
  EXPECT_NEAR(ent.g(4.0, 3.0), 8.0, 1e-12);
  EXPECT_EQ(ent.f(0.0), 0.0);
  EXPECT_NEAR(ent.f(std::numbers::e), std::numbers::e, 1e-14);
  const auto pw = Energy::power(2.0);
  EXPECT_DOUBLE_EQ(pw.f(3.0), 9.0);
  EXPECT_DOUBLE_EQ(pw.f_prime(3.0), 6.0);
  EXPECT_NEAR(pw.g(2.0, 3.0), 2.0 * 8.0 / 3.0, 1e-12);
  EXPECT_THROW(Energy::power(1.0), Error);
}

// g'(s) = s^(p-1) f''(s), checked by differences.
TEST(Energy, NonlinearityMatchesSecondDerivative) {
  for (const auto& e : {Energy::entropy(), Energy::power(2.0), Energy::power(3.5)})
    for (double p : {1.5, 2.0, 3.0})
      for (double s : {0.3, 1.0, 2.2}) {
        const double h = 1e-4;
        const double f2 = (e.f_prime(s + h) - e.f_prime(s - h)) / (2 * h);
        EXPECT_NEAR(e.g_prime(s, p), std::pow(s, p - 1.0) * f2, 1e-6) << e.describe() << ' ' << p << ' ' << s;
        const double dg = (e.g(s + h, p) - e.g(s - h, p)) / (2 * h);
        EXPECT_NEAR(dg, e.g_prime(s, p), 1e-6) << e.describe() << ' ' << p << ' ' << s;
      }
}

TEST(EnergyProx, SolvesOptimalityCondition) {
  const double sigma = 1e-3, eps = 2e-5, log_vol = std::log(1.0 / 64);
  for (const auto& e : {Energy::entropy(), Energy::power(2.0), Energy::power(3.0)})
    for (double lq : {-6.0, -4.1, -2.0}) {
      const double lb = detail::energy_prox_log(e, sigma, eps, lq, log_vol);
      const double r = sigma * e.f_prime(std::exp(lb - log_vol)) + eps * (lb - lq);
      EXPECT_NEAR(r, 0.0, 1e-12) << e.describe();
    }
}

TEST(QuantileCost, DisjointHalves) {
  const auto g = Grid::line(0.0, 1.0, 8);
  const std::vector<double> a{0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0}, b{0, 0, 0, 0, 0.25, 0.25, 0.25, 0.25};
  for (double p : {1.5, 2.0, 3.0}) EXPECT_NEAR(quantile_transport_cost(g, a, b, p), std::pow(0.5, p), 1e-14) << p;
  EXPECT_EQ(quantile_transport_cost(g, a, a, 2.0), 0.0);
}

TEST(QuantileCost, MatchesQuadratureOracle) {
  const auto g = Grid::line(-1.0, 2.0, 24);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = random_smooth_density(g, seed, 4, 0.05).cell_masses();
    const auto b = random_smooth_density(g, seed + 10, 4, 0.05).cell_masses();
    for (double p : {1.5, 2.0, 3.0}) {
      const int m = 200000;
      double s = 0.0;
      for (int k = 0; k < m; ++k) {
        const double t = (k + 0.5) / m;
        s += std::pow(std::abs(inverse_cdf(g, a, t) - inverse_cdf(g, b, t)), p);
      }
      const double exact = quantile_transport_cost(g, a, b, p);
      EXPECT_NEAR(exact, s / m, 1e-6 * (1.0 + exact)) << seed << ' ' << p;
    }
  }
}

TEST(Wasserstein, TwoDimensionalSelfDistanceIsZero) {
  const auto g = Grid::box({0, 0}, {1, 1}, {4, 4});
  const auto d = random_smooth_density(g, 5, 2, 0.2);
  EXPECT_NEAR(wasserstein_pp(d, d, 2.0), 0.0, 1e-12);
  EXPECT_GT(wasserstein_pp(d, uniform(g), 2.0), 0.0);
}

TEST(JkoConfig, Validation) {
  const auto rho = uniform(Grid::line(0.0, 1.0, 8));
  JkoConfig c;
  c.tau = 0.0;
  EXPECT_THROW(jko_step(rho, c), Error);
  c = {};
  c.p = 1.0;
  EXPECT_THROW(jko_step(rho, c), Error);
  c = {};
  c.steps = -1;
  EXPECT_THROW(run_jko(rho, c), Error);
  c = {};
  c.polish_iterations = -1;
  EXPECT_THROW(run_jko(rho, c), Error);
}

TEST(JkoStep, UniformIsFixedPointOfEntropy) {
  const auto g = Grid::line(0.0, 1.0, 32);
  JkoConfig c;
  c.tau = 1e-3;
  const auto step = jko_step(uniform(g), c);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(step.density[i], 1.0, 1e-6) << i;
}

// The directional derivative of the objective along a mass-preserving
// perturbation matches the closed-form gradient.
TEST(JkoStep, ObjectiveGradientMatchesDifferences) {
  const auto g = Grid::line(0.0, 1.0, 48);
  const auto rho_k = bump(g);
  const auto rho = random_smooth_density(g, 9, 3, 0.2);
  for (double p : {2.0, 3.0}) {
    JkoConfig c;
    c.p = p;
    c.tau = 1e-2;
    const auto grad = detail::objective_gradient_1d(rho, rho_k, c);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::vector<double> dir(g.size());
    double mean = 0.0;
    for (double& x : dir) mean += (x = nd(rng));
    for (double& x : dir) x -= mean / g.size();
    const double h = 1e-6;
    auto shifted = [&](double t) {
      std::vector<double> v(g.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = rho[i] + t * dir[i];
      return step_objective(DensityField(g, v), rho_k, c).total();
    };
    const double fd = (shifted(h) - shifted(-h)) / (2 * h);
    double an = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) an += grad[i] * dir[i] * g.width(0);
    EXPECT_NEAR(fd, an, 2e-2 * std::abs(an)) << p;
  }
}

TEST(JkoStep, PolishLowersObjective) {
  const auto g = Grid::line(0.0, 1.0, 64);
  const auto rho = bump(g);
  JkoConfig raw;
  raw.polish_iterations = 0;
  JkoConfig pol;
  const auto a = jko_step(rho, raw), b = jko_step(rho, pol);
  EXPECT_EQ(a.polish_iterations, 0);
  EXPECT_GT(b.polish_iterations, 0);
  EXPECT_LT(b.objective.total(), a.objective.total());
}

TEST(RunJko, ZeroStepsReturnsInitialDensity) {
  const auto rho = bump(Grid::line(0.0, 1.0, 16));
  JkoConfig c;
  c.steps = 0;
  const auto tr = run_jko(rho, c);
  ASSERT_EQ(tr.densities.size(), 1u);
  EXPECT_FALSE(tr.error);
  EXPECT_EQ(tr.entries[0].time, 0.0);
  EXPECT_EQ(tr.densities[0][3], rho[3]);
}

TEST(RunJko, HeatInvariants) {
  const auto g = Grid::line(0.0, 1.0, 64);
  JkoConfig c;
  c.tau = 2e-3;
  c.steps = 10;
  const auto rho0 = bump(g);
  const auto tr = run_jko(rho0, c);
  ASSERT_FALSE(tr.error) << *tr.error;
  ASSERT_EQ(tr.densities.size(), 11u);
  const double slack = 1e-3 * tv_norm(rho0);
  for (std::size_t k = 1; k < tr.densities.size(); ++k) {
    EXPECT_NEAR(tr.densities[k].mass(), 1.0, 1e-10);
    for (double v : tr.densities[k].values()) EXPECT_GE(v, 0.0);
    EXPECT_LE(tr.entries[k].tv, tr.entries[k - 1].tv + slack) << k;
    EXPECT_LE(tr.entries[k].energy, tr.entries[k - 1].energy) << k;
    EXPECT_LE(tr.descent[k - 1], 1e-10) << k;
    EXPECT_NEAR(tr.entries[k].time, k * c.tau, 1e-15);
  }
}

TEST(RunJko, PowerEnergyCubicCostSmoke) {
  const auto g = Grid::line(0.0, 1.0, 64);
  JkoConfig c;
  c.p = 3.0;
  c.energy = Energy::power(2.0);
  c.steps = 20;
  const auto rho0 = random_smooth_density(g, 3, 4, 0.1);
  const auto tr = run_jko(rho0, c);
  ASSERT_FALSE(tr.error) << *tr.error;
  ASSERT_EQ(tr.densities.size(), 21u);
  for (std::size_t k = 1; k < tr.densities.size(); ++k) {
    EXPECT_NEAR(tr.densities[k].mass(), 1.0, 1e-10);
    EXPECT_LE(tr.entries[k].tv, tr.entries[k - 1].tv + 1e-3 * tr.entries[0].tv);
    EXPECT_LE(tr.descent[k - 1], 1e-10);
  }
}

TEST(RunJko, TwoDimensionalStepKeepsMass) {
  const auto g = Grid::box({0, 0}, {1, 1}, {6, 6});
  JkoConfig c;
  c.tau = 1e-2;
  c.steps = 2;
  const auto rho0 = random_smooth_density(g, 7, 2, 0.2);
  const auto tr = run_jko(rho0, c);
  ASSERT_FALSE(tr.error) << *tr.error;
  EXPECT_NEAR(tr.densities.back().mass(), 1.0, 1e-10);
  EXPECT_LE(tr.descent[0], 1e-10);
}

TEST(RunJko, InnerFailureStopsTrajectory) {
  JkoConfig c;
  c.steps = 3;
  c.max_inner_iterations = 2;
  const auto tr = run_jko(bump(Grid::line(0.0, 1.0, 32)), c);
  ASSERT_TRUE(tr.error);
  EXPECT_EQ(*tr.error_kind, ErrorKind::step);
  EXPECT_EQ(tr.densities.size(), 1u);
}

TEST(ReferencePde, ConstantStaysConstant) {
  const auto g = Grid::line(0.0, 1.0, 32);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto u = uniform(g);
    const auto tr = reference_pde_solve(u, p, Energy::entropy(),
                                        std::min(1e-4, pde_stable_dt(g, u.values(), p, Energy::entropy())), 50);
    for (double v : tr.densities.back().values()) EXPECT_NEAR(v, 1.0, 1e-14) << p;
  }
}

// A cosine mode of the heat equation decays like exp(-pi^2 t).
TEST(ReferencePde, HeatModeDecay) {
  const int n = 256;
  const auto g = Grid::line(0.0, 1.0, n);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::cos(std::numbers::pi * g.center(i)[0]);
  const double dt = 0.2 / (n * n), t = 0.02;
  const int steps = static_cast<int>(std::lround(t / dt));
  const auto tr = reference_pde_solve(DensityField(g, v), 2.0, Energy::entropy(), dt, steps);
  const auto& u = tr.densities.back();
  const double decay = std::exp(-std::numbers::pi * std::numbers::pi * steps * dt);
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(u[i] - 1.0 - 0.5 * decay * std::cos(std::numbers::pi * g.center(i)[0])));
  EXPECT_LE(worst, 1e-4);
  EXPECT_NEAR(u.mass(), 1.0, 1e-12);
}

TEST(ReferencePde, MassConservedForNonlinearFlux) {
  const auto g = Grid::line(0.0, 1.0, 64);
  const auto rho0 = bump(g);
  for (double p : {1.5, 3.0}) {
    const auto e = Energy::power(2.0);
    const double dt = pde_stable_dt(g, rho0.values(), p, e) * 0.25;
    const auto tr = reference_pde_solve(rho0, p, e, dt, 100, {1e-6, 0.2, 10});
    EXPECT_EQ(tr.densities.size(), 11u);
    for (const auto& d : tr.densities) EXPECT_NEAR(d.mass(), 1.0, 1e-12) << p;
  }
}

TEST(ReferencePde, SelfConvergence) {
  auto solve = [](int n, double dt) {
    const auto g = Grid::line(0.0, 1.0, n);
    return reference_pde_solve(bump(g), 2.0, Energy::entropy(), dt, static_cast<int>(std::lround(0.01 / dt)))
        .densities.back();
  };
  const auto coarse = solve(64, 0.01 / 250);
  const auto fine = solve(128, 0.01 / 1000);
  std::vector<double> avg(64);
  for (int i = 0; i < 64; ++i) avg[i] = 0.5 * (fine[2 * i] + fine[2 * i + 1]);
  EXPECT_LE(l1_distance(coarse, DensityField(coarse.grid(), avg)), 1e-3);
}

TEST(ReferencePde, UnstableStepIsParameterError) {
  const auto g = Grid::line(0.0, 1.0, 64);
  try {
    reference_pde_solve(bump(g), 2.0, Energy::entropy(), 1.0 / (64 * 64), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parameter);
  }
  EXPECT_THROW(reference_pde_solve(bump(g), 2.0, Energy::entropy(), 1e-6, 1, {1e-6, 0.2, 0}), Error);
  EXPECT_THROW(reference_pde_solve(uniform(Grid::box({0, 0}, {1, 1}, {2, 2})), 2.0, Energy::entropy(), 1e-6, 1),
               Error);
}

TEST(JkoPdeReport, CheckpointLayout) {
  EXPECT_EQ(detail::checkpoint_steps(50), (std::vector<int>{0, 13, 25, 38, 50}));
  EXPECT_EQ(detail::checkpoint_steps(0), (std::vector<int>{0, 0, 0, 0, 0}));
}

TEST(JkoPdeReport, SmallHeatRun) {
  const auto g = Grid::line(0.0, 1.0, 64);
  JkoConfig c;
  c.tau = 2e-3;
  c.steps = 10;
  const auto rep = jko_vs_pde_report(bump(g), c, 0.2 / (64 * 64));
  ASSERT_EQ(rep.checkpoints.size(), 5u);
  EXPECT_EQ(rep.checkpoints[0].l1_distance, 0.0);
  EXPECT_NEAR(rep.checkpoints.back().time, 0.02, 1e-15);
  EXPECT_LE(rep.checkpoints.back().l1_distance, 0.05);
  EXPECT_TRUE(rep.refinement_nonincreasing) << rep.halved_tau_distance << " vs " << rep.checkpoints.back().l1_distance;
}

TEST(JkoPdeReport, RejectsTwoDimensionalInput) {
  EXPECT_THROW(jko_vs_pde_report(uniform(Grid::box({0, 0}, {1, 1}, {2, 2})), JkoConfig{}, 1e-5), Error);
}
