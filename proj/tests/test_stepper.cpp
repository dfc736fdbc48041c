#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "actherm/constitutive.hpp"
#include "actherm/diagnostics.hpp"
#include "actherm/errors.hpp"
#include "actherm/stepper.hpp"
#include "actherm/verification.hpp"

using namespace actherm;

namespace {

StepControls tight_controls(double dt) {
  StepControls c;
  c.dt = dt;
  c.newton_tol = 1e-12;
  c.linear_tol = 1e-12;
  return c;
}

State constant_state(const Grid& g, double phi, double theta, double sigma) {
  return State(Field(g, phi), Field(g, theta), Field(g, sigma), 0.0);
}

double field_distance(const Field& a, const Field& b) {
  Field d = a;
  for (std::int64_t i = 0; i < d.size(); ++i) d[i] -= b[i];
  return l2_norm(d);
}

double state_distance(const State& a, const State& b) {
  return field_distance(a.phi, b.phi) + field_distance(a.theta, b.theta) +
         field_distance(a.sigma, b.sigma);
}

// Scalar Newton for g(x) = 0 with g increasing; backs the ODE reduction.
template <class Fn, class Dn>
double scalar_newton(double x, Fn&& g, Dn&& dg) {
  for (int it = 0; it < 100; ++it) {
    const double r = g(x);
    if (std::abs(r) < 1e-14) break;
    x -= r / dg(x);
  }
  return x;
}

// The three substeps reduced to scalars (no Laplacian on constants).
struct ScalarTriple {
  double phi, theta, sigma;
};

ScalarTriple scalar_advance(const ScalarTriple& s, double dt,
                            const ModelParams& p) {
  const double beta = p.relaxation, eps = p.interface;
  const double rhs_phi = beta / dt * s.phi + 6.0 / eps * s.phi * s.phi +
                         s.theta +
                         (p.proliferation * s.sigma - p.apoptosis) *
                             regulator_h(s.phi);
  const double phi = scalar_newton(
      s.phi,
      [&](double x) {
        return beta / dt * x + (4.0 * x * x * x + 2.0 * x) / eps - rhs_phi;
      },
      [&](double x) { return beta / dt + (12.0 * x * x + 2.0) / eps; });
  const double sigma =
      (s.sigma / dt + p.transfer * p.vascular_nutrient) /
      (1.0 / dt + p.transfer + p.consumption * regulator_h(phi));
  const double m = (phi - s.phi) / dt;
  const double cv = p.specific_heat;
  const double theta =
      (cv / dt * s.theta + p.relaxation * m * m) / (cv / dt + m);
  return {phi, theta, sigma};
}

}  // namespace

TEST_CASE("step controls validation") {
  StepControls c;
  CHECK_NOTHROW(c.validate());
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = StepControls{};
  c.newton_max = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = StepControls{};
  c.picard_max = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("phase substep fixed points") {
  Grid g({8}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);

  // rest: phi = 0, theta = 0 kills every term
  State rest = constant_state(g, 0.0, 0.0, 0.7);
  PhaseStepResult r = step_phase(rest, rest.theta, rest.sigma, c, p);
  for (std::int64_t i = 0; i < r.phi.size(); ++i) CHECK(r.phi[i] == 0.0);

  // balanced proliferation/apoptosis at phi = 1, sigma = A/P
  ModelParams p2;
  p2.proliferation = 2.0;
  p2.apoptosis = 1.0;
  State one = constant_state(g, 1.0, 0.0, 0.5);
  PhaseStepResult r2 = step_phase(one, one.theta, one.sigma, c, p2);
  for (std::int64_t i = 0; i < r2.phi.size(); ++i)
    CHECK(r2.phi[i] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("phase substep matches the dense oracle on a 3-cell grid") {
  Grid g({3}, {1.0});
  ModelParams p;
  p.proliferation = 1.3;
  p.apoptosis = 0.4;
  StepControls c = tight_controls(5e-3);
  State s(Field(g, std::vector<double>{0.2, 0.8, 0.5}),
          Field(g, std::vector<double>{0.1, 0.3, 0.0}),
          Field(g, std::vector<double>{1.0, 0.6, 0.2}), 0.0);
  PhaseStepResult prod = step_phase(s, s.theta, s.sigma, c, p);
  Field oracle = verify::dense_phase_step(s, s.theta, s.sigma, c.dt, p);
  CHECK(field_distance(prod.phi, oracle) <= 1e-11);
}

TEST_CASE("nutrient substep equilibria and scalar recurrence") {
  Grid g({8}, {1.0});
  ModelParams p;
  p.vascular_nutrient = 0.8;
  StepControls c = tight_controls(1e-2);

  State eq = constant_state(g, 0.0, 0.0, 0.8);
  Field sig = step_nutrient(eq, eq.phi, c, p);
  for (std::int64_t i = 0; i < sig.size(); ++i)
    CHECK(sig[i] == doctest::Approx(0.8).epsilon(1e-14));

  ModelParams p1;  // sigma_B = 1
  p1.transfer = 0.7;
  p1.consumption = 1.9;
  State full = constant_state(g, 1.0, 0.0, 1.0);
  Field sig1 = step_nutrient(full, full.phi, c, p1);
  const double expected =
      (1.0 / c.dt + 0.7) / (1.0 / c.dt + 0.7 + 1.9);
  for (std::int64_t i = 0; i < sig1.size(); ++i)
    CHECK(sig1[i] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("nutrient substep preserves the [0,1] box") {
  std::mt19937_64 rng(43);
  Grid g({16}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);
  for (int trial = 0; trial < 25; ++trial) {
    State s = verify::random_admissible_state(g, 1000 + trial);
    Field sig = step_nutrient(s, s.phi, c, p);
    CHECK(sig.min() >= -1e-12);
    CHECK(sig.max() <= 1.0 + 1e-12);
  }
  (void)rng;
}

TEST_CASE("temperature substep constants, recurrence and refusal") {
  Grid g({8}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);

  State s = constant_state(g, 0.0, 1.7, 0.5);
  TemperatureStepResult r = step_temperature(s, Field(g, 0.0), c, p);
  for (std::int64_t i = 0; i < r.theta.size(); ++i)
    CHECK(r.theta[i] == doctest::Approx(1.7).epsilon(1e-14));

  // theta^n = 0, m = 1: theta' = dt/(1 + dt)
  State zero = constant_state(g, 0.0, 0.0, 0.5);
  TemperatureStepResult r2 = step_temperature(zero, Field(g, 1.0), c, p);
  for (std::int64_t i = 0; i < r2.theta.size(); ++i)
    CHECK(r2.theta[i] ==
          doctest::Approx(c.dt / (1.0 + c.dt)).epsilon(1e-12));

  // structure violation: c_V/dt + min(m) <= 0
  Field bad_m(g, -1.0 / c.dt - 1.0);
  CHECK_THROWS_AS(step_temperature(zero, bad_m, c, p), StepSizeError);
}

TEST_CASE("temperature substep keeps theta nonnegative on admissible data") {
  Grid g({12}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> m_dist(-5.0, 5.0);
  for (int trial = 0; trial < 25; ++trial) {
    State s = verify::random_admissible_state(g, 2000 + trial);
    Field m(g);
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = m_dist(rng);
    TemperatureStepResult r = step_temperature(s, m, c, p);
    CHECK(r.theta.min() >= -1e-12);
  }
}

TEST_CASE("temperature substep positivity floor under nonnegative m") {
  Grid g({12}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> m_dist(0.0, 4.0);
  for (int trial = 0; trial < 25; ++trial) {
    State s = verify::random_admissible_state(g, 3000 + trial, {0.5});
    REQUIRE(s.theta.min() >= 0.5);
    Field m(g);
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = m_dist(rng);
    TemperatureStepResult r = step_temperature(s, m, c, p);
    const double floor = 0.5 / (1.0 + c.dt * m.max());
    CHECK(r.theta.min() >= floor - 1e-12);
  }
}

TEST_CASE("advance fixes the rest states") {
  Grid g({8}, {1.0});
  ModelParams p;
  p.vascular_nutrient = 0.6;
  StepControls c = tight_controls(1e-2);

  State rest = constant_state(g, 0.0, 0.0, 0.6);
  AdvanceResult r = advance(rest, c, p);
  for (std::int64_t i = 0; i < g.cell_count(); ++i) {
    CHECK(r.state.phi[i] == 0.0);
    CHECK(r.state.theta[i] == 0.0);
    CHECK(r.state.sigma[i] == doctest::Approx(0.6).epsilon(1e-14));
  }
  CHECK(r.report.energy_residual == 0.0);

  // (phi, theta, sigma) = (1, 0, A/P): phi and theta stay put for one step
  ModelParams p2;
  p2.proliferation = 2.0;
  p2.apoptosis = 1.0;
  State tumor = constant_state(g, 1.0, 0.0, 0.5);
  AdvanceResult r2 = advance(tumor, c, p2);
  for (std::int64_t i = 0; i < g.cell_count(); ++i) {
    CHECK(r2.state.phi[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r2.state.theta[i]) <= 1e-12);
  }
}

TEST_CASE("advance on constant data matches the scalar ODE reduction") {
  Grid g({4}, {1.0});
  ModelParams p;
  p.proliferation = 1.4;
  p.apoptosis = 0.3;
  p.consumption = 0.8;
  p.transfer = 0.9;
  p.vascular_nutrient = 0.7;
  StepControls c = tight_controls(2e-2);

  State s = constant_state(g, 0.4, 0.2, 0.9);
  ScalarTriple scalar{0.4, 0.2, 0.9};
  for (int step = 0; step < 25; ++step) {
    s = advance(s, c, p).state;
    scalar = scalar_advance(scalar, c.dt, p);
    for (std::int64_t i = 0; i < g.cell_count(); ++i) {
      CHECK(s.phi[i] == doctest::Approx(scalar.phi).epsilon(1e-9));
      CHECK(s.theta[i] == doctest::Approx(scalar.theta).epsilon(1e-9));
      CHECK(s.sigma[i] == doctest::Approx(scalar.sigma).epsilon(1e-9));
    }
  }
}

TEST_CASE("step doubling consistency is second order") {
  Grid g({32}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(0.0);
  State initial = verify::initial_state(
      verify::manufactured_case_default(p, 1), g);

  auto defect = [&](double dt) {
    StepControls big = tight_controls(2.0 * dt);
    StepControls small = tight_controls(dt);
    State one = advance(initial, big, p).state;
    State two = advance(advance(initial, small, p).state, small, p).state;
    return state_distance(one, two);
  };
  const double d1 = defect(2e-3);
  const double d2 = defect(1e-3);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.35));
  (void)c;
}

TEST_CASE("picard iteration contracts and refines the plain step") {
  Grid g({32}, {1.0});
  ModelParams p;
  State initial = verify::initial_state(
      verify::manufactured_case_default(p, 1), g);

  auto picard_step = [&](double dt, int max_iters) {
    StepControls c = tight_controls(dt);
    c.picard_enabled = true;
    c.picard_tol = 1e-14;
    c.picard_max = max_iters;
    return advance(initial, c, p);
  };
  AdvanceResult plain = advance(initial, tight_controls(1e-3), p);
  AdvanceResult refined = picard_step(1e-3, 8);
  CHECK(refined.report.picard_contraction > 0.0);
  CHECK(refined.report.picard_contraction < 1.0);
  CHECK(refined.report.picard_iters <= 8);

  // Picard limit differs from the plain step by O(dt^2)
  const double gap1 = state_distance(plain.state, refined.state);
  AdvanceResult plain2 = advance(initial, tight_controls(5e-4), p);
  AdvanceResult refined2 = picard_step(5e-4, 8);
  const double gap2 = state_distance(plain2.state, refined2.state);
  CHECK(gap1 / gap2 == doctest::Approx(4.0).epsilon(0.4));
}

TEST_CASE("picard-on and picard-off trajectories meet at first order") {
  Grid g({24}, {1.0});
  ModelParams p;
  State initial = verify::initial_state(
      verify::manufactured_case_default(p, 1), g);
  const double T = 0.02;

  auto trajectory_gap = [&](double dt) {
    StepControls plain = tight_controls(dt);
    StepControls picard = plain;
    picard.picard_enabled = true;
    picard.picard_tol = 1e-13;
    picard.picard_max = 10;
    State a = run(initial, T, plain, p);
    State b = run(initial, T, picard, p);
    return state_distance(a, b);
  };
  const double g1 = trajectory_gap(2e-3);
  const double g2 = trajectory_gap(1e-3);
  CHECK(g1 / g2 == doctest::Approx(2.0).epsilon(0.35));
}

TEST_CASE("report iteration counts respect the configured caps") {
  Grid g({16}, {1.0});
  ModelParams p;
  State initial = verify::initial_state(
      verify::manufactured_case_default(p, 1), g);
  StepControls c = tight_controls(1e-3);
  c.picard_enabled = true;
  c.picard_tol = 1e-15;  // unreachably tight: exercises the cap
  c.picard_max = 3;
  AdvanceResult r = advance(initial, c, p);
  CHECK(r.report.picard_iters <= 3);
  CHECK(r.report.newton_iters_phi <= c.newton_max);
  CHECK(r.report.newton_iters_theta <= c.newton_max);
  CHECK(r.report.dt_used == c.dt);
}

TEST_CASE("run handles empty intervals, landing, and dt halving") {
  Grid g({8}, {1.0});
  ModelParams p;
  StepControls c = tight_controls(1e-2);
  State initial = constant_state(g, 0.0, 0.0, 1.0);

  State same = run(initial, initial.time, c, p);
  CHECK(same.time == initial.time);
  CHECK(state_distance(same, initial) == 0.0);

  int steps = 0;
  State landed = run(initial, 0.025, c, p,
                     [&](const State&, const StepReport&) { ++steps; });
  CHECK(landed.time == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(steps == 3);  // 0.01 + 0.01 + 0.005

  // A fast-collapsing phase forces the temperature structure condition to
  // refuse the first step; run() must halve dt until it passes.
  ModelParams hard;
  hard.apoptosis = 64.0;
  State collapse = constant_state(g, 1.0, 0.0, 0.0);
  StepControls big = tight_controls(1.0);
  double min_dt_seen = 1.0;
  CHECK_NOTHROW(run(collapse, 1.0, big, hard,
                    [&](const State&, const StepReport& rep) {
                      min_dt_seen = std::min(min_dt_seen, rep.dt_used);
                    }));
  CHECK(min_dt_seen < 1.0);
}

TEST_CASE("run converges at first order against a fine-step reference") {
  Grid g({16}, {1.0});
  ModelParams p;
  State initial = verify::initial_state(
      verify::manufactured_case_default(p, 1), g);
  const double T = 0.05;

  auto at_dt = [&](double dt) {
    return run(initial, T, tight_controls(dt), p);
  };
  State ref = at_dt(4e-5);  // dt/100 reference
  const double e1 = state_distance(at_dt(4e-3), ref);
  const double e2 = state_distance(at_dt(2e-3), ref);
  const double e3 = state_distance(at_dt(1e-3), ref);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.3));
  CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.3));
}
