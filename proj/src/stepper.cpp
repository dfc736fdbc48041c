#include "actherm/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "actherm/diagnostics.hpp"
#include "actherm/errors.hpp"

namespace actherm {

void StepControls::validate() const {
  if (!(dt > 0.0)) throw ValidationError("StepControls: dt must be > 0");
  if (!(newton_tol > 0.0))
    throw ValidationError("StepControls: newton_tol must be > 0");
  if (newton_max < 1)
    throw ValidationError("StepControls: newton_max must be >= 1");
  if (!(picard_tol > 0.0))
    throw ValidationError("StepControls: picard_tol must be > 0");
  if (picard_max < 1)
    throw ValidationError("StepControls: picard_max must be >= 1");
  if (!(linear_tol > 0.0))
    throw ValidationError("StepControls: linear_tol must be > 0");
}

namespace {

constexpr double kLineSearchFloor = 1.0 / 1024.0;  // 2^-10

std::int64_t cg_cap(const Grid& g) { return 10 * g.cell_count(); }

// Generic damped Newton loop shared by the phi and theta substeps.
// residual(x, out) fills the residual field; solve_delta(x, residual)
// returns the Newton correction. Converges when l2_norm(residual) <=
// newton_tol; line search halves the step while the residual norm fails
// to decrease, down to 2^-10, then declares divergence.
template <class ResidualFn, class SolveFn>
int damped_newton(Field& x, const StepControls& c, ResidualFn&& residual,
                  SolveFn&& solve_delta, const char* context) {
  Field res(x.grid());
  residual(x, res);
  double rnorm = l2_norm(res);
  if (rnorm <= c.newton_tol) return 0;

  Field trial(x.grid());
  Field trial_res(x.grid());
  for (int it = 1; it <= c.newton_max; ++it) {
    Field delta = solve_delta(x, res);
    double lambda = 1.0;
    bool reduced = false;
    while (lambda >= kLineSearchFloor) {
      auto xv = x.values();
      auto dv = delta.values();
      auto tv = trial.values();
      for (std::int64_t i = 0; i < x.size(); ++i) tv[i] = xv[i] + lambda * dv[i];
      residual(trial, trial_res);
      const double tnorm = l2_norm(trial_res);
      if (tnorm < rnorm) {
        x = trial;
        res = trial_res;
        rnorm = tnorm;
        reduced = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!reduced) {
      std::ostringstream os;
      os << context << ": Newton line search stalled (residual " << rnorm
         << ")";
      throw SolverError(os.str(), rnorm, it);
    }
    if (rnorm <= c.newton_tol) {
      x.require_finite(context);
      return it;
    }
  }
  std::ostringstream os;
  os << context << ": Newton did not reach tol " << c.newton_tol << " within "
     << c.newton_max << " iterations (residual " << rnorm << ")";
  throw SolverError(os.str(), rnorm, c.newton_max);
}

}  // namespace

PhaseStepResult step_phase(const State& state, const Field& theta_used,
                           const Field& sigma_used, const StepControls& c,
                           const ModelParams& p, const Field* source) {
  c.validate();
  const Grid& g = state.grid();
  if (theta_used.grid() != g || sigma_used.grid() != g)
    throw ValidationError("step_phase: grid mismatch");
  const double beta = p.relaxation;
  const double eps = p.interface;
  const double dt = c.dt;
  const std::int64_t n = g.cell_count();

  // Residuals live on the dt-scaled increment form, so newton_tol means the
  // same thing for every step size.
  std::vector<double> rhs(static_cast<size_t>(n));
  {
    auto phin = state.phi.values();
    auto th = theta_used.values();
    auto sg = sigma_used.values();
    for (std::int64_t i = 0; i < n; ++i) {
      const double hphi = p.regulator.value(phin[i]);
      rhs[static_cast<size_t>(i)] =
          beta * phin[i] +
          dt * ((6.0 / eps) * phin[i] * phin[i] + th[i] +
                (p.proliferation * sg[i] - p.apoptosis) * hphi);
      if (source) rhs[static_cast<size_t>(i)] += dt * source->values()[i];
    }
  }

  Field lap(g);
  auto residual = [&](const Field& phi, Field& out) {
    laplacian(phi, lap);
    auto pv = phi.values();
    auto lv = lap.values();
    auto ov = out.values();
    for (std::int64_t i = 0; i < n; ++i) {
      ov[i] = beta * pv[i] +
              dt * (-eps * lv[i] +
                    (4.0 * pv[i] * pv[i] * pv[i] + 2.0 * pv[i]) / eps) -
              rhs[static_cast<size_t>(i)];
    }
  };

  std::vector<double> jac_diag(static_cast<size_t>(n));
  auto solve_delta = [&](const Field& phi, const Field& res) {
    auto pv = phi.values();
    for (std::int64_t i = 0; i < n; ++i) {
      jac_diag[static_cast<size_t>(i)] =
          beta + dt * (12.0 * pv[i] * pv[i] + 2.0) / eps;
    }
    detail::ShiftedLaplacian op{&g, jac_diag, dt * eps};
    Field delta(g);
    std::vector<double> neg_res(res.values().begin(), res.values().end());
    for (double& v : neg_res) v = -v;
    detail::conjugate_gradient(op, neg_res, delta.values(), c.linear_tol,
                               cg_cap(g), "step_phase");
    return delta;
  };

  Field phi = state.phi;  // initial guess: previous time level
  int iters = damped_newton(phi, c, residual, solve_delta, "step_phase");
  return {std::move(phi), iters};
}

Field step_nutrient(const State& state, const Field& phi_used,
                    const StepControls& c, const ModelParams& p,
                    const Field* source) {
  c.validate();
  const Grid& g = state.grid();
  if (phi_used.grid() != g) throw ValidationError("step_nutrient: grid mismatch");
  const double dt = c.dt;
  const std::int64_t n = g.cell_count();

  std::vector<double> diag(static_cast<size_t>(n));
  std::vector<double> rhs(static_cast<size_t>(n));
  auto sn = state.sigma.values();
  auto ph = phi_used.values();
  for (std::int64_t i = 0; i < n; ++i) {
    diag[static_cast<size_t>(i)] =
        1.0 + dt * (p.transfer + p.consumption * p.regulator.value(ph[i]));
    rhs[static_cast<size_t>(i)] =
        sn[i] + dt * p.transfer * p.vascular_nutrient;
    if (source) rhs[static_cast<size_t>(i)] += dt * source->values()[i];
  }

  detail::ShiftedLaplacian op{&g, diag, dt};
  Field sigma = state.sigma;  // initial guess
  detail::conjugate_gradient(op, rhs, sigma.values(), c.linear_tol, cg_cap(g),
                             "step_nutrient");
  sigma.require_finite("step_nutrient");
  return sigma;
}

TemperatureStepResult step_temperature(const State& state, const Field& m,
                                       const StepControls& c,
                                       const ModelParams& p,
                                       const Field* source) {
  c.validate();
  const Grid& g = state.grid();
  if (m.grid() != g) throw ValidationError("step_temperature: grid mismatch");
  const double cv = p.specific_heat;
  const double q = p.conductivity_exponent;
  const double dt = c.dt;
  const std::int64_t n = g.cell_count();

  const double structure = cv / dt + m.min();
  if (!(structure > 0.0)) {
    std::ostringstream os;
    os << "step_temperature: dt too large, c_V/dt + min(m) = " << structure
       << " <= 0 breaks the positivity structure";
    throw StepSizeError(os.str());
  }

  std::vector<double> rhs(static_cast<size_t>(n));
  {
    auto thn = state.theta.values();
    auto mv = m.values();
    for (std::int64_t i = 0; i < n; ++i) {
      rhs[static_cast<size_t>(i)] =
          cv * thn[i] + dt * p.relaxation * mv[i] * mv[i];
      if (source) rhs[static_cast<size_t>(i)] += dt * source->values()[i];
    }
  }

  Field ktheta(g), lap(g);
  auto mv = m.values();
  auto residual = [&](const Field& theta, Field& out) {
    auto tv = theta.values();
    auto kv = ktheta.values();
    for (std::int64_t i = 0; i < n; ++i) kv[i] = kirchhoff(tv[i], q);
    laplacian(ktheta, lap);
    auto lv = lap.values();
    auto ov = out.values();
    for (std::int64_t i = 0; i < n; ++i) {
      ov[i] = (cv + dt * mv[i]) * tv[i] - dt * lv[i] -
              rhs[static_cast<size_t>(i)];
    }
  };

  // Jacobian J = diag(c_V + dt m) - dt Lap o diag(kappa(theta)).
  // Substituting y = kappa .* delta turns J delta = -res into the SPD
  // system (diag((c_V + dt m)/kappa) - dt Lap) y = -res, which CG handles;
  // the structure condition keeps the diagonal positive.
  std::vector<double> kappa(static_cast<size_t>(n));
  std::vector<double> sym_diag(static_cast<size_t>(n));
  auto solve_delta = [&](const Field& theta, const Field& res) {
    auto tv = theta.values();
    for (std::int64_t i = 0; i < n; ++i) {
      kappa[static_cast<size_t>(i)] = conductivity(tv[i], q);
      sym_diag[static_cast<size_t>(i)] =
          (cv + dt * mv[i]) / kappa[static_cast<size_t>(i)];
    }
    detail::ShiftedLaplacian op{&g, sym_diag, dt};
    Field y(g);
    std::vector<double> neg_res(res.values().begin(), res.values().end());
    for (double& v : neg_res) v = -v;
    detail::conjugate_gradient(op, neg_res, y.values(), c.linear_tol, cg_cap(g),
                               "step_temperature");
    auto yv = y.values();
    Field delta(g);
    auto dv = delta.values();
    for (std::int64_t i = 0; i < n; ++i)
      dv[i] = yv[i] / kappa[static_cast<size_t>(i)];
    return delta;
  };

  Field theta = state.theta;
  int iters = damped_newton(theta, c, residual, solve_delta, "step_temperature");
  return {std::move(theta), iters};
}

namespace {

// Combined absolute l2 distance of the triple; the Picard metric.
double triple_distance(const State& a, const State& b) {
  auto dist = [](const Field& x, const Field& y) {
    Field d = x;
    auto dv = d.values();
    auto yv = y.values();
    for (std::int64_t i = 0; i < d.size(); ++i) dv[i] -= yv[i];
    return l2_norm(d);
  };
  return dist(a.phi, b.phi) + dist(a.theta, b.theta) + dist(a.sigma, b.sigma);
}

// One composition phi -> sigma -> theta from the frozen temperature input.
State compose_step(const State& state, const Field& theta_input,
                   const StepControls& c, const ModelParams& p,
                   const StepSources* sources, int& iters_phi,
                   int& iters_theta) {
  const Field* src_phi = sources ? sources->phi : nullptr;
  const Field* src_theta = sources ? sources->theta : nullptr;
  const Field* src_sigma = sources ? sources->sigma : nullptr;

  PhaseStepResult phase =
      step_phase(state, theta_input, state.sigma, c, p, src_phi);
  iters_phi = phase.newton_iters;

  Field sigma = step_nutrient(state, phase.phi, c, p, src_sigma);

  Field m(state.grid());
  {
    auto mv = m.values();
    auto pn = state.phi.values();
    auto pn1 = phase.phi.values();
    const double inv_dt = 1.0 / c.dt;
    for (std::int64_t i = 0; i < m.size(); ++i)
      mv[i] = (pn1[i] - pn[i]) * inv_dt;
  }
  TemperatureStepResult temp = step_temperature(state, m, c, p, src_theta);
  iters_theta = temp.newton_iters;

  return State(std::move(phase.phi), std::move(temp.theta), std::move(sigma),
               state.time + c.dt);
}

}  // namespace

AdvanceResult advance(const State& state, const StepControls& c,
                      const ModelParams& p, const StepSources* sources) {
  c.validate();
  StepReport report;
  report.dt_used = c.dt;

  int iters_phi = 0, iters_theta = 0;
  State next = compose_step(state, state.theta, c, p, sources, iters_phi,
                            iters_theta);
  report.newton_iters_phi = iters_phi;
  report.newton_iters_theta = iters_theta;

  if (c.picard_enabled) {
    report.picard_iters = 1;
    double prev_dist = -1.0;
    while (report.picard_iters < c.picard_max) {
      State refreshed = compose_step(state, next.theta, c, p, sources,
                                     iters_phi, iters_theta);
      report.picard_iters += 1;
      report.newton_iters_phi = std::max(report.newton_iters_phi, iters_phi);
      report.newton_iters_theta =
          std::max(report.newton_iters_theta, iters_theta);
      const double dist = triple_distance(refreshed, next);
      if (prev_dist > 0.0) report.picard_contraction = dist / prev_dist;
      prev_dist = dist;
      next = std::move(refreshed);
      if (dist <= c.picard_tol) break;
    }
  }

  report.min_theta = next.theta.min();
  report.min_phi = next.phi.min();
  report.min_sigma = next.sigma.min();
  report.max_sigma = next.sigma.max();
  report.energy_residual = energy_balance_residual(state, next, p, c.dt);
  try {
    report.entropy_increment = entropy_increment(state, next, p);
  } catch (const NonpositiveTemperatureError&) {
    report.entropy_increment = std::numeric_limits<double>::quiet_NaN();
  }
  return {std::move(next), std::move(report)};
}

State run(const State& initial, double t_final, const StepControls& c,
          const ModelParams& p, const StepSink& sink,
          const RunSources* sources) {
  c.validate();
  p.validate();
  if (t_final < initial.time)
    throw ValidationError("run: t_final must be >= initial time");
  if (!initial.admissible(0.0)) {
    std::cerr << "actherm: warning: run starting from inadmissible data "
                 "(bounds are monitored, not enforced)\n";
  }

  State state = initial;
  StepControls controls = c;
  int halvings = 0;
  const double t_eps = 1e-12 * std::max(1.0, std::abs(t_final));

  while (state.time < t_final - t_eps) {
    controls.dt = std::min(controls.dt, t_final - state.time);
    StepSources step_sources;
    Field src_phi(state.grid()), src_theta(state.grid()), src_sigma(state.grid());
    if (sources) {
      const double t_next = state.time + controls.dt;
      if (sources->phi) {
        src_phi = sources->phi(state.grid(), t_next);
        step_sources.phi = &src_phi;
      }
      if (sources->theta) {
        src_theta = sources->theta(state.grid(), t_next);
        step_sources.theta = &src_theta;
      }
      if (sources->sigma) {
        src_sigma = sources->sigma(state.grid(), t_next);
        step_sources.sigma = &src_sigma;
      }
    }
    std::optional<AdvanceResult> result;
    try {
      result = advance(state, controls, p, sources ? &step_sources : nullptr);
    } catch (const Error& e) {
      // Solver and step-size failures are retryable; anything else is not.
      if (!dynamic_cast<const SolverError*>(&e) &&
          !dynamic_cast<const StepSizeError*>(&e))
        throw;
      if (++halvings > 10) {
        std::ostringstream os;
        os << "run: aborting at t = " << state.time
           << " after 10 dt halvings; last failure: " << e.what();
        throw SolverError(os.str(), 0.0, halvings);
      }
      controls.dt *= 0.5;
      continue;
    }
    state = std::move(result->state);
    if (sink) sink(state, result->report);
  }
  return state;
}

}  // namespace actherm
