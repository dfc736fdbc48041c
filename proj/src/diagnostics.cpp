#include "actherm/diagnostics.hpp"

#include <cmath>
#include <utility>

#include "actherm/errors.hpp"

namespace actherm {

double internal_energy(const State& state, const ModelParams& p) {
  const double eps = p.interface;
  const double grad_part = h1_seminorm(state.phi);
  double bulk = 0.0;
  auto ph = state.phi.values();
  auto th = state.theta.values();
  for (std::int64_t i = 0; i < state.phi.size(); ++i) {
    bulk += double_well(ph[i]) / eps + p.specific_heat * th[i];
  }
  bulk *= state.grid().cell_volume();
  return 0.5 * eps * grad_part * grad_part + bulk;
}

double energy_balance_residual(const State& before, const State& after,
                               const ModelParams& p, double dt) {
  if (before.grid() != after.grid())
    throw ValidationError("energy_balance_residual: grid mismatch");
  if (!(dt > 0.0))
    throw ValidationError("energy_balance_residual: dt must be > 0");
  const double e0 = internal_energy(before, p);
  const double e1 = internal_energy(after, p);

  // gamma at (phi_before, sigma_after), m the step difference quotient;
  // matches the substep discretization so this measures consistency only.
  double work = 0.0;
  auto phi0 = before.phi.values();
  auto phi1 = after.phi.values();
  auto sig1 = after.sigma.values();
  for (std::int64_t i = 0; i < before.phi.size(); ++i) {
    const double gamma = (p.proliferation * sig1[i] - p.apoptosis) *
                         p.regulator.value(phi0[i]);
    work += gamma * (phi1[i] - phi0[i]) / dt;
  }
  work *= before.grid().cell_volume();
  return std::abs(e1 - e0 - dt * work);
}

double total_entropy(const State& state, const ModelParams& p) {
  if (!(state.theta.min() > 0.0))
    throw NonpositiveTemperatureError(
        "total_entropy: requires strictly positive temperature");
  double s = 0.0;
  auto ph = state.phi.values();
  auto th = state.theta.values();
  for (std::int64_t i = 0; i < state.phi.size(); ++i) {
    s += p.specific_heat * std::log(th[i]) + ph[i];
  }
  return s * state.grid().cell_volume();
}

double entropy_increment(const State& before, const State& after,
                         const ModelParams& p) {
  return total_entropy(after, p) - total_entropy(before, p);
}

double stability_functional(const State& a, const State& b, double tol) {
  if (a.grid() != b.grid())
    throw ValidationError("stability_functional: grid mismatch");
  auto diff = [](const Field& x, const Field& y) {
    Field d = x;
    auto dv = d.values();
    auto yv = y.values();
    for (std::int64_t i = 0; i < d.size(); ++i) dv[i] -= yv[i];
    return d;
  };
  const Field dtheta = diff(a.theta, b.theta);
  const Field dphi = diff(a.phi, b.phi);
  const Field dsigma = diff(a.sigma, b.sigma);
  const double star = dual_norm(dtheta, tol);
  const double l2p = l2_norm(dphi);
  const double h1p = h1_seminorm(dphi);
  const double l2s = l2_norm(dsigma);
  return star * star + l2p * l2p + 0.5 * h1p * h1p + l2s * l2s;
}

DependenceResult continuous_dependence_test(const State& initial,
                                            double perturbation_scale,
                                            double t_final,
                                            const StepControls& c,
                                            const ModelParams& p,
                                            double fit_tolerance) {
  if (!(perturbation_scale >= 0.0))
    throw ValidationError("continuous_dependence_test: scale must be >= 0");
  const Grid& g = initial.grid();

  // Smooth Neumann-compatible bump added to all three fields.
  Field bump(g);
  {
    auto bv = bump.values();
    for (std::int64_t i = 0; i < bump.size(); ++i) {
      auto coords = g.coords(i);
      double w = 1.0;
      for (int a = 0; a < g.dim(); ++a)
        w *= std::cos(M_PI * g.center(a, coords[a]) / g.extent(a));
      bv[i] = perturbation_scale * w;
    }
  }
  auto shifted = [&](const Field& f) {
    Field out = f;
    auto ov = out.values();
    auto bv = bump.values();
    for (std::int64_t i = 0; i < out.size(); ++i) ov[i] += bv[i];
    return out;
  };
  State a = initial;
  State b(shifted(initial.phi), shifted(initial.theta), shifted(initial.sigma),
          initial.time);

  DependenceResult result;
  const double tol = c.linear_tol;
  result.times.push_back(0.0);
  result.functional.push_back(stability_functional(a, b, tol));

  StepControls controls = c;
  const double t_eps = 1e-12 * std::max(1.0, std::abs(t_final));
  double t = initial.time;
  while (t < initial.time + t_final - t_eps) {
    controls.dt = std::min(controls.dt, initial.time + t_final - t);
    a = advance(a, controls, p).state;
    b = advance(b, controls, p).state;
    t = a.time;
    result.times.push_back(t - initial.time);
    result.functional.push_back(stability_functional(a, b, tol));
  }

  const double e0 = result.functional.front();
  if (e0 <= 0.0) {
    result.exponent = 0.0;
    result.ratio_final = 0.0;
    return result;
  }
  result.ratio_final = result.functional.back() / e0;

  // Least squares on ln E over the second half (transients excluded), then
  // raise lambda minimally so the Gronwall envelope holds on every sample.
  const size_t half = result.times.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (size_t k = half; k < result.times.size(); ++k) {
    if (result.functional[k] <= 0.0) continue;
    const double x = result.times[k];
    const double y = std::log(result.functional[k]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++count;
  }
  double lambda = 0.0;
  if (count >= 2) {
    const double denom = count * sxx - sx * sx;
    if (denom > 0.0) lambda = (count * sxy - sx * sy) / denom;
  }
  const double log_slack = std::log1p(fit_tolerance);
  for (size_t k = 1; k < result.times.size(); ++k) {
    if (result.functional[k] <= 0.0 || result.times[k] <= 0.0) continue;
    const double needed =
        (std::log(result.functional[k] / e0) - log_slack) / result.times[k];
    lambda = std::max(lambda, needed);
  }
  result.exponent = lambda;
  return result;
}

}  // namespace actherm
