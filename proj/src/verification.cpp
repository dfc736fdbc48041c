#include "actherm/verification.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "actherm/errors.hpp"

namespace actherm::verify {

namespace {

// Product cosine profile and its derived quantities on the unit box.
double profile(std::span<const double> x) {
  double c = 1.0;
  for (double xi : x) c *= std::cos(M_PI * xi);
  return c;
}

double profile_laplacian(std::span<const double> x) {
  return -static_cast<double>(x.size()) * M_PI * M_PI * profile(x);
}

double profile_grad_sq(std::span<const double> x) {
  double s = 0.0;
  for (size_t a = 0; a < x.size(); ++a) {
    double term = M_PI * std::sin(M_PI * x[a]);
    for (size_t b = 0; b < x.size(); ++b) {
      if (b != a) term *= std::cos(M_PI * x[b]);
    }
    s += term * term;
  }
  return s;
}

}  // namespace

ManufacturedCase manufactured_case_default(const ModelParams& p, int dim) {
  if (dim < 1 || dim > 3)
    throw ValidationError("manufactured_case_default: dim must be 1, 2 or 3");
  ManufacturedCase mc;
  mc.dim = dim;
  mc.admissible = true;

  mc.phi = [](std::span<const double> x, double t) {
    return 0.25 * (2.0 + profile(x)) * std::exp(-t);
  };
  mc.theta = [](std::span<const double> x, double t) {
    return 0.25 * (2.0 + profile(x)) * (1.0 + 0.5 * std::exp(-t));
  };
  mc.sigma = [](std::span<const double> x, double t) {
    return 0.5 + 0.25 * profile(x) * std::exp(-t);
  };

  // Residual sources: substitute the triple into each equation and keep the
  // defect. All spatial derivatives are exact closed forms built from the
  // profile C, its Laplacian and |grad C|^2 (derivation in docs/mms_case.md,
  // cross-checked by finite differences in the test suite).
  mc.source_phi = [p](std::span<const double> x, double t) {
    const double C = profile(x);
    const double E = std::exp(-t);
    const double phi = 0.25 * (2.0 + C) * E;
    const double phi_t = -phi;
    const double lap_phi = 0.25 * E * profile_laplacian(x);
    const double theta = 0.25 * (2.0 + C) * (1.0 + 0.5 * E);
    const double sigma = 0.5 + 0.25 * C * E;
    return p.relaxation * phi_t - p.interface * lap_phi +
           double_well_prime(phi) / p.interface - theta -
           (p.proliferation * sigma - p.apoptosis) * p.regulator.value(phi);
  };
  mc.source_theta = [p](std::span<const double> x, double t) {
    const double C = profile(x);
    const double E = std::exp(-t);
    const double q = p.conductivity_exponent;
    const double theta = 0.25 * (2.0 + C) * (1.0 + 0.5 * E);
    const double theta_t = -0.125 * (2.0 + C) * E;
    const double amp = 0.25 * (1.0 + 0.5 * E);
    const double lap_theta = amp * profile_laplacian(x);
    const double grad_theta_sq = amp * amp * profile_grad_sq(x);
    // div(kappa grad theta) = kappa Lap theta + kappa' |grad theta|^2,
    // with kappa'(r) = q r^{q-1} (theta > 0 on this case).
    const double diffusion = conductivity(theta, q) * lap_theta +
                             q * pow_abs(theta, q - 1.0) * grad_theta_sq;
    const double phi_t = -0.25 * (2.0 + C) * E;
    return p.specific_heat * theta_t - diffusion -
           p.relaxation * phi_t * phi_t + theta * phi_t;
  };
  mc.source_sigma = [p](std::span<const double> x, double t) {
    const double C = profile(x);
    const double E = std::exp(-t);
    const double phi = 0.25 * (2.0 + C) * E;
    const double sigma = 0.5 + 0.25 * C * E;
    const double sigma_t = -0.25 * C * E;
    const double lap_sigma = 0.25 * E * profile_laplacian(x);
    return sigma_t - lap_sigma + p.consumption * sigma * p.regulator.value(phi) -
           p.transfer * (p.vascular_nutrient - sigma);
  };
  return mc;
}

Field sample(const Grid& grid, const SpaceTimeFn& fn, double t) {
  Field f(grid);
  auto fv = f.values();
  std::array<double, 3> x{};
  for (std::int64_t i = 0; i < f.size(); ++i) {
    const auto c = grid.coords(i);
    for (int a = 0; a < grid.dim(); ++a) x[a] = grid.center(a, c[a]);
    fv[i] = fn(std::span<const double>(x.data(), grid.dim()), t);
  }
  f.require_finite("sample");
  return f;
}

State initial_state(const ManufacturedCase& c, const Grid& grid) {
  return State(sample(grid, c.phi, 0.0), sample(grid, c.theta, 0.0),
               sample(grid, c.sigma, 0.0), 0.0);
}

RunSources run_sources(const ManufacturedCase& c) {
  RunSources s;
  s.phi = [fn = c.source_phi](const Grid& g, double t) {
    return sample(g, fn, t);
  };
  s.theta = [fn = c.source_theta](const Grid& g, double t) {
    return sample(g, fn, t);
  };
  s.sigma = [fn = c.source_sigma](const Grid& g, double t) {
    return sample(g, fn, t);
  };
  return s;
}

namespace {

std::array<double, 3> state_errors(const State& s, const ManufacturedCase& mc,
                                   double t) {
  auto err = [&](const Field& f, const SpaceTimeFn& fn) {
    Field exact = sample(f.grid(), fn, t);
    auto ev = exact.values();
    auto fv = f.values();
    for (std::int64_t i = 0; i < exact.size(); ++i) ev[i] -= fv[i];
    return l2_norm(exact);
  };
  return {err(s.phi, mc.phi), err(s.theta, mc.theta), err(s.sigma, mc.sigma)};
}

Grid unit_box(int dim, int cells) {
  return Grid(std::vector<int>(dim, cells), std::vector<double>(dim, 1.0));
}

}  // namespace

ConvergenceReport run_mms(const ManufacturedCase& mc,
                          const std::vector<int>& resolutions,
                          const std::function<double(int)>& dt_rule,
                          const StepControls& c, const ModelParams& p,
                          double t_final, double order_min, double order_max) {
  if (resolutions.size() < 2)
    throw ValidationError("run_mms: need at least 2 resolutions");
  for (size_t k = 1; k < resolutions.size(); ++k) {
    if (resolutions[k] <= resolutions[k - 1])
      throw ValidationError("run_mms: resolutions must be strictly increasing");
  }
  ConvergenceReport report;
  report.resolutions = resolutions;
  report.order_min = order_min;
  report.order_max = order_max;

  RunSources sources = run_sources(mc);
  for (int n : resolutions) {
    Grid grid = unit_box(mc.dim, n);
    StepControls controls = c;
    controls.dt = dt_rule(n);
    State final = run(initial_state(mc, grid), t_final, controls, p, {},
                      &sources);
    report.errors.push_back(state_errors(final, mc, t_final));
  }

  for (size_t k = 1; k < resolutions.size(); ++k) {
    const double ratio = std::log(static_cast<double>(resolutions[k]) /
                                  resolutions[k - 1]);
    std::array<double, 3> orders{};
    for (int f = 0; f < 3; ++f) {
      orders[f] = std::log(report.errors[k - 1][f] / report.errors[k][f]) /
                  ratio;
    }
    report.step_orders.push_back(orders);
  }
  for (int f = 0; f < 3; ++f) {
    double mean = 0.0;
    for (const auto& row : report.step_orders) mean += row[f];
    mean /= static_cast<double>(report.step_orders.size());
    report.fitted_orders[f] = mean;
    report.pass[f] = mean >= order_min && mean <= order_max;
  }
  return report;
}

std::array<double, 3> temporal_orders(const ManufacturedCase& mc, int cells,
                                      const std::vector<double>& dts,
                                      double dt_ref, const StepControls& c,
                                      const ModelParams& p, double t_final) {
  if (dts.size() < 2)
    throw ValidationError("temporal_orders: need at least 2 step sizes");
  Grid grid = unit_box(mc.dim, cells);
  RunSources sources = run_sources(mc);
  State initial = initial_state(mc, grid);

  auto integrate_with = [&](double dt) {
    StepControls controls = c;
    controls.dt = dt;
    return run(initial, t_final, controls, p, {}, &sources);
  };
  const State reference = integrate_with(dt_ref);

  std::vector<std::array<double, 3>> errors;
  for (double dt : dts) {
    State s = integrate_with(dt);
    auto dist = [](const Field& a, const Field& b) {
      Field d = a;
      auto dv = d.values();
      auto bv = b.values();
      for (std::int64_t i = 0; i < d.size(); ++i) dv[i] -= bv[i];
      return l2_norm(d);
    };
    errors.push_back({dist(s.phi, reference.phi),
                      dist(s.theta, reference.theta),
                      dist(s.sigma, reference.sigma)});
  }

  std::array<double, 3> fitted{};
  for (int f = 0; f < 3; ++f) {
    double mean = 0.0;
    for (size_t k = 1; k < dts.size(); ++k) {
      mean += std::log(errors[k - 1][f] / errors[k][f]) /
              std::log(dts[k - 1] / dts[k]);
    }
    fitted[f] = mean / static_cast<double>(dts.size() - 1);
  }
  return fitted;
}

State explicit_reference(const State& initial, double t_final, double dt_tiny,
                         const ModelParams& p, const RunSources* sources) {
  if (!(dt_tiny > 0.0))
    throw ValidationError("explicit_reference: dt_tiny must be > 0");
  if (t_final < initial.time)
    throw ValidationError("explicit_reference: t_final must be >= start time");
  const Grid& g = initial.grid();
  const std::int64_t n = g.cell_count();
  const double beta = p.relaxation;
  const double eps = p.interface;
  const double q = p.conductivity_exponent;

  State s = initial;
  Field lap_phi(g), lap_sigma(g), ktheta(g), lap_k(g);
  Field phi_next(g), theta_next(g), sigma_next(g);
  Field src_phi(g), src_theta(g), src_sigma(g);
  const double t_eps = 1e-12 * std::max(1.0, std::abs(t_final));
  long step = 0;
  while (s.time < t_final - t_eps) {
    const double dt = std::min(dt_tiny, t_final - s.time);
    laplacian(s.phi, lap_phi);
    laplacian(s.sigma, lap_sigma);
    {
      auto tv = s.theta.values();
      auto kv = ktheta.values();
      for (std::int64_t i = 0; i < n; ++i) kv[i] = kirchhoff(tv[i], q);
    }
    laplacian(ktheta, lap_k);

    const bool has_src = sources != nullptr;
    if (has_src) {
      if (sources->phi) src_phi = sources->phi(g, s.time);
      if (sources->theta) src_theta = sources->theta(g, s.time);
      if (sources->sigma) src_sigma = sources->sigma(g, s.time);
    }

    auto phv = s.phi.values();
    auto thv = s.theta.values();
    auto sgv = s.sigma.values();
    auto lp = lap_phi.values();
    auto ls = lap_sigma.values();
    auto lk = lap_k.values();
    auto pn = phi_next.values();
    auto tn = theta_next.values();
    auto sn = sigma_next.values();
    for (std::int64_t i = 0; i < n; ++i) {
      const double h = p.regulator.value(phv[i]);
      double phi_rate = (eps * lp[i] - double_well_prime(phv[i]) / eps +
                         thv[i] + (p.proliferation * sgv[i] - p.apoptosis) * h) /
                        beta;
      double sigma_rate = ls[i] - p.consumption * sgv[i] * h +
                          p.transfer * (p.vascular_nutrient - sgv[i]);
      if (has_src && sources->phi) phi_rate += src_phi.values()[i] / beta;
      if (has_src && sources->sigma) sigma_rate += src_sigma.values()[i];
      double theta_rate =
          (lk[i] + beta * phi_rate * phi_rate - thv[i] * phi_rate) /
          p.specific_heat;
      if (has_src && sources->theta)
        theta_rate += src_theta.values()[i] / p.specific_heat;
      pn[i] = phv[i] + dt * phi_rate;
      tn[i] = thv[i] + dt * theta_rate;
      sn[i] = sgv[i] + dt * sigma_rate;
    }
    s.phi = phi_next;
    s.theta = theta_next;
    s.sigma = sigma_next;
    s.time += dt;
    if (++step % 1000 == 0 || s.time >= t_final - t_eps) {
      for (std::int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(pn[i]) || !std::isfinite(tn[i]) ||
            !std::isfinite(sn[i])) {
          std::ostringstream os;
          os << "explicit_reference: blow-up at t = " << s.time
             << " (dt_tiny above the stability limit?)";
          throw OracleError(os.str());
        }
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dense small-system oracle: independent assembly + partial-pivot LU.

namespace {

using DenseMatrix = std::vector<std::vector<double>>;

void check_small(const Grid& g, const char* context) {
  if (g.cell_count() > 8) {
    std::ostringstream os;
    os << context << ": dense oracle restricted to <= 8 cells";
    throw ValidationError(os.str());
  }
}

// Mirror-closure Laplacian assembled from scratch (no shared stencil code).
DenseMatrix dense_laplacian(const Grid& g) {
  const int n = static_cast<int>(g.cell_count());
  DenseMatrix lap(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    // decode row-major coordinates by hand
    std::array<int, 3> c{0, 0, 0};
    std::int64_t rem = i;
    for (int a = 0; a < g.dim(); ++a) {
      c[a] = static_cast<int>(rem / g.stride(a));
      rem %= g.stride(a);
    }
    for (int a = 0; a < g.dim(); ++a) {
      const double w = 1.0 / (g.spacing(a) * g.spacing(a));
      if (c[a] > 0) {
        lap[i][i - g.stride(a)] += w;
        lap[i][i] -= w;
      }
      if (c[a] + 1 < g.cells(a)) {
        lap[i][i + g.stride(a)] += w;
        lap[i][i] -= w;
      }
    }
  }
  return lap;
}

std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b,
                             const char* context) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int pivot = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[pivot][k])) pivot = i;
    }
    if (a[pivot][k] == 0.0) {
      std::ostringstream os;
      os << context << ": singular dense system";
      throw SolverError(os.str(), 0.0, 0);
    }
    std::swap(a[k], a[pivot]);
    std::swap(b[k], b[pivot]);
    for (int i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      a[i][k] = 0.0;
      for (int j = k + 1; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

constexpr double kDenseTol = 1e-13;

// Damped Newton on a dense residual/Jacobian pair.
template <class ResidualFn, class JacobianFn>
std::vector<double> dense_newton(std::vector<double> x, const Grid& g,
                                 ResidualFn&& residual, JacobianFn&& jacobian,
                                 const char* context) {
  const double wt = std::sqrt(g.cell_volume());
  auto norm = [wt](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s) * wt;
  };
  std::vector<double> res = residual(x);
  double rnorm = norm(res);
  for (int it = 0; it < 200; ++it) {
    if (rnorm <= kDenseTol) return x;
    std::vector<double> rhs = res;
    for (double& v : rhs) v = -v;
    std::vector<double> delta = lu_solve(jacobian(x), rhs, context);
    double lambda = 1.0;
    bool reduced = false;
    while (lambda >= 1.0 / 1024.0) {
      std::vector<double> trial = x;
      for (size_t i = 0; i < x.size(); ++i) trial[i] += lambda * delta[i];
      std::vector<double> tres = residual(trial);
      const double tnorm = norm(tres);
      if (tnorm < rnorm) {
        x = std::move(trial);
        res = std::move(tres);
        rnorm = tnorm;
        reduced = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!reduced) break;
  }
  if (rnorm <= kDenseTol) return x;
  std::ostringstream os;
  os << context << ": dense Newton stalled (residual " << rnorm << ")";
  throw SolverError(os.str(), rnorm, 200);
}

}  // namespace

Field dense_phase_step(const State& state, const Field& theta_used,
                       const Field& sigma_used, double dt,
                       const ModelParams& p, const Field* source) {
  const Grid& g = state.grid();
  check_small(g, "dense_phase_step");
  const int n = static_cast<int>(g.cell_count());
  const DenseMatrix lap = dense_laplacian(g);
  const double beta = p.relaxation;
  const double eps = p.interface;

  // dt-scaled increment form, matching the production substep.
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i) {
    const double phin = state.phi[i];
    rhs[i] = beta * phin +
             dt * (6.0 / eps * phin * phin + theta_used[i] +
                   (p.proliferation * sigma_used[i] - p.apoptosis) *
                       p.regulator.value(phin));
    if (source) rhs[i] += dt * (*source)[i];
  }

  auto residual = [&](const std::vector<double>& phi) {
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
      double lap_i = 0.0;
      for (int j = 0; j < n; ++j) lap_i += lap[i][j] * phi[j];
      r[i] = beta * phi[i] +
             dt * (-eps * lap_i +
                   (4.0 * phi[i] * phi[i] * phi[i] + 2.0 * phi[i]) / eps) -
             rhs[i];
    }
    return r;
  };
  auto jacobian = [&](const std::vector<double>& phi) {
    DenseMatrix j(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) j[i][k] = -dt * eps * lap[i][k];
      j[i][i] += beta + dt * (12.0 * phi[i] * phi[i] + 2.0) / eps;
    }
    return j;
  };

  std::vector<double> x(state.phi.values().begin(), state.phi.values().end());
  x = dense_newton(std::move(x), g, residual, jacobian, "dense_phase_step");
  return Field(g, std::move(x));
}

Field dense_nutrient_step(const State& state, const Field& phi_used,
                          double dt, const ModelParams& p,
                          const Field* source) {
  const Grid& g = state.grid();
  check_small(g, "dense_nutrient_step");
  const int n = static_cast<int>(g.cell_count());
  const DenseMatrix lap = dense_laplacian(g);

  DenseMatrix a(n, std::vector<double>(n, 0.0));
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i][j] = -dt * lap[i][j];
    a[i][i] += 1.0 + dt * (p.transfer +
                           p.consumption * p.regulator.value(phi_used[i]));
    rhs[i] = state.sigma[i] + dt * p.transfer * p.vascular_nutrient;
    if (source) rhs[i] += dt * (*source)[i];
  }
  return Field(g, lu_solve(std::move(a), std::move(rhs),
                           "dense_nutrient_step"));
}

Field dense_temperature_step(const State& state, const Field& m, double dt,
                             const ModelParams& p, const Field* source) {
  const Grid& g = state.grid();
  check_small(g, "dense_temperature_step");
  const int n = static_cast<int>(g.cell_count());
  const double cv = p.specific_heat;
  const double q = p.conductivity_exponent;

  const double structure = cv / dt + m.min();
  if (!(structure > 0.0))
    throw StepSizeError(
        "dense_temperature_step: c_V/dt + min(m) <= 0 breaks the positivity "
        "structure");

  const DenseMatrix lap = dense_laplacian(g);
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i) {
    rhs[i] = cv * state.theta[i] + dt * p.relaxation * m[i] * m[i];
    if (source) rhs[i] += dt * (*source)[i];
  }

  auto residual = [&](const std::vector<double>& theta) {
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i) k[i] = kirchhoff(theta[i], q);
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
      double lap_k = 0.0;
      for (int j = 0; j < n; ++j) lap_k += lap[i][j] * k[j];
      r[i] = (cv + dt * m[i]) * theta[i] - dt * lap_k - rhs[i];
    }
    return r;
  };
  auto jacobian = [&](const std::vector<double>& theta) {
    DenseMatrix j(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k)
        j[i][k] = -dt * lap[i][k] * conductivity(theta[k], q);
      j[i][i] += cv + dt * m[i];
    }
    return j;
  };

  std::vector<double> x(state.theta.values().begin(),
                        state.theta.values().end());
  x = dense_newton(std::move(x), g, residual, jacobian,
                   "dense_temperature_step");
  return Field(g, std::move(x));
}

Field secant_flux_divergence(const Field& theta, double q) {
  const Grid& g = theta.grid();
  Field out(g);
  auto tv = theta.values();
  auto ov = out.values();
  const std::int64_t n = g.cell_count();
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t stride = g.stride(a);
    const std::int64_t na = g.cells(a);
    const double inv_h2 = 1.0 / (g.spacing(a) * g.spacing(a));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t pos = (i / stride) % na;
      if (pos + 1 >= na) continue;
      const std::int64_t j = i + stride;
      const double ti = tv[i], tj = tv[j];
      const double slope = (ti == tj)
                               ? conductivity(ti, q)
                               : (kirchhoff(tj, q) - kirchhoff(ti, q)) /
                                     (tj - ti);
      const double flux = slope * (tj - ti) * inv_h2;
      ov[i] += flux;
      ov[j] -= flux;
    }
  }
  return out;
}

State random_admissible_state(const Grid& grid, std::uint64_t seed,
                              const RandomStateOptions& opt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> wavenumber(1, 3);

  auto smooth = [&](double lo, double hi, double margin_lo, double margin_hi) {
    const double offset = lo + (hi - lo) * unit(rng);
    const double max_amp =
        0.9 * std::min(offset - margin_lo, margin_hi - offset);
    const int n_modes = 2 + static_cast<int>(unit(rng) * 2.0);
    std::vector<CosineMode> modes(n_modes);
    double total = 0.0;
    for (CosineMode& mode : modes) {
      for (int a = 0; a < grid.dim(); ++a)
        mode.wavenumbers[a] = wavenumber(rng);
      mode.amplitude = 2.0 * unit(rng) - 1.0;
      total += std::abs(mode.amplitude);
    }
    if (total > 0.0) {
      const double scale = max_amp * unit(rng) / total;
      for (CosineMode& mode : modes) mode.amplitude *= scale;
    }
    return cosine_field(grid, offset, modes);
  };

  const double inf = std::numeric_limits<double>::infinity();
  Field phi = smooth(0.25, 0.75, 0.0, 1.0);
  Field theta = smooth(opt.theta_floor + 0.25, opt.theta_floor + 1.25,
                       opt.theta_floor, inf);
  Field sigma = smooth(0.3, 0.7, 0.0, 1.0);
  return State(std::move(phi), std::move(theta), std::move(sigma), 0.0);
}

}  // namespace actherm::verify
