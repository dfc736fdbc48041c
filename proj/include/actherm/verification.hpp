#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "actherm/constitutive.hpp"
#include "actherm/state.hpp"
#include "actherm/stepper.hpp"

namespace actherm::verify {

/// Closed-form space-time function on the unit box.
using SpaceTimeFn = std::function<double(std::span<const double>, double)>;

/// Manufactured solution triple with the exact residual sources obtained by
/// substituting it into the three equations. Lives on the unit box
/// [0,1]^dim; the cosine profiles have identically vanishing normal
/// derivative on the boundary.
struct ManufacturedCase {
  int dim = 1;
  SpaceTimeFn phi, theta, sigma;
  SpaceTimeFn source_phi, source_theta, source_sigma;
  bool admissible = true;
};

/// Default case: phi = (2 + C)/4 e^{-t}, theta = (2 + C)/4 (1 + e^{-t}/2),
/// sigma = 1/2 + C/4 e^{-t}, with C(x) = prod_a cos(pi x_a). Sources in
/// closed form for the given parameters (including their regulator h and
/// conductivity exponent q).
ManufacturedCase manufactured_case_default(const ModelParams& p, int dim = 1);

/// Samples a closed form at cell centers.
Field sample(const Grid& grid, const SpaceTimeFn& fn, double t);

/// Initial state of a case on the given grid.
State initial_state(const ManufacturedCase& c, const Grid& grid);

/// Wraps the case's sources as run() forcing generators.
RunSources run_sources(const ManufacturedCase& c);

struct ConvergenceReport {
  std::vector<int> resolutions;
  /// l2 errors at T_final per resolution: [phi, theta, sigma].
  std::vector<std::array<double, 3>> errors;
  /// Successive log2-ratio orders, one row per resolution pair.
  std::vector<std::array<double, 3>> step_orders;
  /// Mean of the successive orders per field.
  std::array<double, 3> fitted_orders{};
  std::array<bool, 3> pass{};
  double order_min = 1.8;
  double order_max = 2.3;
};

/// Runs the case at each resolution (unit box, dt = dt_rule(resolution)),
/// integrating to t_final with the manufactured sources, and fits
/// convergence orders from the l2 errors at t_final.
ConvergenceReport run_mms(const ManufacturedCase& mc,
                          const std::vector<int>& resolutions,
                          const std::function<double(int)>& dt_rule,
                          const StepControls& c, const ModelParams& p,
                          double t_final = 0.5, double order_min = 1.8,
                          double order_max = 2.3);

/// Temporal orders on one fixed grid: integrates the case for each dt and
/// for dt_ref, then fits orders from distances to the dt_ref trajectory at
/// t_final (the shared spatial error cancels).
std::array<double, 3> temporal_orders(const ManufacturedCase& mc, int cells,
                                      const std::vector<double>& dts,
                                      double dt_ref, const StepControls& c,
                                      const ModelParams& p,
                                      double t_final = 0.5);

/// Fully explicit forward-Euler integrator for the same system with the
/// same spatial operators; no Newton, no splitting. The caller must keep
/// dt_tiny below the explicit stability limit
/// (roughly h^2 / (2 dim (1 + max kappa))). Throws OracleError on blow-up.
State explicit_reference(const State& initial, double t_final, double dt_tiny,
                         const ModelParams& p,
                         const RunSources* sources = nullptr);

/// Dense damped-Newton solves of the implicit substeps on grids of at most
/// 8 cells; independent assembly and linear algebra (partial-pivot LU).
/// Residual tolerance 1e-13 in the grid-weighted l2 norm.
Field dense_phase_step(const State& state, const Field& theta_used,
                       const Field& sigma_used, double dt,
                       const ModelParams& p, const Field* source = nullptr);
Field dense_nutrient_step(const State& state, const Field& phi_used,
                          double dt, const ModelParams& p,
                          const Field* source = nullptr);
Field dense_temperature_step(const State& state, const Field& m, double dt,
                             const ModelParams& p,
                             const Field* source = nullptr);

/// div(kappa_face grad theta) with the face conductivity taken as the
/// secant slope of K (kappa(theta_i) on equal values); the discrete
/// counterpart of int kappa^2 |grad theta|^2 = ||grad K(theta)||^2 and
/// identical to laplacian(K(theta)) field-wise.
Field secant_flux_divergence(const Field& theta, double q);

struct RandomStateOptions {
  double theta_floor = 0.0;  // generated theta stays >= this value
};

/// Smooth random admissible state (phi >= 0, theta >= theta_floor,
/// sigma in [0,1]) built from a few seeded cosine modes.
State random_admissible_state(const Grid& grid, std::uint64_t seed,
                              const RandomStateOptions& opt = {});

}  // namespace actherm::verify
