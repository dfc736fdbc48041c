#pragma once

#include <vector>

#include "actherm/constitutive.hpp"
#include "actherm/state.hpp"
#include "actherm/stepper.hpp"

namespace actherm {

/// Discrete internal energy
///   E = int [ eps/2 |grad phi|^2 + (1/eps) F(phi) + c_V theta ].
/// Nonnegative whenever theta >= 0.
double internal_energy(const State& state, const ModelParams& p);

/// First-law defect of one step:
///   | E(after) - E(before) - dt * int gamma m |,
/// with m = (phi_after - phi_before)/dt and gamma = (P sigma_after - A)
/// h(phi_before). A pure O(dt^2) time-discretization defect; zero at rest.
double energy_balance_residual(const State& before, const State& after,
                               const ModelParams& p, double dt);

/// Total entropy int (c_V ln theta + phi). Throws
/// NonpositiveTemperatureError when min theta <= 0 (skip the monitor).
double total_entropy(const State& state, const ModelParams& p);

/// S(after) - S(before); nonnegative for the implicit scheme up to solver
/// tolerances (integrated Clausius-Duhem).
double entropy_increment(const State& before, const State& after,
                         const ModelParams& p);

/// Squared stability metric of the uniqueness argument:
///   ||theta_a - theta_b||_*^2 + ||phi_a - phi_b||^2
///   + 1/2 |phi_a - phi_b|_{H1}^2 + ||sigma_a - sigma_b||^2.
double stability_functional(const State& a, const State& b, double tol);

struct DiagnosticsRecord {
  double t = 0.0;
  double energy = 0.0;
  double entropy = 0.0;  // NaN when the monitor was skipped
  double energy_residual = 0.0;
  double entropy_increment = 0.0;
  double min_theta = 0.0;
  double min_phi = 0.0;
  double min_sigma = 0.0;
  double max_sigma = 0.0;
  double stability_functional = 0.0;  // paired-run mode only
};

struct DependenceResult {
  std::vector<double> times;
  std::vector<double> functional;  // E(t_k), k = 0 at t = 0
  double exponent = 0.0;           // lambda-hat
  double ratio_final = 0.0;        // E(T) / E(0), 0 if E(0) == 0
};

/// Runs the pair (initial, initial + scale * smooth cosine bump) and fits
/// E(t) ~ E(0) exp(lambda t) by least squares on the second half of the
/// record, raising lambda minimally so E(t_k) <= E(0) exp(lambda t_k)
/// (1 + fit_tolerance) holds for every sample.
DependenceResult continuous_dependence_test(const State& initial,
                                            double perturbation_scale,
                                            double t_final,
                                            const StepControls& c,
                                            const ModelParams& p,
                                            double fit_tolerance = 0.2);

}  // namespace actherm
