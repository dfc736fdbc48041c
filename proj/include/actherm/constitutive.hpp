#pragma once

#include <functional>
#include <string>

namespace actherm {

/// Bounded monotone C^1 gating function. The default is the clamped cubic
/// smoothstep; alternative regulators can be dropped into ModelParams and
/// every source-term path picks them up through there.
struct Regulator {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

Regulator smoothstep_regulator();

/// Scalar constitutive constants of the model. Defaults follow the
/// normalization beta = c_V = eps = 1, q = 2, sigma_B = 1.
struct ModelParams {
  double proliferation = 1.0;        // P
  double apoptosis = 1.0;            // A
  double consumption = 1.0;          // C
  double transfer = 1.0;             // B
  double vascular_nutrient = 1.0;    // sigma_B, in [0, 1]
  double relaxation = 1.0;           // beta
  double specific_heat = 1.0;        // c_V
  double interface = 1.0;            // eps
  double conductivity_exponent = 2.0;  // q >= 2

  Regulator regulator = smoothstep_regulator();

  /// Throws ValidationError naming the violated invariant.
  void validate() const;
};

/// F(phi) = phi^2 (1 - phi)^2.
double double_well(double phi);

/// F'(phi) = 4 phi^3 - 6 phi^2 + 2 phi.
double double_well_prime(double phi);

/// Clamped cubic smoothstep: 0 for r <= 0, r^2 (3 - 2r) on [0, 1], 1 for
/// r >= 1. Nondecreasing, bounded, h(0) = 0.
double regulator_h(double r);

/// Derivative of regulator_h: 6 r (1 - r) on [0, 1], 0 outside; sup = 1.5.
double regulator_h_prime(double r);

/// kappa(theta) = 1 + |theta|^q, always >= 1.
double conductivity(double theta, double q);

/// K(theta) = theta + theta |theta|^q / (q + 1); strictly increasing, odd.
double kirchhoff(double theta, double q);

/// Solves K(theta) = u by safeguarded Newton (bracket [-|u|, |u|], cap 100
/// iterations). Throws SolverError if the tolerance is unreachable.
double kirchhoff_inverse(double u, double q, double tol);

/// |r|^q with the r = 0 case returned exactly as 0.
double pow_abs(double r, double q);

}  // namespace actherm
