#include "actherm/constitutive.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "actherm/errors.hpp"

namespace actherm {

double double_well(double phi) {
  const double w = phi * (1.0 - phi);
  return w * w;
}

double double_well_prime(double phi) {
  return phi * (4.0 * phi * phi - 6.0 * phi + 2.0);
}

double regulator_h(double r) {
  if (r <= 0.0) return 0.0;
  if (r >= 1.0) return 1.0;
  return r * r * (3.0 - 2.0 * r);
}

double regulator_h_prime(double r) {
  if (r <= 0.0 || r >= 1.0) return 0.0;
  return 6.0 * r * (1.0 - r);
}

Regulator smoothstep_regulator() {
  return Regulator{"smoothstep", &regulator_h, &regulator_h_prime};
}

double pow_abs(double r, double q) {
  if (r == 0.0) return 0.0;
  return std::pow(std::abs(r), q);
}

double conductivity(double theta, double q) {
  return 1.0 + pow_abs(theta, q);
}

double kirchhoff(double theta, double q) {
  return theta + theta * pow_abs(theta, q) / (q + 1.0);
}

double kirchhoff_inverse(double u, double q, double tol) {
  if (tol <= 0.0) throw ValidationError("kirchhoff_inverse: tol must be > 0");
  if (u == 0.0) return 0.0;

  // kappa >= 1 gives |theta| <= |u|, so [-|u|, |u|] brackets the root.
  // Initial guess from the two asymptotic regimes of K: identity for small
  // arguments, r^{q+1}/(q+1) for large ones.
  double lo = -std::abs(u), hi = std::abs(u);
  const double large = std::pow((q + 1.0) * std::abs(u), 1.0 / (q + 1.0));
  double x = (u > 0.0 ? 1.0 : -1.0) * std::min(std::abs(u), large);
  double f = kirchhoff(x, q) - u;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  const int cap = 100;
  for (int it = 0; it < cap; ++it) {
    if (std::abs(f) <= tol) return x;
    // The bracket pins the root to machine precision even when the residual
    // in K-space cannot reach tol (|u| large).
    if (hi - lo <= 4.0 * eps * std::max(1.0, std::abs(x))) return x;
    if (f > 0.0) hi = x; else lo = x;
    double step = f / conductivity(x, q);
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
    f = kirchhoff(x, q) - u;
  }
  if (std::abs(f) <= tol) return x;
  throw SolverError("kirchhoff_inverse: iteration cap reached (tol too tight?)",
                    std::abs(f), cap);
}

void ModelParams::validate() const {
  std::ostringstream bad;
  auto require = [&](bool ok, const char* msg) {
    if (!ok) {
      if (bad.tellp() > 0) bad << "; ";
      bad << msg;
    }
  };
  require(proliferation > 0.0, "proliferation must be > 0");
  require(apoptosis > 0.0, "apoptosis must be > 0");
  require(consumption > 0.0, "consumption must be > 0");
  require(transfer > 0.0, "transfer must be > 0");
  require(vascular_nutrient >= 0.0 && vascular_nutrient <= 1.0,
          "vascular_nutrient (sigma_B) must lie in [0,1]");
  require(relaxation > 0.0, "relaxation (beta) must be > 0");
  require(specific_heat > 0.0, "specific_heat (c_V) must be > 0");
  require(interface > 0.0, "interface (eps) must be > 0");
  require(conductivity_exponent >= 2.0, "conductivity_exponent (q) must be >= 2");
  require(static_cast<bool>(regulator.value) &&
              static_cast<bool>(regulator.derivative),
          "regulator must provide value and derivative");
  if (bad.tellp() > 0) throw ValidationError("ModelParams: " + bad.str());
  if (regulator.value(0.0) != 0.0)
    throw ValidationError("ModelParams: regulator must satisfy h(0) = 0");
}

}  // namespace actherm
