#pragma once

#include "actherm/grid.hpp"

namespace actherm {

/// The triple (phi, theta, sigma) at one time. Admissibility (theta >= 0,
/// phi >= 0, sigma in [0,1]) is monitored, never enforced by clipping.
struct State {
  Field phi;
  Field theta;
  Field sigma;
  double time = 0.0;

  State(Field phi, Field theta, Field sigma, double time = 0.0);

  const Grid& grid() const { return phi.grid(); }

  bool admissible(double slack = 0.0) const;
};

}  // namespace actherm
