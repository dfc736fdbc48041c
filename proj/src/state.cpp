#include "actherm/state.hpp"

#include "actherm/errors.hpp"

namespace actherm {

State::State(Field phi_in, Field theta_in, Field sigma_in, double time_in)
    : phi(std::move(phi_in)),
      theta(std::move(theta_in)),
      sigma(std::move(sigma_in)),
      time(time_in) {
  if (phi.grid() != theta.grid() || phi.grid() != sigma.grid())
    throw ValidationError("State: phi, theta, sigma must share one grid");
  if (time < 0.0) throw ValidationError("State: time must be >= 0");
}

bool State::admissible(double slack) const {
  return theta.min() >= -slack && phi.min() >= -slack &&
         sigma.min() >= -slack && sigma.max() <= 1.0 + slack;
}

}  // namespace actherm
