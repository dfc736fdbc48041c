#pragma once

#include <functional>

#include "actherm/constitutive.hpp"
#include "actherm/state.hpp"

namespace actherm {

struct StepControls {
  double dt = 1e-3;
  double newton_tol = 1e-10;
  int newton_max = 50;
  bool picard_enabled = false;
  double picard_tol = 1e-10;
  int picard_max = 8;
  double linear_tol = 1e-10;

  void validate() const;
};

/// Per-step diagnostics. entropy_increment is NaN when the entropy monitor
/// was skipped (nonpositive temperature).
struct StepReport {
  int newton_iters_phi = 0;
  int newton_iters_theta = 0;
  /// Compositions executed: 0 with Picard off, >= 1 with Picard on.
  int picard_iters = 0;
  /// Last ratio of successive Picard iterate distances; 0 if fewer than two
  /// distances were measured.
  double picard_contraction = 0.0;
  double min_theta = 0.0;
  double min_phi = 0.0;
  double min_sigma = 0.0;
  double max_sigma = 0.0;
  double energy_residual = 0.0;
  double entropy_increment = 0.0;
  /// Filled by paired-run harnesses (continuous dependence); 0 otherwise.
  double stability_functional = 0.0;
  double dt_used = 0.0;
};

/// Already-evaluated forcing fields for one step (manufactured solutions);
/// null members mean no forcing for that equation.
struct StepSources {
  const Field* phi = nullptr;
  const Field* theta = nullptr;
  const Field* sigma = nullptr;
};

/// Forcing generators evaluated by run() at each implicit time level.
using SourceFn = std::function<Field(const Grid&, double)>;
struct RunSources {
  SourceFn phi;
  SourceFn theta;
  SourceFn sigma;
};

struct PhaseStepResult {
  Field phi;
  int newton_iters = 0;
};

struct TemperatureStepResult {
  Field theta;
  int newton_iters = 0;
};

struct AdvanceResult {
  State state;
  StepReport report;
};

/// Phase substep: solves, cell-wise,
///   beta (phi' - phi^n)/dt - eps Lap phi' + (1/eps)(Fc'(phi') + Fe'(phi^n))
///     = theta_used + (P sigma_used - A) h(phi^n) + source
/// with the convex part Fc' = 4 phi^3 + 2 phi implicit and the concave part
/// Fe' = -6 phi^2 explicit (Eyre splitting). h is frozen at phi^n so the
/// Newton residual is linear in the source. Damped Newton, measured on the
/// dt-scaled increment form so newton_tol is uniform in dt; throws
/// SolverError on divergence.
PhaseStepResult step_phase(const State& state, const Field& theta_used,
                           const Field& sigma_used, const StepControls& c,
                           const ModelParams& p,
                           const Field* source = nullptr);

/// Nutrient substep: the linear implicit system
///   (1/dt + B + C h(phi_used)) sigma' - Lap sigma' = sigma^n/dt + B sigma_B
///     + source,
/// all reaction terms implicit (M-matrix, keeps sigma in [0,1]).
Field step_nutrient(const State& state, const Field& phi_used,
                    const StepControls& c, const ModelParams& p,
                    const Field* source = nullptr);

/// Temperature substep on the Kirchhoff form:
///   c_V (theta' - theta^n)/dt - Lap K(theta') + m theta' = beta m^2 + source.
/// Refuses the step (StepSizeError) unless c_V/dt + min(m) > 0 — the
/// implicit reaction must keep the diagonal dominant so the M-matrix
/// positivity argument holds.
TemperatureStepResult step_temperature(const State& state, const Field& m,
                                       const StepControls& c,
                                       const ModelParams& p,
                                       const Field* source = nullptr);

/// One full step: phi from (theta^n, sigma^n), then sigma from phi^{n+1},
/// then theta from m = (phi^{n+1} - phi^n)/dt. With picard_enabled the
/// composition is repeated with the theta input replaced by the latest
/// iterate until the combined l2 distance of the triple drops below
/// picard_tol or picard_max compositions are reached.
AdvanceResult advance(const State& state, const StepControls& c,
                      const ModelParams& p,
                      const StepSources* sources = nullptr);

using StepSink = std::function<void(const State&, const StepReport&)>;

/// Advances to t_final (last step shortened to land exactly), invoking the
/// sink after every accepted step. On a refused or failed step the driver
/// halves dt and retries, at most 10 halvings per run, then aborts with the
/// failing substep and time in the message.
State run(const State& initial, double t_final, const StepControls& c,
          const ModelParams& p, const StepSink& sink = {},
          const RunSources* sources = nullptr);

}  // namespace actherm
