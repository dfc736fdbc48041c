// actherm command line driver: simulate, verify, and compare.
//
// Subcommands
//   run          simulate a config, stream diagnostics CSV + snapshots
//   mms          manufactured-solution convergence suite
//   oracle       implicit stepper vs explicit reference comparison
//   depend       continuous-dependence (paired perturbation) mode
//   check-config validate a config and exit
//
// Exit codes: 0 success, 1 validation error, 2 solver failure, 3 I/O error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actherm/diagnostics.hpp"
#include "actherm/errors.hpp"
#include "actherm/io.hpp"
#include "actherm/verification.hpp"

namespace {

using namespace actherm;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  double dt = 0.0;
  double tmax = -1.0;
  int cells = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* cfg = cmd->add_option("--config", f.config_path, "config file path");
  if (config_required) cfg->required();
  cmd->add_option("--out", f.out_dir, "output directory (overrides config)");
  cmd->add_option("--dt", f.dt, "time step (overrides config)");
  cmd->add_option("--tmax", f.tmax, "final time (overrides config)");
  cmd->add_option("--cells", f.cells,
                  "cells per axis (overrides config, all axes)");
  cmd->add_option("--seed", f.seed, "seed for randomized modes")
      ->each([&f](const std::string&) { f.seed_given = true; });
  cmd->add_flag("--quiet", f.quiet, "suppress progress output");
}

io::RunConfig effective_config(const CommonFlags& f) {
  io::RunConfig cfg;
  if (!f.config_path.empty()) {
    cfg = io::load_config(f.config_path);
  } else {
    cfg.grid_cells = {64};
    cfg.grid_extent = {1.0};
    cfg.t_final = 0.1;
    cfg.initial.preset = "smooth";
  }
  if (!f.out_dir.empty()) cfg.output.directory = f.out_dir;
  if (f.dt > 0.0) cfg.controls.dt = f.dt;
  if (f.tmax >= 0.0) cfg.t_final = f.tmax;
  if (f.cells > 0)
    cfg.grid_cells.assign(cfg.grid_cells.size(), f.cells);
  if (f.seed_given) cfg.seed = f.seed;
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonFlags& f) {
  io::RunConfig cfg = effective_config(f);
  io::run_simulation(cfg, f.quiet);
  return 0;
}

int cmd_check_config(const CommonFlags& f) {
  io::RunConfig cfg = io::load_config(f.config_path);
  io::build_initial_state(cfg);  // exercises the initial-condition block too
  if (!f.quiet)
    std::cout << "check-config: '" << f.config_path << "' is valid\n";
  return 0;
}

int cmd_mms(const CommonFlags& f) {
  io::RunConfig cfg = effective_config(f);
  verify::ManufacturedCase mc = verify::manufactured_case_default(
      cfg.params, static_cast<int>(cfg.grid_cells.size()));
  std::vector<int> resolutions{16, 32, 64};
  if (f.cells > 0) resolutions = {f.cells / 4, f.cells / 2, f.cells};
  auto dt_rule = [](int n) {
    const double h = 1.0 / n;
    return h * h;
  };
  verify::ConvergenceReport report = verify::run_mms(
      mc, resolutions, dt_rule, cfg.controls, cfg.params, 0.5);

  const std::filesystem::path out_dir(
      f.out_dir.empty() ? cfg.output.directory : f.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("mms: cannot create '" + out_dir.string() + "'");
  const auto csv_path = out_dir / "convergence.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("mms: cannot open '" + csv_path.string() + "'");
  csv << "resolution,err_phi,err_theta,err_sigma,order_phi,order_theta,"
         "order_sigma\n";
  for (size_t k = 0; k < report.resolutions.size(); ++k) {
    csv << report.resolutions[k];
    for (int field = 0; field < 3; ++field)
      csv << ',' << io::format_double(report.errors[k][field]);
    for (int field = 0; field < 3; ++field) {
      csv << ',';
      if (k > 0) csv << io::format_double(report.step_orders[k - 1][field]);
    }
    csv << "\n";
  }
  if (!f.quiet) {
    std::cout << "mms: fitted orders phi=" << report.fitted_orders[0]
              << " theta=" << report.fitted_orders[1]
              << " sigma=" << report.fitted_orders[2] << " -> "
              << csv_path.string() << "\n";
  }
  if (!(report.pass[0] && report.pass[1] && report.pass[2]))
    throw SolverError("mms: convergence order outside the expected window",
                      0.0, 0);
  return 0;
}

int cmd_oracle(const CommonFlags& f) {
  io::RunConfig cfg = effective_config(f);
  if (cfg.initial.preset.empty() && cfg.initial.snapshot_path.empty() &&
      !cfg.initial.phi.specified && !cfg.initial.theta.specified &&
      !cfg.initial.sigma.specified) {
    cfg.initial.preset = "smooth";
  }
  State initial = io::build_initial_state(cfg);
  const double t_final = cfg.t_final;

  State implicit = run(initial, t_final, cfg.controls, cfg.params);

  // Keep the explicit oracle inside its stability region.
  double h_min = cfg.grid_extent[0] / cfg.grid_cells[0];
  for (size_t a = 1; a < cfg.grid_cells.size(); ++a)
    h_min = std::min(h_min, cfg.grid_extent[a] / cfg.grid_cells[a]);
  const double kappa_max =
      conductivity(std::max(std::abs(initial.theta.min()),
                            std::abs(initial.theta.max())) + 1.0,
                   cfg.params.conductivity_exponent);
  const double dt_stable = h_min * h_min /
                           (2.0 * cfg.grid_cells.size() * (1.0 + kappa_max));
  const double dt_tiny = std::min(1e-6, dt_stable);
  State reference =
      verify::explicit_reference(initial, t_final, dt_tiny, cfg.params);

  auto rel = [](const Field& a, const Field& b) {
    Field d = a;
    auto dv = d.values();
    auto bv = b.values();
    for (std::int64_t i = 0; i < d.size(); ++i) dv[i] -= bv[i];
    const double scale = std::max(l2_norm(b), 1e-30);
    return l2_norm(d) / scale;
  };
  const double rphi = rel(implicit.phi, reference.phi);
  const double rtheta = rel(implicit.theta, reference.theta);
  const double rsigma = rel(implicit.sigma, reference.sigma);
  std::cout << "oracle: relative l2 distance at t=" << t_final
            << " phi=" << io::format_double(rphi)
            << " theta=" << io::format_double(rtheta)
            << " sigma=" << io::format_double(rsigma) << "\n";
  return 0;
}

int cmd_depend(const CommonFlags& f) {
  io::RunConfig cfg = effective_config(f);
  if (!cfg.perturbation_scale)
    throw ValidationError(
        "depend: config needs a perturbation { scale = ... } block");
  State initial = io::build_initial_state(cfg);
  DependenceResult result = continuous_dependence_test(
      initial, *cfg.perturbation_scale, cfg.t_final, cfg.controls, cfg.params);

  const std::filesystem::path out_dir(
      f.out_dir.empty() ? cfg.output.directory : f.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("depend: cannot create '" + out_dir.string() + "'");
  const auto csv_path = out_dir / "dependence.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("depend: cannot open '" + csv_path.string() + "'");
  csv << "t,stability_functional\n";
  for (size_t k = 0; k < result.times.size(); ++k) {
    csv << io::format_double(result.times[k]) << ','
        << io::format_double(result.functional[k]) << "\n";
  }
  if (!f.quiet) {
    std::cout << "depend: growth exponent " << io::format_double(result.exponent)
              << ", E(T)/E(0) = " << io::format_double(result.ratio_final)
              << " -> " << csv_path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-volume solver for the coupled phase-field / "
               "temperature / nutrient system"};
  app.require_subcommand(1);

  CommonFlags run_flags, mms_flags, oracle_flags, depend_flags, check_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate a config");
  add_common(run_cmd, run_flags, true);
  CLI::App* mms_cmd = app.add_subcommand("mms", "convergence suite");
  add_common(mms_cmd, mms_flags, false);
  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "explicit-reference comparison");
  add_common(oracle_cmd, oracle_flags, false);
  CLI::App* depend_cmd =
      app.add_subcommand("depend", "continuous-dependence mode");
  add_common(depend_cmd, depend_flags, true);
  CLI::App* check_cmd =
      app.add_subcommand("check-config", "validate a config and exit");
  add_common(check_cmd, check_flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << "actherm: error: validation: bad command line\n";
    return 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags);
    if (mms_cmd->parsed()) return cmd_mms(mms_flags);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_flags);
    if (depend_cmd->parsed()) return cmd_depend(depend_flags);
    if (check_cmd->parsed()) return cmd_check_config(check_flags);
  } catch (const ValidationError& e) {
    std::cerr << "actherm: error: validation: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "actherm: error: io: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    // SolverError, StepSizeError, OracleError and anything else numeric
    std::cerr << "actherm: error: solver: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "actherm: error: internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
