#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "actherm/constitutive.hpp"
#include "actherm/state.hpp"
#include "actherm/stepper.hpp"

namespace actherm::io {

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

// --- configuration ---------------------------------------------------------

struct FieldInit {
  bool specified = false;
  double constant = 0.0;
  std::vector<CosineMode> modes;

  bool operator==(const FieldInit&) const = default;
};

struct InitialSpec {
  std::string preset;         // "rest", "smooth", "random" or empty
  std::string snapshot_path;  // restart file, empty if unused
  FieldInit phi, theta, sigma;

  bool operator==(const InitialSpec&) const = default;
};

struct OutputSpec {
  std::string directory = "out";
  int snapshot_stride = 0;  // 0 disables periodic snapshots
  std::string csv = "diagnostics.csv";

  bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
  ModelParams params;
  std::vector<int> grid_cells;
  std::vector<double> grid_extent;
  StepControls controls;
  InitialSpec initial;
  OutputSpec output;
  double t_final = 0.0;
  bool allow_inadmissible = false;
  std::optional<double> perturbation_scale;  // depend mode
  std::uint64_t seed = 0;

  Grid make_grid() const;
  void validate() const;

  bool operator==(const RunConfig& other) const;
};

/// Parses and fully validates a config file; unknown keys are hard errors.
/// Grammar documented in docs/config_format.md.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& origin);

/// Canonical serialization; parse_config(save_config(c)) == c.
std::string save_config(const RunConfig& cfg);

/// Builds the initial state (preset, per-field blocks, or snapshot restart) and
/// checks admissibility: throws ValidationError on inadmissible data unless
/// allow_inadmissible is set, in which case it warns on stderr.
State build_initial_state(const RunConfig& cfg);

// --- snapshots --------------------------------------------------------------

/// Self-describing text snapshot; byte-exact round trip
/// (docs/file_formats.md).
void write_snapshot(const State& state, const std::filesystem::path& path);
State read_snapshot(const std::filesystem::path& path);

// --- diagnostics CSV --------------------------------------------------------

/// One header row, then one row per accepted step:
/// step,t,dt_used,E,S,energy_residual,entropy_increment,min_theta,min_phi,
/// min_sigma,max_sigma,newton_iters_phi,newton_iters_theta,picard_iters,
/// picard_contraction
class CsvWriter {
public:
  explicit CsvWriter(const std::filesystem::path& path);

  void write_row(long step, const State& state, const StepReport& report,
                 const ModelParams& params);
  void flush();

  static const char* header();

private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// --- run driver (shared by the CLI and the test suites) ---------------------

struct RunOutputs {
  std::optional<State> final_state;
  std::filesystem::path csv_path;
  long steps = 0;
};

/// Runs the configured simulation, streaming diagnostics to the CSV and
/// writing snapshots per the output settings. Deterministic: identical configs
/// produce byte-identical outputs.
RunOutputs run_simulation(const RunConfig& cfg, bool quiet = true);

}  // namespace actherm::io
