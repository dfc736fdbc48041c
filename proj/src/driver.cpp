#include <iomanip>
#include <iostream>
#include <sstream>

#include "actherm/errors.hpp"
#include "actherm/io.hpp"

namespace actherm::io {

namespace {

std::filesystem::path snapshot_name(const std::filesystem::path& dir,
                                    long step) {
  std::ostringstream os;
  os << "snapshot_" << std::setw(6) << std::setfill('0') << step << ".snap";
  return dir / os.str();
}

}  // namespace

RunOutputs run_simulation(const RunConfig& cfg, bool quiet) {
  cfg.validate();
  State initial = build_initial_state(cfg);

  const std::filesystem::path out_dir(cfg.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("run: cannot create output directory '" + out_dir.string() +
                  "': " + ec.message());

  RunOutputs outputs;
  outputs.csv_path = out_dir / cfg.output.csv;
  CsvWriter csv(outputs.csv_path);

  long step = 0;
  StepSink sink = [&](const State& state, const StepReport& report) {
    ++step;
    csv.write_row(step, state, report, cfg.params);
    if (cfg.output.snapshot_stride > 0 &&
        step % cfg.output.snapshot_stride == 0) {
      write_snapshot(state, snapshot_name(out_dir, step));
    }
  };

  State final_state =
      actherm::run(initial, cfg.t_final, cfg.controls, cfg.params, sink);
  csv.flush();
  write_snapshot(final_state, out_dir / "snapshot_final.snap");
  outputs.steps = step;
  outputs.final_state = std::move(final_state);

  if (!quiet) {
    std::cout << "run: " << outputs.steps << " steps to t = "
              << format_double(outputs.final_state->time) << ", diagnostics in "
              << outputs.csv_path.string() << "\n";
  }
  return outputs;
}

}  // namespace actherm::io
