#include <limits>

#include "actherm/diagnostics.hpp"
#include "actherm/errors.hpp"
#include "actherm/io.hpp"

namespace actherm::io {

const char* CsvWriter::header() {
  return "step,t,dt_used,E,S,energy_residual,entropy_increment,min_theta,"
         "min_phi,min_sigma,max_sigma,newton_iters_phi,newton_iters_theta,"
         "picard_iters,picard_contraction";
}

CsvWriter::CsvWriter(const std::filesystem::path& path)
    : out_(path), path_(path) {
  if (!out_)
    throw IoError("csv: cannot open '" + path.string() + "' for writing");
  out_ << header() << "\n";
}

void CsvWriter::write_row(long step, const State& state,
                          const StepReport& report, const ModelParams& params) {
  DiagnosticsRecord rec;
  rec.t = state.time;
  rec.energy = internal_energy(state, params);
  rec.entropy = std::numeric_limits<double>::quiet_NaN();
  try {
    rec.entropy = total_entropy(state, params);
  } catch (const NonpositiveTemperatureError&) {
    // monitor skipped for this step
  }
  rec.energy_residual = report.energy_residual;
  rec.entropy_increment = report.entropy_increment;
  rec.min_theta = report.min_theta;
  rec.min_phi = report.min_phi;
  rec.min_sigma = report.min_sigma;
  rec.max_sigma = report.max_sigma;
  rec.stability_functional = report.stability_functional;

  out_ << step << ',' << format_double(rec.t) << ','
       << format_double(report.dt_used) << ',' << format_double(rec.energy)
       << ',' << format_double(rec.entropy) << ','
       << format_double(rec.energy_residual) << ','
       << format_double(rec.entropy_increment) << ','
       << format_double(rec.min_theta) << ',' << format_double(rec.min_phi)
       << ',' << format_double(rec.min_sigma) << ','
       << format_double(rec.max_sigma) << ',' << report.newton_iters_phi << ','
       << report.newton_iters_theta << ',' << report.picard_iters << ','
       << format_double(report.picard_contraction) << "\n";
  if (!out_) throw IoError("csv: write failed for '" + path_.string() + "'");
}

void CsvWriter::flush() {
  out_.flush();
  if (!out_) throw IoError("csv: flush failed for '" + path_.string() + "'");
}

}  // namespace actherm::io
