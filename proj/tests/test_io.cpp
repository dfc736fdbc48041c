#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "actherm/errors.hpp"
#include "actherm/io.hpp"
#include "actherm/verification.hpp"

using namespace actherm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir =
      fs::temp_directory_path() / ("actherm_test_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(ACTHERM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

const char* kMinimalConfig = R"(# minimal: grid + final time
t_final = 0.002
grid {
  dim = 1
  cells = 8
}
)";

}  // namespace

TEST_CASE("minimal config applies the documented defaults") {
  io::RunConfig cfg = io::parse_config(kMinimalConfig, "minimal");
  CHECK(cfg.params.relaxation == 1.0);
  CHECK(cfg.params.specific_heat == 1.0);
  CHECK(cfg.params.interface == 1.0);
  CHECK(cfg.params.conductivity_exponent == 2.0);
  CHECK(cfg.params.vascular_nutrient == 1.0);
  CHECK(cfg.grid_extent == std::vector<double>{1.0});
  CHECK(cfg.controls.dt == 1e-3);
  CHECK(cfg.output.directory == "out");
  CHECK(cfg.initial.preset.empty());
  CHECK(cfg.t_final == 0.002);
}

TEST_CASE("config validation names the violated invariant") {
  CHECK_THROWS_WITH_AS(
      io::parse_config("t_final = 1\ngrid {\n cells = 8\n}\nparams {\n "
                       "vascular_nutrient = 1.5\n}\n",
                       "cfg"),
      doctest::Contains("[0,1]"), ValidationError);
  CHECK_THROWS_WITH_AS(
      io::parse_config("t_final = 1\ngrid {\n cells = 8\n}\nparams {\n "
                       "conductivity_exponent = 1\n}\n",
                       "cfg"),
      doctest::Contains(">= 2"), ValidationError);
}

TEST_CASE("unknown keys and malformed lines are hard errors with context") {
  CHECK_THROWS_WITH_AS(
      io::parse_config("t_final = 1\ntypo_key = 3\ngrid {\n cells = 8\n}\n",
                       "cfg"),
      doctest::Contains("cfg:2"), ValidationError);
  CHECK_THROWS_AS(
      io::parse_config("t_final = 1\ngrid {\n cellz = 8\n}\n", "cfg"),
      ValidationError);
  CHECK_THROWS_AS(io::parse_config("grid {\n cells = 8\n", "cfg"),
                  ValidationError);  // unclosed section
  CHECK_THROWS_AS(io::parse_config("t_final\n", "cfg"), ValidationError);
  CHECK_THROWS_AS(
      io::parse_config("t_final = 1\ngrid {\n cells = 8\n}\nstep {\n dt = "
                       "nope\n}\n",
                       "cfg"),
      ValidationError);
  // missing required keys
  CHECK_THROWS_WITH_AS(io::parse_config("grid {\n cells = 8\n}\n", "cfg"),
                       doctest::Contains("t_final"), ValidationError);
  CHECK_THROWS_WITH_AS(io::parse_config("t_final = 1\n", "cfg"),
                       doctest::Contains("cells"), ValidationError);
}

TEST_CASE("config round trip is exact") {
  const char* full = R"(
t_final = 0.125
allow_inadmissible = true
seed = 42
grid {
  dim = 2
  cells = 12 10
  extent = 1.5 2.25
}
params {
  proliferation = 1.25
  apoptosis = 0.3
  consumption = 0.7
  transfer = 1.1
  vascular_nutrient = 0.85
  relaxation = 2
  specific_heat = 1.5
  interface = 0.5
  conductivity_exponent = 3
}
step {
  dt = 0.0005
  newton_tol = 1e-11
  newton_max = 30
  picard_enabled = true
  picard_tol = 1e-9
  picard_max = 5
  linear_tol = 1e-11
}
initial {
  phi {
    constant = 0.4
    mode = 1 0 0.05
    mode = 2 1 -0.025
  }
  theta {
    constant = 1
  }
}
output {
  directory = results
  snapshot_stride = 7
  csv = diag.csv
}
perturbation {
  scale = 0.001
}
)";
  io::RunConfig cfg = io::parse_config(full, "full");
  io::RunConfig again = io::parse_config(io::save_config(cfg), "canonical");
  CHECK(cfg == again);
  // canonical form is a fixed point
  CHECK(io::save_config(cfg) == io::save_config(again));
}

TEST_CASE("initial state construction") {
  io::RunConfig cfg = io::parse_config(kMinimalConfig, "cfg");

  SUBCASE("default is the rest preset") {
    State s = io::build_initial_state(cfg);
    CHECK(s.phi.max() == 0.0);
    CHECK(s.theta.max() == 0.0);
    CHECK(s.sigma.min() == cfg.params.vascular_nutrient);
  }
  SUBCASE("smooth preset is admissible") {
    cfg.initial.preset = "smooth";
    State s = io::build_initial_state(cfg);
    CHECK(s.admissible());
  }
  SUBCASE("random preset follows the seed") {
    cfg.initial.preset = "random";
    cfg.seed = 7;
    State a = io::build_initial_state(cfg);
    State b = io::build_initial_state(cfg);
    CHECK(a.phi.values()[3] == b.phi.values()[3]);
    cfg.seed = 8;
    State c = io::build_initial_state(cfg);
    CHECK(a.phi.values()[3] != c.phi.values()[3]);
  }
  SUBCASE("per-field cosine blocks") {
    cfg.initial.phi.specified = true;
    cfg.initial.phi.constant = 0.5;
    cfg.initial.phi.modes.push_back({{1, 0, 0}, 0.25});
    State s = io::build_initial_state(cfg);
    CHECK(s.phi.max() <= 0.75 + 1e-12);
    CHECK(s.phi.min() >= 0.25 - 1e-12);
    CHECK(s.sigma.max() == cfg.params.vascular_nutrient);  // fallback
  }
  SUBCASE("inadmissible data need the explicit override") {
    cfg.initial.theta.specified = true;
    cfg.initial.theta.constant = -1.0;
    CHECK_THROWS_AS(io::build_initial_state(cfg), ValidationError);
    cfg.allow_inadmissible = true;
    CHECK_NOTHROW(io::build_initial_state(cfg));
  }
  SUBCASE("snapshot restart round trips, grid mismatch is caught") {
    const fs::path dir = temp_dir();
    Grid g = cfg.make_grid();
    State s = verify::random_admissible_state(g, 11);
    s.time = 0.25;
    io::write_snapshot(s, dir / "restart.snap");
    cfg.initial.snapshot_path = (dir / "restart.snap").string();
    State loaded = io::build_initial_state(cfg);
    CHECK(loaded.time == 0.25);
    CHECK(loaded.phi.values()[2] == s.phi.values()[2]);

    cfg.grid_cells = {16};
    CHECK_THROWS_AS(io::build_initial_state(cfg), ValidationError);
  }
}

TEST_CASE("snapshot round trip is exact and rejects damaged files") {
  const fs::path dir = temp_dir();
  Grid g({5, 3}, {1.0, 2.0});
  State s = verify::random_admissible_state(g, 99);
  s.time = 0.1 + 1e-17;  // full-precision time must survive
  const fs::path path = dir / "state.snap";
  io::write_snapshot(s, path);
  State back = io::read_snapshot(path);
  CHECK(back.time == s.time);
  CHECK(back.grid() == g);
  for (std::int64_t i = 0; i < g.cell_count(); ++i) {
    CHECK(back.phi[i] == s.phi[i]);
    CHECK(back.theta[i] == s.theta[i]);
    CHECK(back.sigma[i] == s.sigma[i]);
  }

  // truncation: drop the last line
  std::string text = read_file(path);
  write_file(dir / "trunc.snap",
             text.substr(0, text.find_last_of('\n', text.size() - 2)));
  CHECK_THROWS_AS(io::read_snapshot(dir / "trunc.snap"), IoError);

  // version mismatch
  std::string wrong = text;
  wrong.replace(wrong.find("v1"), 2, "v9");
  write_file(dir / "version.snap", wrong);
  CHECK_THROWS_AS(io::read_snapshot(dir / "version.snap"), IoError);

  // corrupted value
  std::string bad = text;
  bad.replace(bad.rfind("field sigma") + 12, 3, "x.z");
  write_file(dir / "bad.snap", bad);
  CHECK_THROWS_AS(io::read_snapshot(dir / "bad.snap"), IoError);

  CHECK_THROWS_AS(io::read_snapshot(dir / "missing.snap"), IoError);
}

TEST_CASE("csv stream: header-only for empty runs, 15 columns per row") {
  const fs::path dir = temp_dir();
  io::RunConfig cfg = io::parse_config(kMinimalConfig, "cfg");
  cfg.output.directory = (dir / "zero").string();
  cfg.t_final = 0.0;
  io::RunOutputs zero = io::run_simulation(cfg);
  CHECK(zero.steps == 0);
  CHECK(read_file(zero.csv_path) ==
        std::string(io::CsvWriter::header()) + "\n");

  cfg.t_final = 0.003;
  cfg.initial.preset = "smooth";
  cfg.output.directory = (dir / "short").string();
  io::RunOutputs out = io::run_simulation(cfg);
  CHECK(out.steps == 3);
  std::istringstream csv(read_file(out.csv_path));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 14);
    ++rows;
  }
  CHECK(rows == 4);  // header + 3 steps
}

TEST_CASE("identical configs reproduce byte-identical outputs") {
  const fs::path dir = temp_dir();
  io::RunConfig cfg = io::parse_config(kMinimalConfig, "cfg");
  cfg.initial.preset = "random";
  cfg.seed = 3;
  cfg.t_final = 0.02;
  cfg.output.snapshot_stride = 5;

  cfg.output.directory = (dir / "a").string();
  io::RunOutputs a = io::run_simulation(cfg);
  cfg.output.directory = (dir / "b").string();
  io::RunOutputs b = io::run_simulation(cfg);

  CHECK(read_file(a.csv_path) == read_file(b.csv_path));
  CHECK(read_file(dir / "a" / "snapshot_000005.snap") ==
        read_file(dir / "b" / "snapshot_000005.snap"));
  CHECK(read_file(dir / "a" / "snapshot_final.snap") ==
        read_file(dir / "b" / "snapshot_final.snap"));
}

TEST_CASE("cli exit code contract") {
  const fs::path dir = temp_dir();

  write_file(dir / "good.cfg", kMinimalConfig);
  CHECK(run_cli("check-config --config " + (dir / "good.cfg").string()) == 0);

  // validation error -> 1
  write_file(dir / "bad.cfg",
             "t_final = 1\ngrid {\n cells = 8\n}\nparams {\n "
             "vascular_nutrient = 1.5\n}\n");
  CHECK(run_cli("check-config --config " + (dir / "bad.cfg").string()) == 1);
  CHECK(run_cli("run --config " + (dir / "bad.cfg").string()) == 1);
  CHECK(run_cli("definitely-not-a-subcommand") == 1);

  // missing file -> 3
  CHECK(run_cli("check-config --config " + (dir / "nope.cfg").string()) == 3);

  // solver failure -> 2 (unreachable Newton tolerance, dt halving exhausted)
  write_file(dir / "solver.cfg",
             "t_final = 0.01\ngrid {\n cells = 8\n}\ninitial {\n preset = "
             "smooth\n}\nstep {\n newton_tol = 1e-300\n}\noutput {\n "
             "directory = " +
                 (dir / "solver_out").string() + "\n}\n");
  CHECK(run_cli("run --config " + (dir / "solver.cfg").string()) == 2);

  // run on the rest preset -> 0 with constant rows
  write_file(dir / "rest.cfg",
             "t_final = 0.005\ngrid {\n cells = 8\n}\ninitial {\n preset = "
             "rest\n}\noutput {\n directory = " +
                 (dir / "rest_out").string() + "\n}\n");
  CHECK(run_cli("run --config " + (dir / "rest.cfg").string()) == 0);
  const std::string csv = read_file(dir / "rest_out" / "diagnostics.csv");
  CHECK(csv.find(",nan,") != std::string::npos);  // entropy at theta = 0
}

TEST_CASE("separate cli invocations reproduce byte-identical outputs") {
  const fs::path dir = temp_dir();
  auto config_for = [&](const std::string& out) {
    return "t_final = 0.01\nseed = 9\ngrid {\n cells = 12\n}\ninitial {\n "
           "preset = random\n}\noutput {\n directory = " +
           (dir / out).string() + "\n snapshot_stride = 4\n}\n";
  };
  write_file(dir / "a.cfg", config_for("a"));
  write_file(dir / "b.cfg", config_for("b"));
  CHECK(run_cli("run --config " + (dir / "a.cfg").string()) == 0);
  CHECK(run_cli("run --config " + (dir / "b.cfg").string()) == 0);
  CHECK(read_file(dir / "a" / "diagnostics.csv") ==
        read_file(dir / "b" / "diagnostics.csv"));
  CHECK(read_file(dir / "a" / "snapshot_final.snap") ==
        read_file(dir / "b" / "snapshot_final.snap"));
  CHECK(read_file(dir / "a" / "snapshot_000008.snap") ==
        read_file(dir / "b" / "snapshot_000008.snap"));
}
