#include <charconv>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "actherm/errors.hpp"
#include "actherm/io.hpp"
#include "actherm/verification.hpp"

namespace actherm::io {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Grid RunConfig::make_grid() const {
  return Grid(grid_cells, grid_extent);
}

bool RunConfig::operator==(const RunConfig& other) const {
  auto params_equal = [](const ModelParams& a, const ModelParams& b) {
    return a.proliferation == b.proliferation && a.apoptosis == b.apoptosis &&
           a.consumption == b.consumption && a.transfer == b.transfer &&
           a.vascular_nutrient == b.vascular_nutrient &&
           a.relaxation == b.relaxation && a.specific_heat == b.specific_heat &&
           a.interface == b.interface &&
           a.conductivity_exponent == b.conductivity_exponent;
  };
  auto controls_equal = [](const StepControls& a, const StepControls& b) {
    return a.dt == b.dt && a.newton_tol == b.newton_tol &&
           a.newton_max == b.newton_max &&
           a.picard_enabled == b.picard_enabled &&
           a.picard_tol == b.picard_tol && a.picard_max == b.picard_max &&
           a.linear_tol == b.linear_tol;
  };
  return params_equal(params, other.params) &&
         grid_cells == other.grid_cells && grid_extent == other.grid_extent &&
         controls_equal(controls, other.controls) &&
         initial == other.initial && output == other.output &&
         t_final == other.t_final &&
         allow_inadmissible == other.allow_inadmissible &&
         perturbation_scale == other.perturbation_scale && seed == other.seed;
}

void RunConfig::validate() const {
  params.validate();
  controls.validate();
  make_grid();  // validates the grid keys
  if (!(t_final >= 0.0))
    throw ValidationError("config: t_final must be >= 0");
  if (output.snapshot_stride < 0)
    throw ValidationError("config: snapshot_stride must be >= 0");
  if (perturbation_scale && !(*perturbation_scale > 0.0))
    throw ValidationError("config: perturbation scale must be > 0");

  const bool has_fields = initial.phi.specified || initial.theta.specified ||
                          initial.sigma.specified;
  int sources = (initial.preset.empty() ? 0 : 1) +
                (initial.snapshot_path.empty() ? 0 : 1) + (has_fields ? 1 : 0);
  if (sources > 1)
    throw ValidationError(
        "config: initial condition must be exactly one of preset, snapshot, "
        "or per-field blocks");
  if (!initial.preset.empty() && initial.preset != "rest" &&
      initial.preset != "smooth" && initial.preset != "random")
    throw ValidationError("config: unknown preset '" + initial.preset +
                          "' (expected rest, smooth or random)");
  for (const FieldInit* f : {&initial.phi, &initial.theta, &initial.sigma}) {
    for (const CosineMode& m : f->modes) {
      for (int a = 0; a < static_cast<int>(grid_cells.size()); ++a) {
        if (m.wavenumbers[a] < 0)
          throw ValidationError("config: mode wavenumbers must be >= 0");
      }
    }
  }
}

namespace {

struct Line {
  int number;
  std::string section;  // dotted path, "" at top level
  std::string key;
  std::vector<std::string> tokens;
};

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw ValidationError(os.str());
}

std::vector<Line> tokenize(const std::string& text, const std::string& origin) {
  std::vector<Line> lines;
  std::vector<std::string> stack;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;

    if (tokens.size() == 1 && tokens[0] == "}") {
      if (stack.empty()) fail(origin, number, "unmatched '}'");
      stack.pop_back();
      continue;
    }
    if (tokens.size() == 2 && tokens[1] == "{") {
      stack.push_back(tokens[0]);
      continue;
    }
    if (tokens.size() >= 3 && tokens[1] == "=") {
      std::string section;
      for (const std::string& s : stack) {
        if (!section.empty()) section += '.';
        section += s;
      }
      lines.push_back(
          {number, section, tokens[0],
           std::vector<std::string>(tokens.begin() + 2, tokens.end())});
      continue;
    }
    fail(origin, number,
         "expected 'key = value', 'section {' or '}' (got '" + raw + "')");
  }
  if (!stack.empty())
    fail(origin, number, "unclosed section '" + stack.back() + "'");
  return lines;
}

double parse_double(const Line& ln, const std::string& origin,
                    const std::string& tok) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(origin, ln.number, "key '" + ln.key + "': not a number: '" + tok + "'");
  }
}

long parse_int(const Line& ln, const std::string& origin,
               const std::string& tok) {
  try {
    size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(origin, ln.number,
         "key '" + ln.key + "': not an integer: '" + tok + "'");
  }
}

bool parse_bool(const Line& ln, const std::string& origin,
                const std::string& tok) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  fail(origin, ln.number,
       "key '" + ln.key + "': expected true or false, got '" + tok + "'");
}

void expect_single(const Line& ln, const std::string& origin) {
  if (ln.tokens.size() != 1)
    fail(origin, ln.number, "key '" + ln.key + "' takes a single value");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  bool have_t_final = false;
  bool have_cells = false, have_extent = false;
  int dim = 0;

  for (const Line& ln : tokenize(text, origin)) {
    auto one = [&]() -> const std::string& {
      expect_single(ln, origin);
      return ln.tokens[0];
    };
    auto dval = [&]() { return parse_double(ln, origin, one()); };
    auto ival = [&]() { return parse_int(ln, origin, one()); };
    auto bval = [&]() { return parse_bool(ln, origin, one()); };

    if (ln.section.empty()) {
      if (ln.key == "t_final") {
        cfg.t_final = dval();
        have_t_final = true;
      } else if (ln.key == "allow_inadmissible") {
        cfg.allow_inadmissible = bval();
      } else if (ln.key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(ival());
      } else {
        fail(origin, ln.number, "unknown key '" + ln.key + "'");
      }
    } else if (ln.section == "grid") {
      if (ln.key == "dim") {
        dim = static_cast<int>(ival());
      } else if (ln.key == "cells") {
        cfg.grid_cells.clear();
        for (const std::string& t : ln.tokens)
          cfg.grid_cells.push_back(static_cast<int>(parse_int(ln, origin, t)));
        have_cells = true;
      } else if (ln.key == "extent") {
        cfg.grid_extent.clear();
        for (const std::string& t : ln.tokens)
          cfg.grid_extent.push_back(parse_double(ln, origin, t));
        have_extent = true;
      } else {
        fail(origin, ln.number, "unknown grid key '" + ln.key + "'");
      }
    } else if (ln.section == "params") {
      ModelParams& p = cfg.params;
      if (ln.key == "proliferation") p.proliferation = dval();
      else if (ln.key == "apoptosis") p.apoptosis = dval();
      else if (ln.key == "consumption") p.consumption = dval();
      else if (ln.key == "transfer") p.transfer = dval();
      else if (ln.key == "vascular_nutrient") p.vascular_nutrient = dval();
      else if (ln.key == "relaxation") p.relaxation = dval();
      else if (ln.key == "specific_heat") p.specific_heat = dval();
      else if (ln.key == "interface") p.interface = dval();
      else if (ln.key == "conductivity_exponent") p.conductivity_exponent = dval();
      else fail(origin, ln.number, "unknown params key '" + ln.key + "'");
    } else if (ln.section == "step") {
      StepControls& s = cfg.controls;
      if (ln.key == "dt") s.dt = dval();
      else if (ln.key == "newton_tol") s.newton_tol = dval();
      else if (ln.key == "newton_max") s.newton_max = static_cast<int>(ival());
      else if (ln.key == "picard_enabled") s.picard_enabled = bval();
      else if (ln.key == "picard_tol") s.picard_tol = dval();
      else if (ln.key == "picard_max") s.picard_max = static_cast<int>(ival());
      else if (ln.key == "linear_tol") s.linear_tol = dval();
      else fail(origin, ln.number, "unknown step key '" + ln.key + "'");
    } else if (ln.section == "initial") {
      if (ln.key == "preset") cfg.initial.preset = one();
      else if (ln.key == "snapshot") cfg.initial.snapshot_path = one();
      else fail(origin, ln.number, "unknown initial key '" + ln.key + "'");
    } else if (ln.section == "initial.phi" || ln.section == "initial.theta" ||
               ln.section == "initial.sigma") {
      FieldInit& f = ln.section == "initial.phi"
                         ? cfg.initial.phi
                         : (ln.section == "initial.theta" ? cfg.initial.theta
                                                          : cfg.initial.sigma);
      f.specified = true;
      if (ln.key == "constant") {
        f.constant = dval();
      } else if (ln.key == "mode") {
        // dim wavenumbers followed by the amplitude
        if (ln.tokens.size() < 2)
          fail(origin, ln.number, "mode needs wavenumbers and an amplitude");
        CosineMode m;
        for (size_t a = 0; a + 1 < ln.tokens.size(); ++a) {
          if (a >= 3) fail(origin, ln.number, "mode has too many wavenumbers");
          m.wavenumbers[a] =
              static_cast<int>(parse_int(ln, origin, ln.tokens[a]));
        }
        m.amplitude = parse_double(ln, origin, ln.tokens.back());
        f.modes.push_back(m);
      } else {
        fail(origin, ln.number,
             "unknown initial field key '" + ln.key + "'");
      }
    } else if (ln.section == "output") {
      if (ln.key == "directory") cfg.output.directory = one();
      else if (ln.key == "snapshot_stride")
        cfg.output.snapshot_stride = static_cast<int>(ival());
      else if (ln.key == "csv") cfg.output.csv = one();
      else fail(origin, ln.number, "unknown output key '" + ln.key + "'");
    } else if (ln.section == "perturbation") {
      if (ln.key == "scale") cfg.perturbation_scale = dval();
      else fail(origin, ln.number, "unknown perturbation key '" + ln.key + "'");
    } else {
      fail(origin, ln.number, "unknown section '" + ln.section + "'");
    }
  }

  if (!have_t_final)
    throw ValidationError(origin + ": missing required key t_final");
  if (!have_cells)
    throw ValidationError(origin + ": missing required grid key cells");
  if (dim == 0) dim = static_cast<int>(cfg.grid_cells.size());
  if (dim != static_cast<int>(cfg.grid_cells.size())) {
    if (cfg.grid_cells.size() == 1 && dim >= 1 && dim <= 3) {
      cfg.grid_cells.assign(static_cast<size_t>(dim), cfg.grid_cells[0]);
    } else {
      throw ValidationError(origin +
                            ": grid dim does not match the cells list");
    }
  }
  if (!have_extent) {
    cfg.grid_extent.assign(cfg.grid_cells.size(), 1.0);
  } else if (cfg.grid_extent.size() == 1 && cfg.grid_cells.size() > 1) {
    cfg.grid_extent.assign(cfg.grid_cells.size(), cfg.grid_extent[0]);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("load_config: cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string save_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "t_final = " << format_double(cfg.t_final) << "\n";
  os << "allow_inadmissible = " << (cfg.allow_inadmissible ? "true" : "false")
     << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "grid {\n  dim = " << cfg.grid_cells.size() << "\n  cells =";
  for (int c : cfg.grid_cells) os << " " << c;
  os << "\n  extent =";
  for (double e : cfg.grid_extent) os << " " << format_double(e);
  os << "\n}\n";
  const ModelParams& p = cfg.params;
  os << "params {\n";
  os << "  proliferation = " << format_double(p.proliferation) << "\n";
  os << "  apoptosis = " << format_double(p.apoptosis) << "\n";
  os << "  consumption = " << format_double(p.consumption) << "\n";
  os << "  transfer = " << format_double(p.transfer) << "\n";
  os << "  vascular_nutrient = " << format_double(p.vascular_nutrient) << "\n";
  os << "  relaxation = " << format_double(p.relaxation) << "\n";
  os << "  specific_heat = " << format_double(p.specific_heat) << "\n";
  os << "  interface = " << format_double(p.interface) << "\n";
  os << "  conductivity_exponent = " << format_double(p.conductivity_exponent)
     << "\n}\n";
  const StepControls& s = cfg.controls;
  os << "step {\n";
  os << "  dt = " << format_double(s.dt) << "\n";
  os << "  newton_tol = " << format_double(s.newton_tol) << "\n";
  os << "  newton_max = " << s.newton_max << "\n";
  os << "  picard_enabled = " << (s.picard_enabled ? "true" : "false") << "\n";
  os << "  picard_tol = " << format_double(s.picard_tol) << "\n";
  os << "  picard_max = " << s.picard_max << "\n";
  os << "  linear_tol = " << format_double(s.linear_tol) << "\n}\n";
  os << "initial {\n";
  if (!cfg.initial.preset.empty()) os << "  preset = " << cfg.initial.preset << "\n";
  if (!cfg.initial.snapshot_path.empty())
    os << "  snapshot = " << cfg.initial.snapshot_path << "\n";
  auto field_block = [&](const char* name, const FieldInit& f) {
    if (!f.specified) return;
    os << "  " << name << " {\n    constant = " << format_double(f.constant)
       << "\n";
    for (const CosineMode& m : f.modes) {
      os << "    mode =";
      for (size_t a = 0; a < cfg.grid_cells.size(); ++a)
        os << " " << m.wavenumbers[a];
      os << " " << format_double(m.amplitude) << "\n";
    }
    os << "  }\n";
  };
  field_block("phi", cfg.initial.phi);
  field_block("theta", cfg.initial.theta);
  field_block("sigma", cfg.initial.sigma);
  os << "}\n";
  os << "output {\n";
  os << "  directory = " << cfg.output.directory << "\n";
  os << "  snapshot_stride = " << cfg.output.snapshot_stride << "\n";
  os << "  csv = " << cfg.output.csv << "\n}\n";
  if (cfg.perturbation_scale) {
    os << "perturbation {\n  scale = " << format_double(*cfg.perturbation_scale)
       << "\n}\n";
  }
  return os.str();
}

State build_initial_state(const RunConfig& cfg) {
  cfg.validate();
  const Grid grid = cfg.make_grid();

  std::optional<State> state;
  if (!cfg.initial.snapshot_path.empty()) {
    State loaded = read_snapshot(cfg.initial.snapshot_path);
    if (loaded.grid() != grid)
      throw ValidationError(
          "initial snapshot grid does not match the configured grid");
    state = std::move(loaded);
  } else if (cfg.initial.preset == "smooth") {
    state = verify::initial_state(
        verify::manufactured_case_default(cfg.params, grid.dim()), grid);
  } else if (cfg.initial.preset == "random") {
    state = verify::random_admissible_state(grid, cfg.seed);
  } else if (cfg.initial.preset == "rest" ||
             (cfg.initial.preset.empty() && !cfg.initial.phi.specified &&
              !cfg.initial.theta.specified && !cfg.initial.sigma.specified)) {
    state = State(Field(grid, 0.0), Field(grid, 0.0),
                  Field(grid, cfg.params.vascular_nutrient), 0.0);
  } else {
    auto build = [&](const FieldInit& f, double fallback) {
      if (!f.specified) return Field(grid, fallback);
      return cosine_field(grid, f.constant, f.modes);
    };
    state = State(build(cfg.initial.phi, 0.0), build(cfg.initial.theta, 0.0),
                  build(cfg.initial.sigma, cfg.params.vascular_nutrient), 0.0);
  }

  if (!state->admissible(0.0)) {
    const std::string msg =
        "initial data violate the admissible box (phi >= 0, theta >= 0, "
        "sigma in [0,1])";
    if (!cfg.allow_inadmissible) {
      throw ValidationError(
          msg + "; set allow_inadmissible = true to run anyway");
    }
    std::cerr << "actherm: warning: " << msg << "\n";
  }
  return std::move(*state);
}

}  // namespace actherm::io
