#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "actherm/errors.hpp"
#include "actherm/io.hpp"

namespace actherm::io {

namespace {

constexpr const char* kMagic = "actherm-snapshot";
constexpr const char* kVersion = "v1";

double parse_exact_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw IoError(where + ": malformed number '" + tok + "'");
  return v;
}

int parse_exact_int(const std::string& tok, const std::string& where) {
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw IoError(where + ": malformed integer '" + tok + "'");
  return v;
}

void write_field(std::ostream& os, const char* name, const Field& f) {
  os << "field " << name << "\n";
  for (double v : f.values()) os << format_double(v) << "\n";
}

}  // namespace

void write_snapshot(const State& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("write_snapshot: cannot open '" + path.string() + "'");
  const Grid& g = state.grid();
  out << kMagic << " " << kVersion << "\n";
  out << "dim " << g.dim() << "\n";
  out << "cells";
  for (int a = 0; a < g.dim(); ++a) out << " " << g.cells(a);
  out << "\nextent";
  for (int a = 0; a < g.dim(); ++a) out << " " << format_double(g.extent(a));
  out << "\ntime " << format_double(state.time) << "\n";
  write_field(out, "phi", state.phi);
  write_field(out, "theta", state.theta);
  write_field(out, "sigma", state.sigma);
  out.flush();
  if (!out)
    throw IoError("write_snapshot: write failed for '" + path.string() + "'");
}

State read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("read_snapshot: cannot open '" + path.string() + "'");
  const std::string where = "read_snapshot(" + path.string() + ")";

  auto next_line = [&](const char* what) {
    std::string line;
    if (!std::getline(in, line))
      throw IoError(where + ": truncated file, expected " + std::string(what));
    return line;
  };
  auto expect_tokens = [&](const std::string& line, const std::string& head) {
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first != head)
      throw IoError(where + ": expected '" + head + "', got '" + line + "'");
    std::vector<std::string> rest;
    std::string tok;
    while (ls >> tok) rest.push_back(tok);
    return rest;
  };

  {
    auto header = expect_tokens(next_line("header"), kMagic);
    if (header.size() != 1 || header[0] != kVersion)
      throw IoError(where + ": unsupported snapshot version");
  }
  auto dim_tokens = expect_tokens(next_line("dim"), "dim");
  if (dim_tokens.size() != 1)
    throw IoError(where + ": malformed dim line");
  const int dim = parse_exact_int(dim_tokens[0], where);
  if (dim < 1 || dim > 3) throw IoError(where + ": dim out of range");

  auto cells_tokens = expect_tokens(next_line("cells"), "cells");
  auto extent_tokens = expect_tokens(next_line("extent"), "extent");
  if (static_cast<int>(cells_tokens.size()) != dim ||
      static_cast<int>(extent_tokens.size()) != dim)
    throw IoError(where + ": cells/extent entries do not match dim");
  std::vector<int> cells;
  std::vector<double> extent;
  for (const std::string& t : cells_tokens)
    cells.push_back(parse_exact_int(t, where));
  for (const std::string& t : extent_tokens)
    extent.push_back(parse_exact_double(t, where));
  Grid grid(cells, extent);

  auto time_tokens = expect_tokens(next_line("time"), "time");
  if (time_tokens.size() != 1) throw IoError(where + ": malformed time line");
  const double time = parse_exact_double(time_tokens[0], where);

  auto read_field = [&](const char* name) {
    auto head = expect_tokens(next_line("field header"), "field");
    if (head.size() != 1 || head[0] != name)
      throw IoError(where + ": expected field '" + std::string(name) + "'");
    std::vector<double> values;
    values.reserve(static_cast<size_t>(grid.cell_count()));
    for (std::int64_t i = 0; i < grid.cell_count(); ++i) {
      const double v = parse_exact_double(next_line("field value"), where);
      if (!std::isfinite(v))
        throw IoError(where + ": non-finite value in field " +
                      std::string(name));
      values.push_back(v);
    }
    return Field(grid, std::move(values));
  };
  Field phi = read_field("phi");
  Field theta = read_field("theta");
  Field sigma = read_field("sigma");

  std::string trailing;
  if (std::getline(in, trailing) && !trailing.empty())
    throw IoError(where + ": unexpected trailing content");
  return State(std::move(phi), std::move(theta), std::move(sigma), time);
}

}  // namespace actherm::io
