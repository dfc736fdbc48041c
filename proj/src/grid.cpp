#include "actherm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "actherm/errors.hpp"

namespace actherm {

Grid::Grid(std::vector<int> cells_per_axis, std::vector<double> extent_per_axis) {
  if (cells_per_axis.empty() || cells_per_axis.size() > 3)
    throw ValidationError("Grid: dimension must be 1, 2 or 3");
  if (extent_per_axis.size() != cells_per_axis.size())
    throw ValidationError("Grid: cells and extents must have one entry per axis");
  dim_ = static_cast<int>(cells_per_axis.size());
  count_ = 1;
  volume_ = 1.0;
  for (int a = 0; a < dim_; ++a) {
    if (cells_per_axis[a] < 2)
      throw ValidationError("Grid: need at least 2 cells per axis");
    if (!(extent_per_axis[a] > 0.0))
      throw ValidationError("Grid: extents must be > 0");
    cells_[a] = cells_per_axis[a];
    extent_[a] = extent_per_axis[a];
    spacing_[a] = extent_[a] / cells_[a];
    count_ *= cells_[a];
    volume_ *= spacing_[a];
  }
  // Row-major, last axis fastest.
  std::int64_t s = 1;
  for (int a = dim_ - 1; a >= 0; --a) {
    stride_[a] = s;
    s *= cells_[a];
  }
}

std::array<int, 3> Grid::coords(std::int64_t index) const {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    c[a] = static_cast<int>((index / stride_[a]) % cells_[a]);
  }
  return c;
}

bool Grid::operator==(const Grid& other) const {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    if (cells_[a] != other.cells_[a] || extent_[a] != other.extent_[a])
      return false;
  }
  return true;
}

Field::Field(const Grid& grid, double fill)
    : grid_(grid),
      values_(static_cast<size_t>(grid.cell_count()), fill) {
  if (!std::isfinite(fill))
    throw ValidationError("Field: fill value must be finite");
}

Field::Field(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (static_cast<std::int64_t>(values_.size()) != grid_.cell_count())
    throw ValidationError("Field: value count does not match the grid");
  require_finite("Field construction");
}

double Field::min() const {
  return *std::min_element(values_.begin(), values_.end());
}

double Field::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

void Field::require_finite(const char* context) const {
  for (double v : values_) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << context << ": non-finite field value";
      throw ValidationError(os.str());
    }
  }
}

namespace {

// Calls fn(i, j, inv_h2) for every interior face, where i < j are the flat
// indices of the adjacent cells and inv_h2 = 1/h^2 for the face's axis.
template <class Fn>
void for_each_face(const Grid& g, Fn&& fn) {
  const std::int64_t n = g.cell_count();
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t stride = g.stride(a);
    const std::int64_t na = g.cells(a);
    const double inv_h2 = 1.0 / (g.spacing(a) * g.spacing(a));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t pos = (i / stride) % na;
      if (pos + 1 < na) fn(i, i + stride, inv_h2);
    }
  }
}

}  // namespace

void laplacian(const Field& u, Field& out) {
  const Grid& g = u.grid();
  if (out.grid() != g) throw ValidationError("laplacian: grid mismatch");
  auto uv = u.values();
  auto ov = out.values();
  std::fill(ov.begin(), ov.end(), 0.0);
  const std::int64_t n = g.cell_count();
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t stride = g.stride(a);
    const std::int64_t na = g.cells(a);
    const double inv_h2 = 1.0 / (g.spacing(a) * g.spacing(a));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t pos = (i / stride) % na;
      // Mirror ghosts contribute zero difference, so skip missing neighbors.
      if (pos > 0) ov[i] += (uv[i - stride] - uv[i]) * inv_h2;
      if (pos + 1 < na) ov[i] += (uv[i + stride] - uv[i]) * inv_h2;
    }
  }
}

Field laplacian(const Field& u) {
  Field out(u.grid());
  laplacian(u, out);
  return out;
}

double integrate(const Field& u) {
  auto v = u.values();
  double s = std::accumulate(v.begin(), v.end(), 0.0);
  return s * u.grid().cell_volume();
}

double l2_norm(const Field& u) {
  auto v = u.values();
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s * u.grid().cell_volume());
}

double h1_seminorm(const Field& u) {
  const Grid& g = u.grid();
  auto v = u.values();
  double s = 0.0;
  for_each_face(g, [&](std::int64_t i, std::int64_t j, double inv_h2) {
    const double d = v[j] - v[i];
    s += d * d * inv_h2;
  });
  return std::sqrt(s * g.cell_volume());
}

namespace detail {

void ShiftedLaplacian::apply(std::span<const double> x,
                             std::span<double> out) const {
  const Grid& g = *grid;
  const std::int64_t n = g.cell_count();
  for (std::int64_t i = 0; i < n; ++i) out[i] = diag[i] * x[i];
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t stride = g.stride(a);
    const std::int64_t na = g.cells(a);
    const double c = nu / (g.spacing(a) * g.spacing(a));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t pos = (i / stride) % na;
      if (pos > 0) out[i] -= c * (x[i - stride] - x[i]);
      if (pos + 1 < na) out[i] -= c * (x[i + stride] - x[i]);
    }
  }
}

std::vector<double> ShiftedLaplacian::matrix_diagonal() const {
  const Grid& g = *grid;
  const std::int64_t n = g.cell_count();
  std::vector<double> d(diag.begin(), diag.end());
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t stride = g.stride(a);
    const std::int64_t na = g.cells(a);
    const double c = nu / (g.spacing(a) * g.spacing(a));
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int64_t pos = (i / stride) % na;
      int neighbors = (pos > 0 ? 1 : 0) + (pos + 1 < na ? 1 : 0);
      d[static_cast<size_t>(i)] += c * neighbors;
    }
  }
  return d;
}

CgResult conjugate_gradient(const ShiftedLaplacian& op,
                            std::span<const double> rhs, std::span<double> x,
                            double rel_tol, std::int64_t max_iter,
                            const char* context) {
  const std::int64_t n = static_cast<std::int64_t>(rhs.size());
  std::vector<double> r(n), z(n), p(n), ap(n);
  const std::vector<double> jacobi = op.matrix_diagonal();

  double rhs_norm = 0.0;
  for (std::int64_t i = 0; i < n; ++i) rhs_norm += rhs[i] * rhs[i];
  rhs_norm = std::sqrt(rhs_norm);
  if (rhs_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }
  const double target = rel_tol * rhs_norm;

  op.apply(x, std::span<double>(r));
  for (std::int64_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  double res = 0.0;
  for (double v : r) res += v * v;
  res = std::sqrt(res);
  if (res <= target) return {0, res / rhs_norm};

  double rho = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    z[i] = r[i] / jacobi[static_cast<size_t>(i)];
    rho += r[i] * z[i];
  }
  p.assign(z.begin(), z.end());

  for (std::int64_t it = 1; it <= max_iter; ++it) {
    op.apply(p, std::span<double>(ap));
    double pap = 0.0;
    for (std::int64_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double alpha = rho / pap;
    for (std::int64_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    res = 0.0;
    for (double v : r) res += v * v;
    res = std::sqrt(res);
    if (res <= target) return {static_cast<int>(it), res / rhs_norm};

    double rho_next = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      z[i] = r[i] / jacobi[static_cast<size_t>(i)];
      rho_next += r[i] * z[i];
    }
    const double beta = rho_next / rho;
    rho = rho_next;
    for (std::int64_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  std::ostringstream os;
  os << context << ": CG failed to reach rel tol " << rel_tol << " within "
     << max_iter << " iterations (rel residual " << res / rhs_norm << ")";
  throw SolverError(os.str(), res / rhs_norm, static_cast<int>(max_iter));
}

}  // namespace detail

Field helmholtz_inverse(const Field& f, double tol) {
  if (!(tol > 0.0)) throw ValidationError("helmholtz_inverse: tol must be > 0");
  const Grid& g = f.grid();
  std::vector<double> ones(static_cast<size_t>(g.cell_count()), 1.0);
  detail::ShiftedLaplacian op{&g, ones, 1.0};
  Field u(g);
  detail::conjugate_gradient(op, f.values(), u.values(), tol,
                             10 * g.cell_count(), "helmholtz_inverse");
  u.require_finite("helmholtz_inverse");
  return u;
}

Field cosine_field(const Grid& grid, double constant,
                   std::span<const CosineMode> modes) {
  Field f(grid, constant);
  auto fv = f.values();
  for (std::int64_t i = 0; i < f.size(); ++i) {
    const auto c = grid.coords(i);
    for (const CosineMode& mode : modes) {
      double w = mode.amplitude;
      for (int a = 0; a < grid.dim(); ++a) {
        w *= std::cos(M_PI * mode.wavenumbers[a] * grid.center(a, c[a]) /
                      grid.extent(a));
      }
      fv[i] += w;
    }
  }
  return f;
}

double dual_norm(const Field& u, double tol) {
  Field nu = helmholtz_inverse(u, tol);
  double s = 0.0;
  auto uv = u.values();
  auto nv = nu.values();
  for (std::int64_t i = 0; i < u.size(); ++i) s += uv[i] * nv[i];
  s *= u.grid().cell_volume();
  // (u, N u) >= 0 up to the CG tolerance; clamp roundoff.
  return std::sqrt(std::max(s, 0.0));
}

}  // namespace actherm
