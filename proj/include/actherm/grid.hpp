#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace actherm {

/// Uniform cell-centered rectangular grid, dimension 1-3, with homogeneous
/// Neumann (mirror ghost) closure. Immutable after construction.
class Grid {
public:
  Grid(std::vector<int> cells_per_axis, std::vector<double> extent_per_axis);

  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  std::int64_t stride(int axis) const { return stride_[axis]; }
  std::int64_t cell_count() const { return count_; }
  double cell_volume() const { return volume_; }
  double domain_volume() const { return volume_ * static_cast<double>(count_); }

  /// Center coordinate (i + 1/2) h along one axis.
  double center(int axis, int index) const {
    return (index + 0.5) * spacing_[axis];
  }

  /// Per-axis cell coordinates of a flat row-major index (last axis fastest).
  std::array<int, 3> coords(std::int64_t index) const;

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

private:
  int dim_;
  std::array<int, 3> cells_{1, 1, 1};
  std::array<double, 3> extent_{1.0, 1.0, 1.0};
  std::array<double, 3> spacing_{1.0, 1.0, 1.0};
  std::array<std::int64_t, 3> stride_{0, 0, 0};
  std::int64_t count_ = 0;
  double volume_ = 1.0;
};

/// One scalar per cell in canonical row-major order. Entries are checked
/// finite on construction and after every solver call.
class Field {
public:
  explicit Field(const Grid& grid, double fill = 0.0);
  Field(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }

  double& operator[](std::int64_t i) { return values_[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return values_[static_cast<size_t>(i)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double min() const;
  double max() const;

  /// Throws ValidationError if any entry is NaN or infinite.
  void require_finite(const char* context) const;

private:
  Grid grid_;
  std::vector<double> values_;
};

// --- discrete operators (homogeneous Neumann closure throughout) ---

/// 2*dim+1 point Laplacian with mirror ghosts; exact zero on constants
/// and affine fields.
Field laplacian(const Field& u);
void laplacian(const Field& u, Field& out);

/// Sum of u over cells times cell volume.
double integrate(const Field& u);

double l2_norm(const Field& u);

/// sqrt(sum over interior faces of (u_j - u_i)^2 / h^2 * cell_volume);
/// satisfies integrate(u * laplacian(u)) == -h1_seminorm(u)^2 exactly.
double h1_seminorm(const Field& u);

/// Solves (-Lap + I) u = f by Jacobi-preconditioned CG to a relative
/// residual <= tol; iteration cap 10 * cell count.
Field helmholtz_inverse(const Field& f, double tol);

/// sqrt(integrate(u * helmholtz_inverse(u, tol))); the discrete dual norm.
double dual_norm(const Field& u, double tol);

/// One Neumann-compatible cosine mode: amplitude * prod_a cos(pi k_a x_a / L_a).
struct CosineMode {
  std::array<int, 3> wavenumbers{0, 0, 0};
  double amplitude = 0.0;

  bool operator==(const CosineMode&) const = default;
};

/// constant + sum of cosine modes, sampled at cell centers.
Field cosine_field(const Grid& grid, double constant,
                   std::span<const CosineMode> modes);

namespace detail {

/// Applies x -> diag .* x - nu * Lap(x). All implicit substeps and the
/// Helmholtz solve are instances of this SPD operator (diag > 0, nu > 0).
struct ShiftedLaplacian {
  const Grid* grid;
  std::span<const double> diag;
  double nu = 1.0;

  void apply(std::span<const double> x, std::span<double> out) const;
  /// Matrix diagonal (for Jacobi preconditioning).
  std::vector<double> matrix_diagonal() const;
};

struct CgResult {
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients; x holds the initial guess on
/// entry and the solution on exit. Throws SolverError at the iteration cap.
CgResult conjugate_gradient(const ShiftedLaplacian& op,
                            std::span<const double> rhs, std::span<double> x,
                            double rel_tol, std::int64_t max_iter,
                            const char* context);

}  // namespace detail
}  // namespace actherm
