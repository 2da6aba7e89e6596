// Uniform cell-centered grids on an interval or rectangle, scalar fields on
// them, and the Neumann-closed difference operators everything else uses.
#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpf {

/// Cell-centered uniform discretization of [0,Lx] or [0,Lx]x[0,Ly].
/// Cells are numbered row-major: index = j * nx + i.
class Grid {
 public:
  Grid() = default;

  static Grid line(int cells, double length) { return Grid(1, {cells, 1}, {length, 1.0}); }
  static Grid rect(int nx, int ny, double lx, double ly) { return Grid(2, {nx, ny}, {lx, ly}); }

  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[axis]; }
  double length(int axis) const { return lengths_[axis]; }
  double spacing(int axis) const { return lengths_[axis] / cells_[axis]; }

  std::size_t size() const {
    return static_cast<std::size_t>(cells_[0]) * static_cast<std::size_t>(dim_ == 2 ? cells_[1] : 1);
  }
  double cell_volume() const { return dim_ == 2 ? spacing(0) * spacing(1) : spacing(0); }
  double volume() const { return dim_ == 2 ? lengths_[0] * lengths_[1] : lengths_[0]; }
  double max_length() const { return dim_ == 2 ? std::max(lengths_[0], lengths_[1]) : lengths_[0]; }

  /// Cell-center coordinate along an axis.
  double center(int axis, int index) const { return (index + 0.5) * spacing(axis); }

  /// Smallest nonzero eigenvalue of the continuous Neumann Laplacian, (pi/L_max)^2.
  double first_neumann_eigenvalue() const {
    const double k = std::numbers::pi / max_length();
    return k * k;
  }

  bool operator==(const Grid&) const = default;

 private:
  Grid(int dim, std::array<int, 2> cells, std::array<double, 2> lengths)
      : dim_(dim), cells_(cells), lengths_(lengths) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
      if (cells[a] <= 0) throw std::invalid_argument("grid cell counts must be positive");
      if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a]))
        throw std::invalid_argument("grid lengths must be positive and finite");
    }
  }

  int dim_ = 1;
  std::array<int, 2> cells_{1, 1};
  std::array<double, 2> lengths_{1.0, 1.0};
};

/// Scalar cell values on a grid.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g, double value = 0.0) : grid_(g), values_(g.size(), value) {}
  Field(const Grid& g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw std::invalid_argument("field length " + std::to_string(values_.size()) +
                                  " does not match grid cell count " + std::to_string(grid_.size()));
  }

  /// Samples f(x) (1D) or f(x, y) (2D) at cell centers.
  static Field sample(const Grid& g, const std::function<double(double, double)>& f) {
    Field out(g);
    const int nx = g.cells(0);
    const int ny = g.dim() == 2 ? g.cells(1) : 1;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        out.values_[static_cast<std::size_t>(j) * nx + i] =
            f(g.center(0, i), g.dim() == 2 ? g.center(1, j) : 0.0);
    return out;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

  /// Pointwise image under fn.
  template <class Fn>
  Field map(Fn&& fn) const {
    Field out(grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] = fn(values_[i]);
    return out;
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  Field& operator+=(double s) {
    for (double& v : values_) v += s;
    return *this;
  }

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_) || values_.size() != o.values_.size())
      throw std::invalid_argument("fields live on different grids");
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }
inline Field operator*(Field a, double s) { return a *= s; }
inline Field operator-(Field a) { return a *= -1.0; }

inline void require_on(const Field& f, const Grid& g) {
  if (!(f.grid() == g) || f.size() != g.size()) throw std::invalid_argument("field does not live on the given grid");
}

namespace detail {

/// Visits every interior face once as (lower cell, upper cell, 1/h^2).
/// Boundary faces are skipped: the mirror ghost makes their difference zero.
template <class Visit>
void for_each_face(const Grid& g, Visit&& visit) {
  const int nx = g.cells(0);
  const int ny = g.dim() == 2 ? g.cells(1) : 1;
  const double wx = 1.0 / (g.spacing(0) * g.spacing(0));
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * nx;
    for (int i = 0; i + 1 < nx; ++i) visit(row + i, row + i + 1, wx);
  }
  if (g.dim() == 2) {
    const double wy = 1.0 / (g.spacing(1) * g.spacing(1));
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i)
        visit(static_cast<std::size_t>(j) * nx + i, static_cast<std::size_t>(j + 1) * nx + i, wy);
  }
}

}  // namespace detail

/// Second-order central Laplacian with mirror ghost cells (homogeneous Neumann).
/// Assembled face by face, so each face flux enters its two cells with
/// opposite signs: zero row sums, zero column sums, symmetric.
inline Field neumann_laplacian(const Field& f) {
  Field out(f.grid());
  detail::for_each_face(f.grid(), [&](std::size_t a, std::size_t b, double w) {
    const double flux = (f[b] - f[a]) * w;
    out[a] += flux;
    out[b] -= flux;
  });
  return out;
}

inline Field neumann_laplacian(const Field& f, const Grid& g) {
  require_on(f, g);
  return neumann_laplacian(f);
}

/// Assembled operator matrix of neumann_laplacian.
inline Eigen::SparseMatrix<double> laplacian_matrix(const Grid& g) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(4 * g.size() * static_cast<std::size_t>(g.dim()));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  detail::for_each_face(g, [&](std::size_t a, std::size_t b, double w) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    t.emplace_back(ia, ib, w);
    t.emplace_back(ib, ia, w);
    diag[ia] -= w;
    diag[ib] -= w;
  });
  for (Eigen::Index i = 0; i < diag.size(); ++i) t.emplace_back(i, i, diag[i]);
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Midpoint quadrature.
inline double integrate(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_volume();
}

inline double integrate(const Field& f, const Grid& g) {
  require_on(f, g);
  return integrate(f);
}

/// Quadrature inner product.
inline double inner(const Field& f, const Field& g) {
  f.check_same(g);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid().cell_volume();
}

inline double norm(const Field& f) { return std::sqrt(inner(f, f)); }

/// Discrete Dirichlet form sum_faces (df)(dg)/h^2 * cell volume; equals <-Lap f, g>.
inline double grad_inner(const Field& f, const Field& g) {
  f.check_same(g);
  double s = 0.0;
  detail::for_each_face(f.grid(), [&](std::size_t a, std::size_t b, double w) {
    s += (f[b] - f[a]) * (g[b] - g[a]) * w;
  });
  return s * f.grid().cell_volume();
}

/// Discrete |grad f|_2^2.
inline double grad_sq_norm(const Field& f) { return grad_inner(f, f); }

inline double grad_sq_norm(const Field& f, const Grid& g) {
  require_on(f, g);
  return grad_sq_norm(f);
}

inline double mean(const Field& f) { return integrate(f) / f.grid().volume(); }

inline double mean(const Field& f, const Grid& g) {
  require_on(f, g);
  return mean(f);
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const Field& f) { return max_abs(f.values()); }

}  // namespace cpf
