#pragma once
// Electric-field extraction E = -grad V: midpoint finite differences, and
// global polynomial interpolation along grid lines with equidistant or
// Chebyshev-selected nodes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "relaxfield/error.hpp"
#include "relaxfield/grid.hpp"

namespace relaxfield {

/// Field components on the same node lattice as the potential.
struct FieldGrid {
  GridSpec spec;
  std::vector<double> ex;  ///< volts per unit length
  std::vector<double> ey;

  explicit FieldGrid(const GridSpec& s)
      : spec(s),
        ex(static_cast<std::size_t>(s.n + 1) * (s.n + 1), 0.0),
        ey(ex.size()) {}

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * (spec.n + 1) + i;
  }
  double ex_at(int i, int j) const { return ex[index(i, j)]; }
  double ey_at(int i, int j) const { return ey[index(i, j)]; }
};

/// Power-basis polynomial coefficients: value(x) = sum c[k] * x^k.
struct PolyCoeffs {
  std::vector<double> c;
  int degree() const { return static_cast<int>(c.size()) - 1; }
};

enum class NodeScheme { equidistant, chebyshev };

inline const char* to_string(NodeScheme s) {
  return s == NodeScheme::equidistant ? "equidistant" : "chebyshev";
}

/// Midpoint differences at interior nodes, second-order one-sided stencils
/// on the edges, negated: exact for potentials of the form a+bx+cy+dxy.
inline FieldGrid field_midpoint(const PotentialGrid& grid) {
  const int n = grid.n();
  const double hx = grid.spec().hx();
  const double hy = grid.spec().hy();
  FieldGrid field(grid.spec());

  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      double dvdx;
      if (i == 0)
        dvdx = (-3.0 * grid.value(0, j) + 4.0 * grid.value(1, j) - grid.value(2, j)) / (2.0 * hx);
      else if (i == n)
        dvdx = (3.0 * grid.value(n, j) - 4.0 * grid.value(n - 1, j) + grid.value(n - 2, j)) /
               (2.0 * hx);
      else
        dvdx = (grid.value(i + 1, j) - grid.value(i - 1, j)) / (2.0 * hx);

      double dvdy;
      if (j == 0)
        dvdy = (-3.0 * grid.value(i, 0) + 4.0 * grid.value(i, 1) - grid.value(i, 2)) / (2.0 * hy);
      else if (j == n)
        dvdy = (3.0 * grid.value(i, n) - 4.0 * grid.value(i, n - 1) + grid.value(i, n - 2)) /
               (2.0 * hy);
      else
        dvdy = (grid.value(i, j + 1) - grid.value(i, j - 1)) / (2.0 * hy);

      field.ex[field.index(i, j)] = -dvdx;
      field.ey[field.index(i, j)] = -dvdy;
    }
  }
  return field;
}

/// Power-basis coefficients of the unique polynomial through the samples,
/// via Newton divided differences. Ill-conditioned for many nodes; callers
/// that care about accuracy should stay below ~15 nodes.
inline PolyCoeffs lagrange_interpolate(std::span<const double> coords,
                                       std::span<const double> values) {
  const std::size_t m = coords.size();
  if (m != values.size())
    throw ValidationError("samples", "coordinate and value counts differ");
  if (m < 2) throw ValidationError("samples", "need at least 2 samples");
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      if (coords[a] == coords[b])
        throw DuplicateNodes("duplicate sample coordinate " + std::to_string(coords[a]));

  // Divided-difference table, in place.
  std::vector<double> dd(values.begin(), values.end());
  for (std::size_t order = 1; order < m; ++order)
    for (std::size_t r = m - 1; r >= order; --r)
      dd[r] = (dd[r] - dd[r - 1]) / (coords[r] - coords[r - order]);

  // Horner expansion of the Newton form into the power basis.
  PolyCoeffs poly;
  poly.c.assign(m, 0.0);
  poly.c[0] = dd[m - 1];
  std::size_t len = 1;
  for (std::size_t r = m - 1; r-- > 0;) {
    // poly <- poly * (x - coords[r]) + dd[r]
    ++len;
    for (std::size_t k = len - 1; k >= 1; --k)
      poly.c[k] = poly.c[k - 1] - coords[r] * poly.c[k];
    poly.c[0] = dd[r] - coords[r] * poly.c[0];
  }
  return poly;
}

inline double poly_evaluate(const PolyCoeffs& poly, double x) {
  double acc = 0.0;
  for (std::size_t k = poly.c.size(); k-- > 0;) acc = acc * x + poly.c[k];
  return acc;
}

/// Analytic derivative of the power-basis polynomial at a point.
inline double poly_derivative(const PolyCoeffs& poly, double x) {
  double acc = 0.0;
  for (std::size_t k = poly.c.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * poly.c[k];
  return acc;
}

/// m grid indices clustered toward the interval ends:
/// floor((n/2) * (1 - cos((2k-1)*pi/(2m)))), k = 1..m, clamped to [0, n],
/// deduplicated, ascending. The n/2 scaling keeps every index on the grid;
/// the first and last of the m angles always land on distinct indices.
inline std::vector<int> chebyshev_nodes(int n, int m) {
  if (n < 2) throw ValidationError("n", "must be >= 2");
  if (m < 2 || m > n + 1) throw ValidationError("m", "must satisfy 2 <= m <= n+1");
  std::vector<int> indices;
  indices.reserve(m);
  for (int k = 1; k <= m; ++k) {
    const double angle = (2.0 * k - 1.0) * std::numbers::pi / (2.0 * m);
    const double pos = 0.5 * n * (1.0 - std::cos(angle));
    const int idx = std::clamp(static_cast<int>(std::floor(pos)), 0, n);
    if (indices.empty() || indices.back() != idx) indices.push_back(idx);
  }
  return indices;
}

namespace detail {

// m indices spread evenly over 0..n, endpoints included.
inline std::vector<int> equidistant_indices(int n, int m) {
  if (m == n + 1) {
    std::vector<int> all(n + 1);
    for (int i = 0; i <= n; ++i) all[i] = i;
    return all;
  }
  std::vector<int> indices;
  indices.reserve(m);
  for (int k = 0; k < m; ++k) {
    const int idx = static_cast<int>(std::lround(static_cast<double>(k) * n / (m - 1)));
    if (indices.empty() || indices.back() != idx) indices.push_back(idx);
  }
  return indices;
}

}  // namespace detail

/// Interpolates each grid row (and column) at the selected node subset,
/// differentiates the interpolant analytically, and evaluates -P' at every
/// node. High equidistant node counts are kept available on purpose: they
/// exhibit the Runge oscillations near the domain edges that the Chebyshev
/// selection suppresses.
inline FieldGrid field_polynomial(const PotentialGrid& grid, NodeScheme scheme,
                                  int nodes_per_line) {
  const int n = grid.n();
  if (nodes_per_line < 2 || nodes_per_line > n + 1)
    throw ValidationError("field.nodes_per_line", "must satisfy 2 <= m <= n+1");

  const std::vector<int> indices = scheme == NodeScheme::chebyshev
                                       ? chebyshev_nodes(n, nodes_per_line)
                                       : detail::equidistant_indices(n, nodes_per_line);
  const double hx = grid.spec().hx();
  const double hy = grid.spec().hy();
  FieldGrid field(grid.spec());

  std::vector<double> coords(indices.size());
  std::vector<double> samples(indices.size());

  // Rows: per-row polynomial in x gives E_x along the row.
  for (int j = 0; j <= n; ++j) {
    for (std::size_t s = 0; s < indices.size(); ++s) {
      coords[s] = indices[s] * hx;
      samples[s] = grid.value(indices[s], j);
    }
    const PolyCoeffs poly = lagrange_interpolate(coords, samples);
    for (int i = 0; i <= n; ++i)
      field.ex[field.index(i, j)] = -poly_derivative(poly, i * hx);
  }

  // Columns: per-column polynomial in y gives E_y along the column.
  for (int i = 0; i <= n; ++i) {
    for (std::size_t s = 0; s < indices.size(); ++s) {
      coords[s] = indices[s] * hy;
      samples[s] = grid.value(i, indices[s]);
    }
    const PolyCoeffs poly = lagrange_interpolate(coords, samples);
    for (int j = 0; j <= n; ++j)
      field.ey[field.index(i, j)] = -poly_derivative(poly, j * hy);
  }
  return field;
}

}  // namespace relaxfield
