#pragma once
// Rectangular node lattice, electrode layout, and rasterization of
// Dirichlet boundary values onto the lattice.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relaxfield/error.hpp"

namespace relaxfield {

/// Square lattice of (n+1) x (n+1) nodes over [0, x_max] x [0, y_max].
struct GridSpec {
  int n = 200;  ///< node indices run 0..n on each axis
  double x_max = 1.0;
  double y_max = 1.0;

  double hx() const { return x_max / n; }
  double hy() const { return y_max / n; }

  void validate() const {
    if (n < 2) throw ValidationError("grid.n", "must be >= 2");
    if (!std::isfinite(x_max) || x_max <= 0.0)
      throw ValidationError("grid.x_max", "must be finite and > 0");
    if (!std::isfinite(y_max) || y_max <= 0.0)
      throw ValidationError("grid.y_max", "must be finite and > 0");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

enum class ElectrodeRole { source, drain, gate, shield };

inline const char* to_string(ElectrodeRole role) {
  switch (role) {
    case ElectrodeRole::source: return "source";
    case ElectrodeRole::drain: return "drain";
    case ElectrodeRole::gate: return "gate";
    case ElectrodeRole::shield: return "shield";
  }
  return "?";
}

inline ElectrodeRole parse_electrode_role(std::string_view text) {
  if (text == "source") return ElectrodeRole::source;
  if (text == "drain") return ElectrodeRole::drain;
  if (text == "gate") return ElectrodeRole::gate;
  if (text == "shield") return ElectrodeRole::shield;
  throw ValidationError("region.role", "must be one of source|drain|gate|shield");
}

/// Axis-aligned rectangle in normalized domain coordinates [0,1]^2.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// One metallic electrode: a rectangle held at a fixed potential.
struct ElectrodeRegion {
  ElectrodeRole role = ElectrodeRole::shield;
  Rect rect{};
  double potential = 0.0;

  void validate() const {
    if (!(rect.x0 < rect.x1) || !(rect.y0 < rect.y1))
      throw ValidationError("region.rect", "requires x0 < x1 and y0 < y1");
    if (rect.x0 < 0.0 || rect.y0 < 0.0 || rect.x1 > 1.0 || rect.y1 > 1.0)
      throw ValidationError("region.rect", "must lie within [0,1]^2");
    if (!std::isfinite(potential))
      throw ValidationError("region.potential", "must be finite");
  }

  friend bool operator==(const ElectrodeRegion&, const ElectrodeRegion&) = default;
};

/// Electrode arrangement plus the grounded shield frame on the perimeter.
struct DeviceLayout {
  std::vector<ElectrodeRegion> regions;
  bool shield_grounded = true;

  friend bool operator==(const DeviceLayout&, const DeviceLayout&) = default;
};

/// Default four-electrode arrangement: source and drain pads facing each
/// other across the domain, and a gate split into two halves placed
/// symmetrically about the source-drain axis.
inline DeviceLayout split_gate_layout(double v_source = 1.0, double v_drain = -3.0,
                                      double v_gate = 3.0) {
  DeviceLayout layout;
  layout.regions = {
      {ElectrodeRole::source, {0.05, 0.40, 0.15, 0.60}, v_source},
      {ElectrodeRole::drain, {0.85, 0.40, 0.95, 0.60}, v_drain},
      {ElectrodeRole::gate, {0.45, 0.05, 0.55, 0.35}, v_gate},
      {ElectrodeRole::gate, {0.45, 0.65, 0.55, 0.95}, v_gate},
  };
  return layout;
}

/// Inclusive block of node indices. Rasterizing a rectangle always yields a
/// full block of node lines, so the set is stored as its bounds.
struct NodeBlock {
  int i0 = 0, i1 = -1, j0 = 0, j1 = -1;

  bool empty() const { return i1 < i0 || j1 < j0; }
  bool contains(int i, int j) const { return i >= i0 && i <= i1 && j >= j0 && j <= j1; }
  long long count() const {
    return empty() ? 0 : static_cast<long long>(i1 - i0 + 1) * (j1 - j0 + 1);
  }

  friend bool operator==(const NodeBlock&, const NodeBlock&) = default;
};

namespace detail {

// Node lines i with lo <= i/n <= hi, inclusive. A slab too thin to contain a
// node line snaps to the line nearest its center so degenerate electrodes
// still claim something.
inline std::pair<int, int> rasterize_axis(double lo, double hi, int n) {
  constexpr double kSnapTol = 1e-9;  // absorbs representation noise at node lines
  int first = static_cast<int>(std::ceil(lo * n - kSnapTol));
  int last = static_cast<int>(std::floor(hi * n + kSnapTol));
  if (first > last) {
    const int snapped = static_cast<int>(std::nearbyint(0.5 * (lo + hi) * n));
    first = last = std::clamp(snapped, 0, n);
  }
  first = std::clamp(first, 0, n);
  last = std::clamp(last, 0, n);
  return {first, last};
}

}  // namespace detail

/// All nodes (i, j) with x0 <= i*h_x/x_max <= x1 and y0 <= j*h_y/y_max <= y1.
/// Never empty: see detail::rasterize_axis for the thin-rectangle snap.
inline NodeBlock rasterize_region(const ElectrodeRegion& region, const GridSpec& spec) {
  spec.validate();
  region.validate();
  const auto [i0, i1] = detail::rasterize_axis(region.rect.x0, region.rect.x1, spec.n);
  const auto [j0, j1] = detail::rasterize_axis(region.rect.y0, region.rect.y1, spec.n);
  return {i0, i1, j0, j1};
}

/// Node potentials plus a fixed/free mask. Fixed nodes carry Dirichlet values
/// and are never touched by relaxation sweeps.
class PotentialGrid {
 public:
  explicit PotentialGrid(const GridSpec& spec)
      : spec_(spec),
        values_(static_cast<std::size_t>(spec.n + 1) * (spec.n + 1), 0.0),
        fixed_(values_.size(), 0) {
    spec.validate();
  }

  int n() const { return spec_.n; }
  const GridSpec& spec() const { return spec_; }
  std::size_t node_count() const { return values_.size(); }

  double value(int i, int j) const { return values_[index(i, j)]; }
  bool is_fixed(int i, int j) const { return fixed_[index(i, j)] != 0; }

  void set_value(int i, int j, double v) { values_[index(i, j)] = v; }
  void fix(int i, int j, double v) {
    values_[index(i, j)] = v;
    fixed_[index(i, j)] = 1;
  }

  std::size_t free_count() const {
    std::size_t count = 0;
    for (auto f : fixed_) count += (f == 0);
    return count;
  }

  /// Largest |value| over fixed nodes; 0 when nothing is fixed.
  double fixed_abs_max() const {
    double m = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (fixed_[k]) m = std::max(m, std::abs(values_[k]));
    return m;
  }

  /// (min, max) over fixed node values; (0, 0) when nothing is fixed.
  std::pair<double, double> fixed_value_range() const {
    bool any = false;
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!fixed_[k]) continue;
      if (!any) {
        lo = hi = values_[k];
        any = true;
      } else {
        lo = std::min(lo, values_[k]);
        hi = std::max(hi, values_[k]);
      }
    }
    return {lo, hi};
  }

  std::span<const double> values() const { return values_; }

  /// Row-major storage index, j outer.
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * (spec_.n + 1) + i;
  }

  friend bool operator==(const PotentialGrid&, const PotentialGrid&) = default;

 private:
  GridSpec spec_;
  std::vector<double> values_;
  std::vector<std::uint8_t> fixed_;
};

/// Max-norm distance between two grids of identical shape.
inline double max_abs_diff(const PotentialGrid& a, const PotentialGrid& b) {
  if (a.spec() != b.spec()) throw ValidationError("grid", "shape mismatch");
  double m = 0.0;
  auto va = a.values(), vb = b.values();
  for (std::size_t k = 0; k < va.size(); ++k) m = std::max(m, std::abs(va[k] - vb[k]));
  return m;
}

/// Rasterizes every region onto a fresh grid. Electrode nodes (interior
/// included, electrodes are equipotential) are fixed at the region potential;
/// with a grounded shield every perimeter node is fixed at 0 V; remaining
/// nodes are free and start at 0 V.
inline PotentialGrid build_grid(const DeviceLayout& layout, const GridSpec& spec) {
  spec.validate();
  PotentialGrid grid(spec);
  const int n = spec.n;

  for (const auto& region : layout.regions) {
    const NodeBlock block = rasterize_region(region, spec);
    for (int j = block.j0; j <= block.j1; ++j) {
      for (int i = block.i0; i <= block.i1; ++i) {
        if (grid.is_fixed(i, j) && grid.value(i, j) != region.potential)
          throw OverlapConflict("regions with potentials " + std::to_string(grid.value(i, j)) +
                                " V and " + std::to_string(region.potential) +
                                " V both claim node (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
        grid.fix(i, j, region.potential);
      }
    }
  }

  if (layout.shield_grounded) {
    auto ground = [&](int i, int j) {
      if (grid.is_fixed(i, j) && grid.value(i, j) != 0.0)
        throw OverlapConflict("region at " + std::to_string(grid.value(i, j)) +
                              " V claims perimeter node (" + std::to_string(i) + "," +
                              std::to_string(j) + ") owned by the grounded shield");
      grid.fix(i, j, 0.0);
    };
    for (int i = 0; i <= n; ++i) {
      ground(i, 0);
      ground(i, n);
    }
    for (int j = 1; j < n; ++j) {
      ground(0, j);
      ground(n, j);
    }
  } else {
    // The five-point stencil needs four in-grid neighbours at every free
    // node, so an ungrounded layout must cover the perimeter itself.
    for (int i = 0; i <= n; ++i)
      if (!grid.is_fixed(i, 0) || !grid.is_fixed(i, n))
        throw ValidationError("layout", "perimeter nodes must be fixed when the shield "
                                        "is not grounded");
    for (int j = 0; j <= n; ++j)
      if (!grid.is_fixed(0, j) || !grid.is_fixed(n, j))
        throw ValidationError("layout", "perimeter nodes must be fixed when the shield "
                                        "is not grounded");
  }

  if (grid.free_count() == 0) throw EmptyInterior("layout leaves no free nodes");
  return grid;
}

}  // namespace relaxfield
