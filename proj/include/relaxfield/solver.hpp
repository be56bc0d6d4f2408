#pragma once
// Relaxation solvers for the discrete Laplace system: Jacobi, Gauss-Seidel,
// SOR with fixed or adaptive relaxation factor, plus a dense direct solver
// used as a small-system oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relaxfield/error.hpp"
#include "relaxfield/grid.hpp"

namespace relaxfield {

enum class Method { jacobi, gauss_seidel, sor, adaptive_sor };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::jacobi: return "jacobi";
    case Method::gauss_seidel: return "gauss_seidel";
    case Method::sor: return "sor";
    case Method::adaptive_sor: return "adaptive_sor";
  }
  return "?";
}

inline Method parse_method(std::string_view text) {
  if (text == "jacobi") return Method::jacobi;
  if (text == "gauss_seidel") return Method::gauss_seidel;
  if (text == "sor") return Method::sor;
  if (text == "adaptive_sor") return Method::adaptive_sor;
  throw ValidationError("solver.method", "must be one of jacobi|gauss_seidel|sor|adaptive_sor");
}

/// Clamp interval for the relaxation factor; kept inside [1, 2) so every
/// sweep stays in the stable over-relaxation range.
struct BetaBounds {
  double lo = 1.0;
  double hi = 1.99;
  friend bool operator==(const BetaBounds&, const BetaBounds&) = default;
};

struct GridIndex {
  int i = 0;
  int j = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

struct SolverConfig {
  Method method = Method::sor;
  double beta0 = 1.5;           ///< relaxation factor (start value when adaptive)
  double adaptive_gain = 100.0; ///< multiplier on the monitor-error trend
  BetaBounds beta_bounds{};
  double tol = 1e-4;            ///< relative threshold, see solve()
  int max_iter = 10000;
  std::optional<GridIndex> monitor;  ///< defaults to the grid midpoint (n/2, n/2)
  bool record_residual = true;

  void validate() const {
    if (!(beta0 >= 1.0 && beta0 < 2.0))
      throw ValidationError("solver.beta0", "must lie in [1, 2)");
    if (!(beta_bounds.lo >= 1.0 && beta_bounds.lo <= beta_bounds.hi && beta_bounds.hi < 2.0))
      throw ValidationError("solver.beta_bounds", "must satisfy 1 <= lo <= hi < 2");
    if ((method == Method::sor || method == Method::adaptive_sor) &&
        (beta0 < beta_bounds.lo || beta0 > beta_bounds.hi))
      throw ValidationError("solver.beta0", "must lie within beta_bounds");
    if (!(tol > 0.0)) throw ValidationError("solver.tol", "must be > 0");
    if (max_iter < 1) throw ValidationError("solver.max_iter", "must be >= 1");
    if (!(adaptive_gain >= 0.0))
      throw ValidationError("solver.adaptive_gain", "must be >= 0");
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct TraceRecord {
  int k = 0;            ///< iteration number, starting at 1
  double epsilon = 0.0; ///< monitor-point change over this sweep
  double beta = 0.0;    ///< relaxation factor applied in this sweep
  std::optional<double> residual;  ///< max five-point defect, when recorded
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  double final_epsilon = 0.0;
  double final_beta = 0.0;
  double wall_time = 0.0;  ///< seconds
};

struct SolveOutcome {
  PotentialGrid grid;
  SolveReport report;
  ConvergenceTrace trace;
};

namespace detail {

// Five-point stencil weights: V = wx*(W+E) + wy*(S+N). Equal spacings give
// exactly 1/4 each.
struct StencilWeights {
  double wx = 0.25;
  double wy = 0.25;
};

inline StencilWeights stencil_weights(const GridSpec& spec) {
  const double hx2 = spec.hx() * spec.hx();
  const double hy2 = spec.hy() * spec.hy();
  const double denom = 2.0 * (hx2 + hy2);
  return {hy2 / denom, hx2 / denom};
}

// Every free node must have four in-grid neighbours.
inline void require_closed_boundary(const PotentialGrid& grid) {
  const int n = grid.n();
  for (int i = 0; i <= n; ++i)
    if (!grid.is_fixed(i, 0) || !grid.is_fixed(i, n))
      throw ValidationError("grid", "free perimeter node; boundary must be fixed");
  for (int j = 0; j <= n; ++j)
    if (!grid.is_fixed(0, j) || !grid.is_fixed(n, j))
      throw ValidationError("grid", "free perimeter node; boundary must be fixed");
}

// One in-place sweep in natural row-major order (j outer, i inner): west and
// south neighbours are current-sweep values, east and north previous ones.
// beta weights the full neighbour average, so beta = 1 is exactly the
// Gauss-Seidel update.
inline void relax_sweep_inplace(PotentialGrid& grid, double beta) {
  const int n = grid.n();
  const auto [wx, wy] = stencil_weights(grid.spec());
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      if (grid.is_fixed(i, j)) continue;
      const double avg = wx * (grid.value(i - 1, j) + grid.value(i + 1, j)) +
                         wy * (grid.value(i, j - 1) + grid.value(i, j + 1));
      grid.set_value(i, j, (1.0 - beta) * grid.value(i, j) + beta * avg);
    }
  }
}

// Jacobi target update: dst gets the neighbour average of src at free nodes.
inline void jacobi_sweep_into(const PotentialGrid& src, PotentialGrid& dst) {
  const int n = src.n();
  const auto [wx, wy] = stencil_weights(src.spec());
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      if (src.is_fixed(i, j)) continue;
      dst.set_value(i, j, wx * (src.value(i - 1, j) + src.value(i + 1, j)) +
                              wy * (src.value(i, j - 1) + src.value(i, j + 1)));
    }
  }
}

}  // namespace detail

/// One Jacobi sweep: every free node becomes the (weighted) average of its
/// four neighbours' previous values.
inline PotentialGrid jacobi_sweep(const PotentialGrid& grid) {
  detail::require_closed_boundary(grid);
  PotentialGrid next = grid;
  detail::jacobi_sweep_into(grid, next);
  return next;
}

/// One Gauss-Seidel sweep in natural row-major order.
inline PotentialGrid gauss_seidel_sweep(const PotentialGrid& grid) {
  detail::require_closed_boundary(grid);
  PotentialGrid next = grid;
  detail::relax_sweep_inplace(next, 1.0);
  return next;
}

/// One SOR sweep: (1-beta)*old + beta*(Gauss-Seidel neighbour average).
inline PotentialGrid sor_sweep(const PotentialGrid& grid, double beta) {
  if (!(beta >= 1.0 && beta < 2.0))
    throw ValidationError("beta", "must lie in [1, 2)");
  detail::require_closed_boundary(grid);
  PotentialGrid next = grid;
  detail::relax_sweep_inplace(next, beta);
  return next;
}

/// Relaxation-factor update from two consecutive monitor errors:
/// clamp(beta0 + gain * (eps_curr - eps_prev)). Differences are signed.
inline double adapt_beta(double beta0, double eps_prev, double eps_curr, double gain,
                         BetaBounds bounds) {
  if (!(gain >= 0.0)) throw ValidationError("adaptive_gain", "must be >= 0");
  return std::clamp(beta0 + gain * (eps_curr - eps_prev), bounds.lo, bounds.hi);
}

/// Max over free nodes of |V - neighbour average|: the pointwise defect of
/// the five-point equation. Zero exactly at the discrete solution.
inline double residual_norm(const PotentialGrid& grid) {
  const int n = grid.n();
  const auto [wx, wy] = detail::stencil_weights(grid.spec());
  double worst = 0.0;
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      if (grid.is_fixed(i, j)) continue;
      const double avg = wx * (grid.value(i - 1, j) + grid.value(i + 1, j)) +
                         wy * (grid.value(i, j - 1) + grid.value(i, j + 1));
      worst = std::max(worst, std::abs(grid.value(i, j) - avg));
    }
  }
  return worst;
}

namespace detail {

// Per-sweep contraction factor estimated from the recent |epsilon| history:
// the larger of the one-step ratio and the geometric mean over a short
// window, clamped below 1. Returns the cap when there is no usable history.
inline double contraction_estimate(const std::vector<TraceRecord>& records) {
  constexpr double kCap = 1.0 - 1e-9;
  constexpr int kWindow = 8;
  const std::size_t count = records.size();
  const double latest = std::abs(records.back().epsilon);
  if (latest == 0.0) return 0.0;
  if (count < 2) return kCap;

  double estimate = -1.0;
  const double prev = std::abs(records[count - 2].epsilon);
  if (prev > 0.0) estimate = latest / prev;

  const int w = std::min<int>(kWindow, static_cast<int>(count) - 1);
  const double old = std::abs(records[count - 1 - w].epsilon);
  if (old > 0.0) estimate = std::max(estimate, std::pow(latest / old, 1.0 / w));

  if (estimate < 0.0) return kCap;
  return std::clamp(estimate, 0.0, kCap);
}

}  // namespace detail

/// Iterates the configured method until the monitor-point change epsilon_k
/// falls below tol * max(1, max |fixed potential|) or max_iter is reached.
///
/// A small epsilon_k alone is necessary but not sufficient: with a zero
/// start a monitor far from every electrode does not move during the first
/// sweeps, and under slow geometric decay the remaining error exceeds the
/// last increment by rho/(1-rho). A candidate stop is therefore accepted
/// only when the five-point defect and the projected geometric tail
/// |epsilon_k| * rho/(1-rho) are both below the same threshold.
///
/// Non-convergence is reported, not thrown.
inline SolveOutcome solve(const PotentialGrid& start, const SolverConfig& config) {
  config.validate();
  detail::require_closed_boundary(start);

  const int n = start.n();
  const GridIndex monitor = config.monitor.value_or(GridIndex{n / 2, n / 2});
  if (monitor.i < 0 || monitor.i > n || monitor.j < 0 || monitor.j > n)
    throw ValidationError("solver.monitor", "outside the grid");
  if (start.is_fixed(monitor.i, monitor.j))
    throw MonitorOnFixedNode("monitor node (" + std::to_string(monitor.i) + "," +
                             std::to_string(monitor.j) + ") is fixed");

  const double scale = std::max(1.0, start.fixed_abs_max());
  const double threshold = config.tol * scale;

  SolveOutcome out{start, {}, {}};
  PotentialGrid scratch = start;  // jacobi double-buffer

  const bool uses_beta = config.method == Method::sor || config.method == Method::adaptive_sor;
  double beta = uses_beta ? std::clamp(config.beta0, config.beta_bounds.lo, config.beta_bounds.hi)
                          : 1.0;
  double eps_prev = 0.0;

  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 1; k <= config.max_iter; ++k) {
    const double before = out.grid.value(monitor.i, monitor.j);
    switch (config.method) {
      case Method::jacobi:
        detail::jacobi_sweep_into(out.grid, scratch);
        std::swap(out.grid, scratch);
        break;
      case Method::gauss_seidel:
        detail::relax_sweep_inplace(out.grid, 1.0);
        break;
      case Method::sor:
      case Method::adaptive_sor:
        detail::relax_sweep_inplace(out.grid, beta);
        break;
    }
    const double eps = out.grid.value(monitor.i, monitor.j) - before;

    const bool candidate = std::abs(eps) <= threshold;
    std::optional<double> residual;
    if (config.record_residual || candidate) residual = residual_norm(out.grid);

    out.trace.records.push_back({k, eps, beta, residual});
    out.report.iterations = k;
    out.report.final_epsilon = eps;
    out.report.final_beta = beta;

    if (candidate && *residual <= threshold) {
      const double rho = detail::contraction_estimate(out.trace.records);
      const double projected_tail = std::abs(eps) * rho / (1.0 - rho);
      if (projected_tail <= threshold) {
        out.report.converged = true;
        break;
      }
    }
    if (config.method == Method::adaptive_sor && k >= 2)
      beta = adapt_beta(config.beta0, eps_prev, eps, config.adaptive_gain, config.beta_bounds);
    eps_prev = eps;
  }
  out.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Assembles the five-point system over free nodes and solves it by dense
/// Gaussian elimination with partial pivoting. Exact up to rounding; meant
/// as an oracle for small grids.
inline PotentialGrid direct_solve(const PotentialGrid& grid) {
  detail::require_closed_boundary(grid);
  const int n = grid.n();
  const auto [wx, wy] = detail::stencil_weights(grid.spec());

  std::vector<int> eq_of(grid.node_count(), -1);
  std::vector<std::pair<int, int>> node_of;
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i)
      if (!grid.is_fixed(i, j)) {
        eq_of[grid.index(i, j)] = static_cast<int>(node_of.size());
        node_of.emplace_back(i, j);
      }
  const std::size_t m = node_of.size();
  if (m > 10000)
    throw SystemTooLarge("free-node count " + std::to_string(m) + " exceeds 10000");
  if (m == 0) return grid;

  std::vector<double> a(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  for (std::size_t p = 0; p < m; ++p) {
    const auto [i, j] = node_of[p];
    a[p * m + p] = 1.0;
    const std::pair<int, int> nbr[4] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    const double w[4] = {wx, wx, wy, wy};
    for (int t = 0; t < 4; ++t) {
      const auto [ni, nj] = nbr[t];
      if (grid.is_fixed(ni, nj)) {
        b[p] += w[t] * grid.value(ni, nj);
      } else {
        a[p * m + eq_of[grid.index(ni, nj)]] -= w[t];
      }
    }
  }

  // Elimination with partial pivoting.
  std::vector<int> perm(m);
  for (std::size_t c = 0; c < m; ++c) perm[c] = static_cast<int>(c);
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t pivot = c;
    double best = std::abs(a[perm[c] * m + c]);
    for (std::size_t r = c + 1; r < m; ++r) {
      const double cand = std::abs(a[perm[r] * m + c]);
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (best == 0.0) throw Error("singular five-point system");
    std::swap(perm[c], perm[pivot]);
    const double* prow = &a[perm[c] * m];
    const double pinv = 1.0 / prow[c];
    for (std::size_t r = c + 1; r < m; ++r) {
      double* row = &a[perm[r] * m];
      const double factor = row[c] * pinv;
      if (factor == 0.0) continue;
      row[c] = 0.0;
      for (std::size_t cc = c + 1; cc < m; ++cc) row[cc] -= factor * prow[cc];
      b[perm[r]] -= factor * b[perm[c]];
    }
  }
  std::vector<double> x(m, 0.0);
  for (std::size_t rc = m; rc-- > 0;) {
    const double* row = &a[perm[rc] * m];
    double sum = b[perm[rc]];
    for (std::size_t cc = rc + 1; cc < m; ++cc) sum -= row[cc] * x[cc];
    x[rc] = sum / row[rc];
  }

  PotentialGrid solution = grid;
  for (std::size_t p = 0; p < m; ++p) {
    const auto [i, j] = node_of[p];
    solution.set_value(i, j, x[p]);
  }
  return solution;
}

}  // namespace relaxfield
