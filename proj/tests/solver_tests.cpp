#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "relaxfield/grid.hpp"
#include "relaxfield/solver.hpp"
#include "test_support.hpp"

using namespace relaxfield;
using relaxfield::testing::center_free_node;
using relaxfield::testing::random_layout;

namespace {

// 3x3 grid with a single free center; neighbours fixed at 1, 2, 3, 4.
PotentialGrid single_free_center() {
  PotentialGrid grid(GridSpec{2, 1.0, 1.0});
  for (int j = 0; j <= 2; ++j)
    for (int i = 0; i <= 2; ++i)
      if (!(i == 1 && j == 1)) grid.fix(i, j, 0.0);
  grid.fix(0, 1, 1.0);
  grid.fix(2, 1, 2.0);
  grid.fix(1, 0, 3.0);
  grid.fix(1, 2, 4.0);
  return grid;
}

SolverConfig tight_config(Method method, double beta = 1.9) {
  SolverConfig cfg;
  cfg.method = method;
  cfg.beta0 = method == Method::adaptive_sor ? 1.5 : beta;
  cfg.tol = 1e-10;
  cfg.max_iter = 100000;
  return cfg;
}

}  // namespace

TEST_CASE("jacobi sweep produces the neighbour mean") {
  SECTION("single free centre") {
    const PotentialGrid next = jacobi_sweep(single_free_center());
    CHECK(next.value(1, 1) == Approx(2.5).margin(1e-15));
  }
  SECTION("all nodes fixed is the identity") {
    PotentialGrid grid(GridSpec{2, 1.0, 1.0});
    for (int j = 0; j <= 2; ++j)
      for (int i = 0; i <= 2; ++i) grid.fix(i, j, i + 10.0 * j);
    CHECK(jacobi_sweep(grid) == grid);
  }
  SECTION("zero boundary keeps the zero interior") {
    const PotentialGrid grid = build_grid(DeviceLayout{}, GridSpec{4, 1.0, 1.0});
    const PotentialGrid next = jacobi_sweep(grid);
    for (double v : next.values()) CHECK(v == 0.0);
  }
  SECTION("anisotropic spacing uses the weighted stencil") {
    // hx=1, hy=0.5: wx = 0.25/2.5 = 0.1, wy = 1/2.5 = 0.4
    PotentialGrid grid(GridSpec{2, 2.0, 1.0});
    for (int j = 0; j <= 2; ++j)
      for (int i = 0; i <= 2; ++i)
        if (!(i == 1 && j == 1)) grid.fix(i, j, 0.0);
    grid.fix(0, 1, 1.0);
    grid.fix(2, 1, 1.0);
    grid.fix(1, 0, 2.0);
    grid.fix(1, 2, 2.0);
    CHECK(jacobi_sweep(grid).value(1, 1) == Approx(1.8).margin(1e-15));
  }
}

TEST_CASE("gauss-seidel updates west-to-east within a row") {
  // Two adjacent free nodes (1,1) and (2,1) on a 4x4 lattice; the east node
  // must see the west node's current-sweep value.
  PotentialGrid grid(GridSpec{3, 1.0, 1.0});
  for (int j = 0; j <= 3; ++j)
    for (int i = 0; i <= 3; ++i)
      if (!((i == 1 || i == 2) && j == 1)) grid.fix(i, j, 0.0);
  grid.fix(0, 1, 4.0);
  grid.fix(1, 0, 8.0);
  grid.fix(1, 2, 12.0);
  grid.fix(2, 0, 16.0);
  grid.fix(2, 2, 20.0);
  grid.fix(3, 1, 24.0);

  const PotentialGrid gs = gauss_seidel_sweep(grid);
  CHECK(gs.value(1, 1) == Approx(6.0).margin(1e-15));
  CHECK(gs.value(2, 1) == Approx(16.5).margin(1e-15));  // uses the fresh 6.0

  const PotentialGrid jac = jacobi_sweep(grid);
  CHECK(jac.value(1, 1) == Approx(6.0).margin(1e-15));
  CHECK(jac.value(2, 1) == Approx(15.0).margin(1e-15));  // uses the stale 0.0
}

TEST_CASE("sor sweep weights the full neighbour average") {
  SECTION("direct substitution at beta = 1.5") {
    const PotentialGrid next = sor_sweep(single_free_center(), 1.5);
    CHECK(next.value(1, 1) == Approx(3.75).margin(1e-15));
  }
  SECTION("beta = 1 is exactly gauss-seidel") {
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{30, 1.0, 1.0});
    PotentialGrid a = grid, b = grid;
    for (int sweep = 0; sweep < 100; ++sweep) {
      a = gauss_seidel_sweep(a);
      b = sor_sweep(b, 1.0);
      REQUIRE(max_abs_diff(a, b) <= 1e-14);
    }
  }
  SECTION("zero grid is a fixed point") {
    const PotentialGrid grid = build_grid(DeviceLayout{}, GridSpec{4, 1.0, 1.0});
    CHECK(sor_sweep(grid, 1.7) == grid);
  }
  SECTION("beta outside [1,2) is rejected") {
    CHECK_THROWS_AS(sor_sweep(single_free_center(), 2.0), ValidationError);
  }
}

TEST_CASE("adapt_beta follows the signed error trend and clamps") {
  const BetaBounds bounds{1.0, 1.99};
  CHECK(adapt_beta(1.5, 0.0, 0.002, 100.0, bounds) == Approx(1.7).margin(1e-12));
  CHECK(adapt_beta(1.5, 0.004, 0.001, 0.0, bounds) == 1.5);
  CHECK(adapt_beta(1.5, 0.0, 0.01, 1000.0, bounds) == 1.99);   // raw 11.5
  CHECK(adapt_beta(1.5, 0.01, 0.0, 1000.0, bounds) == 1.0);    // raw -8.5
}

TEST_CASE("residual_norm measures the worst five-point defect") {
  SECTION("single defect") {
    PotentialGrid grid = single_free_center();
    grid.set_value(1, 1, 3.0);  // neighbour average is 2.5
    CHECK(residual_norm(grid) == Approx(0.5).margin(1e-15));
  }
  SECTION("one hot boundary node") {
    PotentialGrid grid(GridSpec{2, 1.0, 1.0});
    for (int j = 0; j <= 2; ++j)
      for (int i = 0; i <= 2; ++i)
        if (!(i == 1 && j == 1)) grid.fix(i, j, 0.0);
    grid.fix(1, 0, 4.0);
    CHECK(residual_norm(grid) == Approx(1.0).margin(1e-15));
  }
  SECTION("direct solution has zero defect") {
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{12, 1.0, 1.0});
    CHECK(residual_norm(direct_solve(grid)) <= 1e-12);
  }
}

TEST_CASE("direct_solve is the small-system oracle") {
  SECTION("single free node") {
    CHECK(direct_solve(single_free_center()).value(1, 1) == Approx(2.5).margin(1e-14));
  }
  SECTION("matches converged sor on n=10") {
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{10, 1.0, 1.0});
    const PotentialGrid exact = direct_solve(grid);
    const SolveOutcome outcome = solve(grid, tight_config(Method::sor));
    REQUIRE(outcome.report.converged);
    CHECK(max_abs_diff(outcome.grid, exact) <= 1e-8);
  }
  SECTION("refuses oversized systems") {
    const PotentialGrid grid = build_grid(DeviceLayout{}, GridSpec{200, 1.0, 1.0});
    CHECK_THROWS_AS(direct_solve(grid), SystemTooLarge);
  }
}

TEST_CASE("solve stopping behaviour") {
  SECTION("zero problem converges in one iteration for every method") {
    const PotentialGrid grid = build_grid(DeviceLayout{}, GridSpec{6, 1.0, 1.0});
    for (Method m : {Method::jacobi, Method::gauss_seidel, Method::sor, Method::adaptive_sor}) {
      SolverConfig cfg;
      cfg.method = m;
      const SolveOutcome outcome = solve(grid, cfg);
      CHECK(outcome.report.converged);
      CHECK(outcome.report.iterations == 1);
      CHECK(outcome.trace.records.size() == 1);
      for (double v : outcome.grid.values()) CHECK(v == 0.0);
    }
  }
  SECTION("monitor on a fixed node is an error") {
    const PotentialGrid grid = build_grid(DeviceLayout{}, GridSpec{6, 1.0, 1.0});
    SolverConfig cfg;
    cfg.monitor = GridIndex{0, 0};
    CHECK_THROWS_AS(solve(grid, cfg), MonitorOnFixedNode);
    cfg.monitor = GridIndex{7, 2};
    CHECK_THROWS_AS(solve(grid, cfg), ValidationError);
  }
  SECTION("a quiet monitor does not fake convergence") {
    // With a zero start the centre node is untouched by early jacobi sweeps;
    // the defect and tail guards must keep the run going.
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{50, 1.0, 1.0});
    SolverConfig cfg;
    cfg.method = Method::jacobi;
    cfg.max_iter = 50000;
    const SolveOutcome outcome = solve(grid, cfg);
    REQUIRE(outcome.report.converged);
    CHECK(outcome.report.iterations > 100);
    CHECK(max_abs_diff(outcome.grid, direct_solve(grid)) <= 5e-3);
  }
  SECTION("non-convergence is reported, not thrown") {
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{30, 1.0, 1.0});
    SolverConfig cfg;
    cfg.max_iter = 3;
    const SolveOutcome outcome = solve(grid, cfg);
    CHECK_FALSE(outcome.report.converged);
    CHECK(outcome.report.iterations == 3);
    CHECK(outcome.trace.records.size() == 3);
  }
  SECTION("converged runs satisfy the threshold and trace bookkeeping") {
    const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                          GridSpec{40, 1.0, 1.0});
    SolverConfig cfg;
    cfg.method = Method::sor;
    cfg.beta0 = 1.8;
    const SolveOutcome outcome = solve(grid, cfg);
    REQUIRE(outcome.report.converged);
    const double scale = std::max(1.0, grid.fixed_abs_max());
    CHECK(std::abs(outcome.report.final_epsilon) <= cfg.tol * scale);
    REQUIRE(outcome.trace.records.size() ==
            static_cast<std::size_t>(outcome.report.iterations));
    for (std::size_t r = 0; r < outcome.trace.records.size(); ++r) {
      REQUIRE(outcome.trace.records[r].k == static_cast<int>(r) + 1);
      REQUIRE(outcome.trace.records[r].beta == 1.8);
    }
  }
}

TEST_CASE("adaptive schedule stays within bounds and converges") {
  const PotentialGrid grid = build_grid(split_gate_layout(1.0, -3.0, 3.0),
                                        GridSpec{50, 1.0, 1.0});
  SolverConfig cfg;
  cfg.method = Method::adaptive_sor;
  const SolveOutcome outcome = solve(grid, cfg);
  REQUIRE(outcome.report.converged);
  bool varied = false;
  for (const auto& rec : outcome.trace.records) {
    REQUIRE(rec.beta >= cfg.beta_bounds.lo);
    REQUIRE(rec.beta <= cfg.beta_bounds.hi);
    varied = varied || rec.beta != cfg.beta0;
  }
  CHECK(varied);
  CHECK(outcome.trace.records.front().beta == cfg.beta0);
}

TEST_CASE("all methods agree with the direct oracle on random layouts") {
  std::mt19937 rng(2024);
  const std::vector<int> sizes{12, 20, 30};
  for (int trial = 0; trial < 4; ++trial) {
    const DeviceLayout layout = random_layout(rng, sizes);
    for (int n : sizes) {
      const PotentialGrid grid = build_grid(layout, GridSpec{n, 1.0, 1.0});
      const PotentialGrid exact = direct_solve(grid);
      const auto [lo, hi] = grid.fixed_value_range();
      for (Method m : {Method::jacobi, Method::gauss_seidel, Method::sor,
                       Method::adaptive_sor}) {
        SolverConfig cfg = tight_config(m);
        cfg.monitor = center_free_node(grid);
        const SolveOutcome outcome = solve(grid, cfg);
        REQUIRE(outcome.report.converged);
        REQUIRE(max_abs_diff(outcome.grid, exact) <= 1e-7);
        // discrete maximum principle at convergence
        for (int j = 0; j <= n; ++j)
          for (int i = 0; i <= n; ++i)
            if (!grid.is_fixed(i, j)) {
              REQUIRE(outcome.grid.value(i, j) >= lo - 1e-12);
              REQUIRE(outcome.grid.value(i, j) <= hi + 1e-12);
            }
      }
    }
  }
}

TEST_CASE("solution scales linearly with the electrode potentials") {
  const GridSpec spec{50, 1.0, 1.0};
  const double c = 2.0;
  DeviceLayout base = split_gate_layout(1.0, -3.0, 3.0);
  DeviceLayout scaled = base;
  for (auto& region : scaled.regions) region.potential *= c;

  SolverConfig cfg;  // sor defaults, tol 1e-4
  cfg.beta0 = 1.9;
  const SolveOutcome a = solve(build_grid(base, spec), cfg);
  const SolveOutcome b = solve(build_grid(scaled, spec), cfg);
  REQUIRE(a.report.converged);
  REQUIRE(b.report.converged);
  CHECK(a.report.iterations == b.report.iterations);
  double worst = 0.0;
  for (int j = 0; j <= spec.n; ++j)
    for (int i = 0; i <= spec.n; ++i)
      worst = std::max(worst, std::abs(c * a.grid.value(i, j) - b.grid.value(i, j)));
  CHECK(worst <= 1e-8);
}

TEST_CASE("superposition of single-electrode solutions") {
  const GridSpec spec{50, 1.0, 1.0};
  SolverConfig cfg = tight_config(Method::sor);
  cfg.tol = 1e-12;

  const SolveOutcome all = solve(build_grid(split_gate_layout(1.0, -3.0, 3.0), spec), cfg);
  const SolveOutcome s = solve(build_grid(split_gate_layout(1.0, 0.0, 0.0), spec), cfg);
  const SolveOutcome d = solve(build_grid(split_gate_layout(0.0, -3.0, 0.0), spec), cfg);
  const SolveOutcome g = solve(build_grid(split_gate_layout(0.0, 0.0, 3.0), spec), cfg);
  REQUIRE(all.report.converged);

  double worst = 0.0;
  for (int j = 0; j <= spec.n; ++j)
    for (int i = 0; i <= spec.n; ++i)
      worst = std::max(worst, std::abs(all.grid.value(i, j) - s.grid.value(i, j) -
                                       d.grid.value(i, j) - g.grid.value(i, j)));
  CHECK(worst <= 1e-7);
}

TEST_CASE("converged potentials mirror the layout symmetry") {
  const GridSpec spec{50, 1.0, 1.0};
  SolverConfig cfg;
  cfg.beta0 = 1.9;
  const SolveOutcome outcome = solve(build_grid(split_gate_layout(1.0, -3.0, 3.0), spec), cfg);
  REQUIRE(outcome.report.converged);
  double worst = 0.0;
  for (int j = 0; j <= spec.n; ++j)
    for (int i = 0; i <= spec.n; ++i)
      worst = std::max(worst,
                       std::abs(outcome.grid.value(i, j) - outcome.grid.value(i, spec.n - j)));
  CHECK(worst <= 10.0 * cfg.tol);
}

TEST_CASE("the stencil reproduces the bilinear harmonic exactly") {
  // V = xy lies in the null space of the discrete laplacian, so the solved
  // interior must match it to solver precision, not just O(h^2).
  const int n = 50;
  PotentialGrid grid(GridSpec{n, 1.0, 1.0});
  const double h = 1.0 / n;
  for (int t = 0; t <= n; ++t) {
    grid.fix(t, 0, 0.0);
    grid.fix(t, n, t * h);
    grid.fix(0, t, 0.0);
    grid.fix(n, t, t * h);
  }
  SolverConfig cfg = tight_config(Method::sor);
  cfg.tol = 1e-12;
  const SolveOutcome outcome = solve(grid, cfg);
  REQUIRE(outcome.report.converged);
  double worst = 0.0;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      worst = std::max(worst, std::abs(outcome.grid.value(i, j) - (i * h) * (j * h)));
  CHECK(worst <= 1e-8);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.beta0 = 2.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.beta_bounds = {1.6, 1.4};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.method = Method::sor;
  cfg.beta0 = 1.2;
  cfg.beta_bounds = {1.5, 1.9};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);  // beta0 outside bounds
}
