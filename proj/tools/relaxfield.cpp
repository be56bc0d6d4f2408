// relaxfield command-line front end: solve | field | bench | section.
//
// Exit codes: 0 success, 1 non-convergence (outputs are still written),
// 2 configuration error, 3 I/O error.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relaxfield/relaxfield.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relaxfield;

namespace {

// --set key=value: dotted path into the config tree; the value is parsed as
// JSON when possible and treated as a string otherwise, so
// --set solver.beta0=1.8 and --set output.dir=out both do what they look like.
void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set", "expects KEY=VALUE, got \"" + assignment + "\"");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  std::size_t begin = 0;
  std::vector<std::string> segments;
  while (begin <= path.size()) {
    const auto dot = path.find('.', begin);
    segments.push_back(path.substr(begin, dot == std::string::npos ? dot : dot - begin));
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
    const std::string& key = segments[s];
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (...) {
        throw ValidationError("--set", "array index expected in \"" + path + "\"");
      }
      if (idx >= node->size())
        throw ValidationError("--set", "array index out of range in \"" + path + "\"");
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) throw ValidationError("--set", "\"" + path + "\" crosses a scalar");
      node = &(*node)[key];
      if (node->is_null()) *node = json::object();
    }
  }
  const std::string& leaf = segments.back();
  if (node->is_array()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(leaf);
    } catch (...) {
      throw ValidationError("--set", "array index expected in \"" + path + "\"");
    }
    if (idx >= node->size())
      throw ValidationError("--set", "array index out of range in \"" + path + "\"");
    (*node)[idx] = value;
  } else {
    if (!node->is_object()) throw ValidationError("--set", "\"" + path + "\" crosses a scalar");
    (*node)[leaf] = value;
  }
}

json load_config_tree(const std::string& config_path, const std::vector<std::string>& sets,
                      const std::string& out_dir) {
  json root = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ValidationError("--config", "cannot open config file " + config_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
      root = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      throw SyntaxError(std::string(e.what()) + " in " + config_path, e.byte);
    }
  }
  for (const auto& assignment : sets) apply_override(root, assignment);
  if (!out_dir.empty()) root["output"]["dir"] = out_dir;
  return root;
}

RunConfig resolve_config(const json& tree) { return parse_config(tree.dump()); }

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.output.dir, ec);
  if (ec)
    throw WriteFailure("cannot create output directory " + cfg.output.dir + ": " + ec.message());
  return fs::path(cfg.output.dir) / name;
}

void print_report(const RunConfig& cfg, const SolveOutcome& outcome) {
  const auto& rep = outcome.report;
  const GridIndex monitor =
      cfg.solver.monitor.value_or(GridIndex{cfg.grid.n / 2, cfg.grid.n / 2});
  double beta_lo = rep.final_beta, beta_hi = rep.final_beta;
  for (const auto& rec : outcome.trace.records) {
    beta_lo = std::min(beta_lo, rec.beta);
    beta_hi = std::max(beta_hi, rec.beta);
  }
  std::printf("method:      %s\n", to_string(cfg.solver.method));
  std::printf("grid:        %d x %d nodes (n = %d)\n", cfg.grid.n + 1, cfg.grid.n + 1,
              cfg.grid.n);
  std::printf("iterations:  %d (%s)\n", rep.iterations,
              rep.converged ? "converged" : "NOT converged");
  std::printf("final eps:   %.6e V at monitor (%d,%d)\n", rep.final_epsilon, monitor.i,
              monitor.j);
  std::printf("monitor V:   %.7f V\n", outcome.grid.value(monitor.i, monitor.j));
  std::printf("beta:        final %.6f, range [%.6f, %.6f]\n", rep.final_beta, beta_lo, beta_hi);
  std::printf("wall time:   %.3f s\n", rep.wall_time);
}

int cmd_solve(const RunConfig& cfg) {
  const PotentialGrid grid = build_grid(cfg.layout, cfg.grid);
  const SolveOutcome outcome = solve(grid, cfg.solver);

  const fs::path grid_path = out_path(cfg, cfg.output.grid_csv);
  const fs::path trace_path = out_path(cfg, cfg.output.trace_csv);
  const std::size_t grid_bytes = export_grid_csv(outcome.grid, grid_path);
  const std::size_t trace_bytes = export_trace_csv(outcome.trace, trace_path);

  print_report(cfg, outcome);
  std::printf("wrote:       %s (%zu bytes), %s (%zu bytes)\n", grid_path.c_str(), grid_bytes,
              trace_path.c_str(), trace_bytes);
  return outcome.report.converged ? 0 : 1;
}

int cmd_field(const RunConfig& cfg, const std::string& method_flag,
              const std::string& from_grid) {
  FieldMethod method = cfg.field.method;
  if (!method_flag.empty()) method = parse_field_method(method_flag);

  std::optional<PotentialGrid> grid;
  bool converged = true;
  if (!from_grid.empty()) {
    grid = import_grid_csv(from_grid, cfg.grid.x_max, cfg.grid.y_max);
  } else {
    const SolveOutcome outcome = solve(build_grid(cfg.layout, cfg.grid), cfg.solver);
    converged = outcome.report.converged;
    std::printf("solve:       %d iterations (%s)\n", outcome.report.iterations,
                converged ? "converged" : "NOT converged");
    grid = outcome.grid;
  }

  FieldGrid field(grid->spec());
  switch (method) {
    case FieldMethod::midpoint:
      field = field_midpoint(*grid);
      break;
    case FieldMethod::poly_equidistant:
      field = field_polynomial(*grid, NodeScheme::equidistant, cfg.field.nodes_per_line);
      break;
    case FieldMethod::poly_chebyshev: {
      const auto nodes = chebyshev_nodes(grid->n(), cfg.field.nodes_per_line);
      std::string list;
      for (int idx : nodes) list += (list.empty() ? "" : " ") + std::to_string(idx);
      std::printf("chebyshev nodes (m=%d): %s\n", cfg.field.nodes_per_line, list.c_str());
      field = field_polynomial(*grid, NodeScheme::chebyshev, cfg.field.nodes_per_line);
      break;
    }
  }

  const fs::path field_path = out_path(cfg, cfg.output.field_csv);
  const std::size_t bytes = export_field_csv(field, field_path);
  std::printf("method:      %s\n", to_string(method));
  std::printf("wrote:       %s (%zu bytes)\n", field_path.c_str(), bytes);
  return converged ? 0 : 1;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

int bench_threads() {
  const char* env = std::getenv("RELAXFIELD_THREADS");
  if (!env) return 1;
  const long parsed = std::strtol(env, nullptr, 10);
  return parsed >= 1 ? static_cast<int>(parsed) : 1;
}

int cmd_bench(const RunConfig& cfg, const std::string& methods_flag,
              const std::string& betas_flag, const std::string& sizes_flag) {
  std::vector<Method> methods;
  for (const auto& name : split_list(methods_flag)) methods.push_back(parse_method(name));
  std::vector<double> betas;
  for (const auto& text : split_list(betas_flag)) betas.push_back(std::stod(text));
  std::vector<int> sizes;
  for (const auto& text : split_list(sizes_flag)) sizes.push_back(std::stoi(text));
  if (sizes.empty()) sizes.push_back(cfg.grid.n);

  struct Cell {
    Method method;
    int n;
    double beta;
    SolverConfig solver;
  };
  std::vector<Cell> cells;
  for (Method method : methods) {
    for (int n : sizes) {
      for (double beta : betas) {
        SolverConfig solver = cfg.solver;
        solver.method = method;
        solver.beta0 = beta;
        if (n != cfg.grid.n) solver.monitor.reset();  // re-center on resized grids
        GridSpec probe{n, cfg.grid.x_max, cfg.grid.y_max};
        probe.validate();
        solver.validate();
        cells.push_back({method, n, beta, solver});
      }
    }
  }

  std::vector<BenchResult> results(cells.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = cursor.fetch_add(1);
      if (c >= cells.size()) return;
      try {
        const Cell& cell = cells[c];
        const GridSpec spec{cell.n, cfg.grid.x_max, cfg.grid.y_max};
        const SolveOutcome outcome = solve(build_grid(cfg.layout, spec), cell.solver);
        results[c] = {cell.method,
                      cell.n,
                      cell.beta,
                      outcome.report.iterations,
                      outcome.report.converged,
                      outcome.report.wall_time,
                      residual_norm(outcome.grid)};
      } catch (...) {
        std::scoped_lock lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::min<int>(bench_threads(), static_cast<int>(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const fs::path bench_path = out_path(cfg, cfg.output.bench_csv);
  const std::size_t bytes = export_bench_csv(results, bench_path);

  std::printf("%-13s %6s %6s %10s %10s %10s %14s\n", "method", "n", "beta", "iters", "converged",
              "time_s", "residual");
  bool all_converged = true;
  for (const auto& r : results) {
    std::printf("%-13s %6d %6.3f %10d %10s %10.3f %14.3e\n", to_string(r.method), r.n, r.beta,
                r.iterations, r.converged ? "yes" : "no", r.wall_time, r.final_residual);
    all_converged = all_converged && r.converged;
  }
  std::printf("wrote:       %s (%zu bytes)\n", bench_path.c_str(), bytes);
  return all_converged ? 0 : 1;
}

int cmd_section(const RunConfig& cfg, const std::string& axis_flag, int index,
                const std::string& from_grid) {
  const Axis axis = parse_axis(axis_flag);

  std::optional<PotentialGrid> grid;
  bool converged = true;
  if (!from_grid.empty()) {
    grid = import_grid_csv(from_grid, cfg.grid.x_max, cfg.grid.y_max);
  } else {
    const SolveOutcome outcome = solve(build_grid(cfg.layout, cfg.grid), cfg.solver);
    converged = outcome.report.converged;
    grid = outcome.grid;
  }

  const std::vector<double> line = extract_section(*grid, axis, index);
  const std::string text = cfg.output.section_format == SectionFormat::flat
                               ? format_section_flat(line)
                               : format_section_csv(line);
  std::fwrite(text.data(), 1, text.size(), stdout);
  return converged ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D electrostatic potential and field solver for multi-electrode layouts"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
  app.add_option("--set", sets, "override a config key, e.g. --set solver.beta0=1.8")
      ->take_all();
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");

  CLI::App* solve_cmd =
      app.add_subcommand("solve", "relax the potential grid; write grid and trace CSVs");
  solve_cmd->fallthrough();

  CLI::App* field_cmd =
      app.add_subcommand("field", "extract the electric field; write field CSV");
  field_cmd->fallthrough();
  std::string field_method;
  std::string field_from_grid;
  field_cmd->add_option("--method", field_method,
                        "midpoint | poly-equidistant | poly-chebyshev");
  field_cmd->add_option("--from-grid", field_from_grid, "reuse a previously exported grid CSV");

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "run a method/beta/size cross-product; write results CSV");
  bench_cmd->fallthrough();
  std::string bench_methods = "jacobi,gauss_seidel,sor";
  std::string bench_betas = "1.5,1.7,1.9";
  std::string bench_sizes;
  bench_cmd->add_option("--methods", bench_methods, "comma-separated method list");
  bench_cmd->add_option("--betas", bench_betas, "comma-separated relaxation factors");
  bench_cmd->add_option("--sizes", bench_sizes, "comma-separated grid sizes (default: config n)");

  CLI::App* section_cmd =
      app.add_subcommand("section", "print one grid line of potentials (flat list)");
  section_cmd->fallthrough();
  std::string section_axis = "column";
  int section_index = 0;
  std::string section_from_grid;
  section_cmd->add_option("--axis", section_axis, "row | column (default column)");
  section_cmd->add_option("--index", section_index, "fixed index of the section")->required();
  section_cmd->add_option("--from-grid", section_from_grid,
                          "reuse a previously exported grid CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const RunConfig cfg = resolve_config(load_config_tree(config_path, sets, out_dir));
    if (solve_cmd->parsed()) return cmd_solve(cfg);
    if (field_cmd->parsed()) return cmd_field(cfg, field_method, field_from_grid);
    if (bench_cmd->parsed()) return cmd_bench(cfg, bench_methods, bench_betas, bench_sizes);
    if (section_cmd->parsed()) return cmd_section(cfg, section_axis, section_index,
                                                  section_from_grid);
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
