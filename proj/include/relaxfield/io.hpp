#pragma once
// Configuration parsing/serialization (strict JSON) and the CSV export
// formats for grids, fields, traces, and benchmark results.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relaxfield/error.hpp"
#include "relaxfield/field.hpp"
#include "relaxfield/grid.hpp"
#include "relaxfield/solver.hpp"

namespace relaxfield {

enum class FieldMethod { midpoint, poly_equidistant, poly_chebyshev };

inline const char* to_string(FieldMethod m) {
  switch (m) {
    case FieldMethod::midpoint: return "midpoint";
    case FieldMethod::poly_equidistant: return "poly-equidistant";
    case FieldMethod::poly_chebyshev: return "poly-chebyshev";
  }
  return "?";
}

inline FieldMethod parse_field_method(std::string_view text) {
  if (text == "midpoint") return FieldMethod::midpoint;
  if (text == "poly-equidistant") return FieldMethod::poly_equidistant;
  if (text == "poly-chebyshev") return FieldMethod::poly_chebyshev;
  throw ValidationError("field.method",
                        "must be one of midpoint|poly-equidistant|poly-chebyshev");
}

enum class SectionFormat { flat, csv };

inline const char* to_string(SectionFormat f) {
  return f == SectionFormat::flat ? "flat" : "csv";
}

inline SectionFormat parse_section_format(std::string_view text) {
  if (text == "flat") return SectionFormat::flat;
  if (text == "csv") return SectionFormat::csv;
  throw ValidationError("output.section_format", "must be flat|csv");
}

struct FieldConfig {
  FieldMethod method = FieldMethod::midpoint;
  int nodes_per_line = 15;  ///< power-basis interpolation degrades beyond ~15
  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

struct OutputConfig {
  std::string dir = ".";
  std::string grid_csv = "grid.csv";
  std::string field_csv = "field.csv";
  std::string trace_csv = "trace.csv";
  std::string bench_csv = "bench.csv";
  SectionFormat section_format = SectionFormat::flat;
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

/// Everything one run needs; parse_config fills defaults for omitted keys.
struct RunConfig {
  GridSpec grid{};
  DeviceLayout layout = split_gate_layout();
  SolverConfig solver{};
  FieldConfig field{};
  OutputConfig output{};

  void validate() const {
    grid.validate();
    for (const auto& region : layout.regions) region.validate();
    solver.validate();
    if (solver.monitor) {
      if (solver.monitor->i < 0 || solver.monitor->i > grid.n || solver.monitor->j < 0 ||
          solver.monitor->j > grid.n)
        throw ValidationError("solver.monitor", "must lie within [0, n]^2");
    }
    if (field.nodes_per_line < 2 || field.nodes_per_line > grid.n + 1)
      throw ValidationError("field.nodes_per_line", "must satisfy 2 <= m <= n+1");
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

using json = nlohmann::json;

inline void require_known_keys(const json& obj, const std::string& path,
                               std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw UnknownKey("unknown key \"" + path + item.key() + "\"");
  }
}

inline const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double get_number(const json& obj, const std::string& path, const char* key,
                         double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ValidationError(path + key, "must be a number");
  return v->get<double>();
}

inline int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ValidationError(path + key, "must be an integer");
  return v->get<int>();
}

inline bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ValidationError(path + key, "must be a boolean");
  return v->get<bool>();
}

inline std::string get_string(const json& obj, const std::string& path, const char* key,
                              const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ValidationError(path + key, "must be a string");
  return v->get<std::string>();
}

inline const json& get_object(const json& root, const char* key) {
  static const json empty = json::object();
  const json* v = find(root, key);
  if (!v) return empty;
  if (!v->is_object()) throw ValidationError(key, "must be an object");
  return *v;
}

}  // namespace detail

/// Parses and validates a config document. Strict: unknown keys are fatal.
/// Omitted keys take the documented defaults; with an empty document the
/// result is the bundled split-gate setup on a 200-grid solved by SOR at
/// beta = 1.9 with a 1e-4 precision goal.
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.what(), e.byte);
  }
  if (!root.is_object()) throw ValidationError("config", "top level must be an object");
  detail::require_known_keys(root, "", {"grid", "layout", "solver", "field", "output"});

  RunConfig cfg;

  const json& grid = detail::get_object(root, "grid");
  detail::require_known_keys(grid, "grid.", {"n", "x_max", "y_max"});
  cfg.grid.n = detail::get_int(grid, "grid.", "n", 200);
  cfg.grid.x_max = detail::get_number(grid, "grid.", "x_max", 1.0);
  cfg.grid.y_max = detail::get_number(grid, "grid.", "y_max", 1.0);
  cfg.grid.validate();

  const json& layout = detail::get_object(root, "layout");
  detail::require_known_keys(layout, "layout.", {"shield_grounded", "potentials", "regions"});
  cfg.layout.shield_grounded = detail::get_bool(layout, "layout.", "shield_grounded", true);

  double v_source = 1.0, v_drain = -3.0, v_gate = 3.0;
  if (const json* pots = detail::find(layout, "potentials")) {
    if (!pots->is_object()) throw ValidationError("layout.potentials", "must be an object");
    detail::require_known_keys(*pots, "layout.potentials.", {"source", "drain", "gate"});
    v_source = detail::get_number(*pots, "layout.potentials.", "source", v_source);
    v_drain = detail::get_number(*pots, "layout.potentials.", "drain", v_drain);
    v_gate = detail::get_number(*pots, "layout.potentials.", "gate", v_gate);
  }

  if (const json* regions = detail::find(layout, "regions")) {
    if (!regions->is_array()) throw ValidationError("layout.regions", "must be an array");
    cfg.layout.regions.clear();
    int index = 0;
    for (const json& entry : *regions) {
      const std::string path = "layout.regions[" + std::to_string(index++) + "].";
      if (!entry.is_object()) throw ValidationError(path, "must be an object");
      detail::require_known_keys(entry, path, {"role", "rect", "potential"});

      ElectrodeRegion region;
      region.role = parse_electrode_role(detail::get_string(entry, path, "role", ""));
      const detail::json* rect = detail::find(entry, "rect");
      if (!rect || !rect->is_array() || rect->size() != 4)
        throw ValidationError(path + "rect", "must be an array [x0, y0, x1, y1]");
      for (const auto& c : *rect)
        if (!c.is_number()) throw ValidationError(path + "rect", "entries must be numbers");
      region.rect = {(*rect)[0].get<double>(), (*rect)[1].get<double>(),
                     (*rect)[2].get<double>(), (*rect)[3].get<double>()};

      double fallback = 0.0;  // shield regions sit at ground
      if (region.role == ElectrodeRole::source) fallback = v_source;
      if (region.role == ElectrodeRole::drain) fallback = v_drain;
      if (region.role == ElectrodeRole::gate) fallback = v_gate;
      region.potential = detail::get_number(entry, path, "potential", fallback);
      region.validate();
      cfg.layout.regions.push_back(region);
    }
  } else {
    cfg.layout = split_gate_layout(v_source, v_drain, v_gate);
    cfg.layout.shield_grounded = detail::get_bool(layout, "layout.", "shield_grounded", true);
  }

  const json& solver = detail::get_object(root, "solver");
  detail::require_known_keys(solver, "solver.",
                             {"method", "beta0", "adaptive_gain", "beta_min", "beta_max", "tol",
                              "max_iter", "monitor", "record_residual"});
  cfg.solver.method = parse_method(detail::get_string(solver, "solver.", "method", "sor"));
  const double beta0_default = cfg.solver.method == Method::adaptive_sor ? 1.5 : 1.9;
  cfg.solver.beta0 = detail::get_number(solver, "solver.", "beta0", beta0_default);
  cfg.solver.adaptive_gain = detail::get_number(solver, "solver.", "adaptive_gain", 100.0);
  cfg.solver.beta_bounds.lo = detail::get_number(solver, "solver.", "beta_min", 1.0);
  cfg.solver.beta_bounds.hi = detail::get_number(solver, "solver.", "beta_max", 1.99);
  cfg.solver.tol = detail::get_number(solver, "solver.", "tol", 1e-4);
  cfg.solver.max_iter = detail::get_int(solver, "solver.", "max_iter", 10000);
  cfg.solver.record_residual = detail::get_bool(solver, "solver.", "record_residual", true);
  if (const json* monitor = detail::find(solver, "monitor")) {
    if (!monitor->is_array() || monitor->size() != 2 || !(*monitor)[0].is_number_integer() ||
        !(*monitor)[1].is_number_integer())
      throw ValidationError("solver.monitor", "must be an array [i, j] of integers");
    cfg.solver.monitor = GridIndex{(*monitor)[0].get<int>(), (*monitor)[1].get<int>()};
  } else {
    cfg.solver.monitor = GridIndex{cfg.grid.n / 2, cfg.grid.n / 2};
  }
  if (!(cfg.solver.beta0 >= 1.0 && cfg.solver.beta0 < 2.0))
    throw ValidationError("solver.beta0", "must lie in [1, 2)");

  const json& field = detail::get_object(root, "field");
  detail::require_known_keys(field, "field.", {"method", "nodes_per_line"});
  cfg.field.method = parse_field_method(detail::get_string(field, "field.", "method", "midpoint"));
  cfg.field.nodes_per_line = detail::get_int(field, "field.", "nodes_per_line", 15);

  const json& output = detail::get_object(root, "output");
  detail::require_known_keys(
      output, "output.",
      {"dir", "grid_csv", "field_csv", "trace_csv", "bench_csv", "section_format"});
  cfg.output.dir = detail::get_string(output, "output.", "dir", ".");
  cfg.output.grid_csv = detail::get_string(output, "output.", "grid_csv", "grid.csv");
  cfg.output.field_csv = detail::get_string(output, "output.", "field_csv", "field.csv");
  cfg.output.trace_csv = detail::get_string(output, "output.", "trace_csv", "trace.csv");
  cfg.output.bench_csv = detail::get_string(output, "output.", "bench_csv", "bench.csv");
  cfg.output.section_format =
      parse_section_format(detail::get_string(output, "output.", "section_format", "flat"));

  cfg.validate();
  return cfg;
}

/// Serializes a config so that parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig& cfg) {
  nlohmann::ordered_json root;
  root["grid"] = {{"n", cfg.grid.n}, {"x_max", cfg.grid.x_max}, {"y_max", cfg.grid.y_max}};

  nlohmann::ordered_json regions = nlohmann::ordered_json::array();
  for (const auto& region : cfg.layout.regions) {
    regions.push_back({{"role", to_string(region.role)},
                       {"rect", {region.rect.x0, region.rect.y0, region.rect.x1, region.rect.y1}},
                       {"potential", region.potential}});
  }
  root["layout"] = {{"shield_grounded", cfg.layout.shield_grounded}, {"regions", regions}};

  nlohmann::ordered_json solver = {{"method", to_string(cfg.solver.method)},
                                   {"beta0", cfg.solver.beta0},
                                   {"adaptive_gain", cfg.solver.adaptive_gain},
                                   {"beta_min", cfg.solver.beta_bounds.lo},
                                   {"beta_max", cfg.solver.beta_bounds.hi},
                                   {"tol", cfg.solver.tol},
                                   {"max_iter", cfg.solver.max_iter},
                                   {"record_residual", cfg.solver.record_residual}};
  const GridIndex monitor =
      cfg.solver.monitor.value_or(GridIndex{cfg.grid.n / 2, cfg.grid.n / 2});
  solver["monitor"] = {monitor.i, monitor.j};
  root["solver"] = solver;

  root["field"] = {{"method", to_string(cfg.field.method)},
                   {"nodes_per_line", cfg.field.nodes_per_line}};
  root["output"] = {{"dir", cfg.output.dir},
                    {"grid_csv", cfg.output.grid_csv},
                    {"field_csv", cfg.output.field_csv},
                    {"trace_csv", cfg.output.trace_csv},
                    {"bench_csv", cfg.output.bench_csv},
                    {"section_format", to_string(cfg.output.section_format)}};
  return root.dump(2) + "\n";
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReadFailure("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

namespace detail {

inline std::size_t write_all(std::ostream& os, const std::string& text) {
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw WriteFailure("stream write failed");
  return text.size();
}

template <typename WriteFn>
std::size_t write_file(const std::filesystem::path& path, WriteFn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw WriteFailure("cannot open " + path.string() + " for writing");
  const std::size_t bytes = fn(os);
  os.flush();
  if (!os) throw WriteFailure("write to " + path.string() + " failed");
  return bytes;
}

inline void append_formatted(std::string& out, const char* fmt, auto... args) {
  char buf[160];
  const int len = std::snprintf(buf, sizeof buf, fmt, args...);
  out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace detail

/// CSV rows "i,j,v" in row-major order (j outer, i inner), 6-decimal fixed
/// notation. Returns bytes written; byte-identical for identical grids.
inline std::size_t export_grid_csv(const PotentialGrid& grid, std::ostream& os) {
  std::string out = "i,j,v\n";
  const int n = grid.n();
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      detail::append_formatted(out, "%d,%d,%.6f\n", i, j, grid.value(i, j));
  return detail::write_all(os, out);
}

inline std::size_t export_grid_csv(const PotentialGrid& grid, const std::filesystem::path& path) {
  return detail::write_file(path, [&](std::ostream& os) { return export_grid_csv(grid, os); });
}

/// CSV rows "i,j,ex,ey", same ordering and precision as the grid export.
inline std::size_t export_field_csv(const FieldGrid& field, std::ostream& os) {
  std::string out = "i,j,ex,ey\n";
  const int n = field.spec.n;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      detail::append_formatted(out, "%d,%d,%.6f,%.6f\n", i, j, field.ex_at(i, j),
                               field.ey_at(i, j));
  return detail::write_all(os, out);
}

inline std::size_t export_field_csv(const FieldGrid& field, const std::filesystem::path& path) {
  return detail::write_file(path, [&](std::ostream& os) { return export_field_csv(field, os); });
}

/// CSV rows "k,epsilon,beta,residual"; epsilon/residual in scientific
/// notation since they span many decades.
inline std::size_t export_trace_csv(const ConvergenceTrace& trace, std::ostream& os) {
  std::string out = "k,epsilon,beta,residual\n";
  for (const auto& rec : trace.records) {
    if (rec.residual)
      detail::append_formatted(out, "%d,%.6e,%.6f,%.6e\n", rec.k, rec.epsilon, rec.beta,
                               *rec.residual);
    else
      detail::append_formatted(out, "%d,%.6e,%.6f,nan\n", rec.k, rec.epsilon, rec.beta);
  }
  return detail::write_all(os, out);
}

inline std::size_t export_trace_csv(const ConvergenceTrace& trace,
                                    const std::filesystem::path& path) {
  return detail::write_file(path, [&](std::ostream& os) { return export_trace_csv(trace, os); });
}

/// One benchmark cell: a (method, n, beta) run on the configured layout.
struct BenchResult {
  Method method = Method::sor;
  int n = 0;
  double beta = 0.0;
  int iterations = 0;
  bool converged = false;
  double wall_time = 0.0;
  double final_residual = 0.0;
};

inline std::size_t export_bench_csv(std::span<const BenchResult> results, std::ostream& os) {
  std::string out = "method,n,beta,iterations,converged,wall_time,final_residual\n";
  for (const auto& r : results)
    detail::append_formatted(out, "%s,%d,%.6f,%d,%s,%.6f,%.6e\n", to_string(r.method), r.n,
                             r.beta, r.iterations, r.converged ? "true" : "false", r.wall_time,
                             r.final_residual);
  return detail::write_all(os, out);
}

inline std::size_t export_bench_csv(std::span<const BenchResult> results,
                                    const std::filesystem::path& path) {
  return detail::write_file(path,
                            [&](std::ostream& os) { return export_bench_csv(results, os); });
}

enum class Axis { row, column };

inline Axis parse_axis(std::string_view text) {
  if (text == "row") return Axis::row;
  if (text == "column") return Axis::column;
  throw ValidationError("axis", "must be row|column");
}

/// Full line of n+1 potentials along the fixed index, ascending in the free
/// coordinate. axis=row fixes j, axis=column fixes i.
inline std::vector<double> extract_section(const PotentialGrid& grid, Axis axis, int index) {
  const int n = grid.n();
  if (index < 0 || index > n)
    throw IndexOutOfRange("section index " + std::to_string(index) + " outside [0, " +
                          std::to_string(n) + "]");
  std::vector<double> line(static_cast<std::size_t>(n) + 1);
  for (int t = 0; t <= n; ++t)
    line[t] = axis == Axis::row ? grid.value(t, index) : grid.value(index, t);
  return line;
}

/// Newline-separated decimal list, one value per line.
inline std::string format_section_flat(std::span<const double> values) {
  std::string out;
  for (double v : values) detail::append_formatted(out, "%.6f\n", v);
  return out;
}

inline std::string format_section_csv(std::span<const double> values) {
  std::string out = "index,v\n";
  for (std::size_t t = 0; t < values.size(); ++t)
    detail::append_formatted(out, "%zu,%.6f\n", t, values[t]);
  return out;
}

/// Reads a grid CSV back into an all-free grid (the mask is not part of the
/// format). n is inferred from the largest index; every node must appear
/// exactly once.
inline PotentialGrid import_grid_csv(std::istream& is, double x_max = 1.0, double y_max = 1.0) {
  std::string header;
  if (!std::getline(is, header) || header != "i,j,v")
    throw ReadFailure("grid CSV must start with header \"i,j,v\"");

  struct Cell {
    int i, j;
    double v;
  };
  std::vector<Cell> cells;
  int n = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Cell cell{};
    char trailing;
    if (std::sscanf(line.c_str(), "%d,%d,%lf%c", &cell.i, &cell.j, &cell.v, &trailing) != 3)
      throw ReadFailure("malformed grid CSV row: " + line);
    if (cell.i < 0 || cell.j < 0) throw ReadFailure("negative index in grid CSV");
    n = std::max({n, cell.i, cell.j});
    cells.push_back(cell);
  }
  if (n < 2) throw ReadFailure("grid CSV smaller than the minimum 3x3 grid");
  if (cells.size() != static_cast<std::size_t>(n + 1) * (n + 1))
    throw ReadFailure("grid CSV does not cover the full (n+1)^2 lattice");

  PotentialGrid grid(GridSpec{n, x_max, y_max});
  std::vector<char> seen(grid.node_count(), 0);
  for (const Cell& cell : cells) {
    if (cell.i > n || cell.j > n) throw ReadFailure("index outside inferred grid");
    const std::size_t at = grid.index(cell.i, cell.j);
    if (seen[at]) throw ReadFailure("duplicate node in grid CSV");
    seen[at] = 1;
    grid.set_value(cell.i, cell.j, cell.v);
  }
  return grid;
}

inline PotentialGrid import_grid_csv(const std::filesystem::path& path, double x_max = 1.0,
                                     double y_max = 1.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ReadFailure("cannot open grid CSV " + path.string());
  return import_grid_csv(is, x_max, y_max);
}

}  // namespace relaxfield
