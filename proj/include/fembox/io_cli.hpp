// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_IO_CLI_HPP
#define FEMBOX_IO_CLI_HPP

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "fembox/adapt.hpp"
#include "fembox/common.hpp"
#include "fembox/fespace.hpp"
#include "fembox/mesh.hpp"

namespace fembox {

using ParamValue =
    std::variant<bool, int, double, std::string, std::vector<int>, std::vector<double>>;

struct ParsedValues {
  std::map<std::string, ParamValue> values;

  template <class T>
  const T& get(const std::string& key) const {
    const auto it = values.find(key);
    FEMBOX_REQUIRE(it != values.end(), "ParsedValues: unknown key ", key);
    const T* p = std::get_if<T>(&it->second);
    FEMBOX_REQUIRE(p != nullptr, "ParsedValues: wrong type requested for key ", key);
    return *p;
  }
};

/// Command-line parameter registry: each entry couples a dictionary key with
/// a flag name, a default, a help text and optional admissible choices.
/// `--help` and the print-values flag are built in.
class ParameterRegistry {
 public:
  static constexpr const char* kPrintValuesKey = "PRINT_VALUES";

  ParameterRegistry() {
    Entry e;
    e.key = kPrintValuesKey;
    e.flag = "--PRINT_VALUES";
    e.help = "print the final key/value table after parsing";
    e.value = false;
    entries_.push_back(std::move(e));
  }

  void add_flag(const std::string& key, const std::string& flag, const std::string& help) {
    push(key, flag, help, ParamValue{false}, {});
  }
  void add_int(const std::string& key, const std::string& flag, int def,
               const std::string& help) {
    push(key, flag, help, ParamValue{def}, {});
  }
  void add_real(const std::string& key, const std::string& flag, double def,
                const std::string& help) {
    push(key, flag, help, ParamValue{def}, {});
  }
  void add_string(const std::string& key, const std::string& flag, std::string def,
                  const std::string& help, std::vector<std::string> choices = {}) {
    push(key, flag, help, ParamValue{std::move(def)}, std::move(choices));
  }
  void add_int_vector(const std::string& key, const std::string& flag, std::vector<int> def,
                      const std::string& help) {
    push(key, flag, help, ParamValue{std::move(def)}, {});
  }
  void add_real_vector(const std::string& key, const std::string& flag, std::vector<double> def,
                       const std::string& help) {
    push(key, flag, help, ParamValue{std::move(def)}, {});
  }

  enum class Status { ok, help, error };

  struct ParseResult {
    Status status = Status::ok;
    std::string message;  // help text or error message
    ParsedValues values;
  };

  /// Parses flags (argv without the program name). Flag values override the
  /// registered defaults; unknown flags and out-of-choice values fail.
  ParseResult parse(const std::vector<std::string>& args) const {
    CLI::App app{"fembox"};
    struct Slot {
      bool b = false;
      int i = 0;
      double d = 0.0;
      std::string s;
      std::vector<int> vi;
      std::vector<double> vd;
    };
    std::vector<Slot> slots(entries_.size());
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Entry& e = entries_[k];
      Slot& s = slots[k];
      std::visit(
          [&](const auto& def) {
            using T = std::decay_t<decltype(def)>;
            if constexpr (std::is_same_v<T, bool>) {
              s.b = def;
              app.add_flag(e.flag, s.b, e.help);
            } else if constexpr (std::is_same_v<T, int>) {
              s.i = def;
              app.add_option(e.flag, s.i, e.help)->capture_default_str();
            } else if constexpr (std::is_same_v<T, double>) {
              s.d = def;
              app.add_option(e.flag, s.d, e.help)->capture_default_str();
            } else if constexpr (std::is_same_v<T, std::string>) {
              s.s = def;
              auto* opt = app.add_option(e.flag, s.s, e.help)->capture_default_str();
              if (!e.choices.empty()) opt->check(CLI::IsMember(e.choices));
            } else if constexpr (std::is_same_v<T, std::vector<int>>) {
              s.vi = def;
              app.add_option(e.flag, s.vi, e.help)->expected(1, 3);
            } else {
              s.vd = def;
              app.add_option(e.flag, s.vd, e.help)->expected(1, 3);
            }
          },
          e.value);
    }
    // CLI11 wants the arguments reversed
    std::vector<std::string> rev(args.rbegin(), args.rend());
    ParseResult result;
    try {
      app.parse(rev);
    } catch (const CLI::CallForHelp&) {
      result.status = Status::help;
      result.message = app.help();
      return result;
    } catch (const CLI::ParseError& e) {
      result.status = Status::error;
      result.message = e.what();
      return result;
    }
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Entry& e = entries_[k];
      const Slot& s = slots[k];
      std::visit(
          [&](const auto& def) {
            using T = std::decay_t<decltype(def)>;
            if constexpr (std::is_same_v<T, bool>)
              result.values.values[e.key] = s.b;
            else if constexpr (std::is_same_v<T, int>)
              result.values.values[e.key] = s.i;
            else if constexpr (std::is_same_v<T, double>)
              result.values.values[e.key] = s.d;
            else if constexpr (std::is_same_v<T, std::string>)
              result.values.values[e.key] = s.s;
            else if constexpr (std::is_same_v<T, std::vector<int>>)
              result.values.values[e.key] = s.vi;
            else
              result.values.values[e.key] = s.vd;
          },
          e.value);
    }
    return result;
  }

  /// Key/value table of the parsed values, in registration order.
  std::string print_values(const ParsedValues& values) const {
    std::ostringstream os;
    os.precision(17);
    for (const Entry& e : entries_) {
      os << e.key << " = ";
      const auto it = values.values.find(e.key);
      FEMBOX_REQUIRE(it != values.values.end(), "print_values: key ", e.key, " was not parsed");
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
              os << (v ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::vector<int>> ||
                                 std::is_same_v<T, std::vector<double>>) {
              for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
            } else {
              os << v;
            }
          },
          it->second);
      os << "\n";
    }
    return os.str();
  }

  /// Flag sequence reproducing the given values (parse(to_args(v)) == v).
  std::vector<std::string> to_args(const ParsedValues& values) const {
    std::vector<std::string> args;
    for (const Entry& e : entries_) {
      const auto it = values.values.find(e.key);
      FEMBOX_REQUIRE(it != values.values.end(), "to_args: key ", e.key, " missing");
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
              if (v) args.push_back(e.flag);
            } else if constexpr (std::is_same_v<T, std::vector<int>> ||
                                 std::is_same_v<T, std::vector<double>>) {
              args.push_back(e.flag);
              for (const auto& x : v) args.push_back(scalar_to_string(x));
            } else {
              args.push_back(e.flag);
              args.push_back(scalar_to_string(v));
            }
          },
          it->second);
    }
    return args;
  }

 private:
  struct Entry {
    std::string key;
    std::string flag;
    std::string help;
    ParamValue value;  // default
    std::vector<std::string> choices;
  };

  template <class T>
  static std::string scalar_to_string(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    }
  }

  void push(const std::string& key, const std::string& flag, const std::string& help,
            ParamValue def, std::vector<std::string> choices) {
    for (const Entry& e : entries_) {
      FEMBOX_REQUIRE(e.key != key, "ParameterRegistry: duplicate key ", key);
      FEMBOX_REQUIRE(e.flag != flag, "ParameterRegistry: duplicate flag ", flag);
    }
    Entry e;
    e.key = key;
    e.flag = flag;
    e.help = help;
    e.value = std::move(def);
    e.choices = std::move(choices);
    entries_.push_back(std::move(e));
  }

  std::vector<Entry> entries_;
};

inline ParameterRegistry::ParseResult parse_parameters(const ParameterRegistry& registry,
                                                       const std::vector<std::string>& args) {
  return registry.parse(args);
}

// ---------------------------------------------------------------------------
// VTK output (legacy ASCII, unstructured grid)
// ---------------------------------------------------------------------------

struct VtkFields {
  const FeFunction* point_field = nullptr;  // written as POINT_DATA "u_h"
  std::string point_name = "u_h";
  std::vector<std::pair<std::string, std::vector<double>>> cell_fields;
};

namespace detail {

/// Lattice node index of the cell corner with the given per-axis hi/lo bits.
inline int corner_node(const ReferenceElement& elem, int cx, int cy, int cz) {
  const int q = elem.order();
  const int bits[3] = {cx, cy, cz};
  int idx = 0, mul = 1;
  for (int a = 0; a < elem.dim(); ++a) {
    idx += (bits[a] ? q : 0) * mul;
    mul *= q + 1;
  }
  return idx;
}

inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    FEMBOX_REQUIRE(out.good(), "write: cannot open ", tmp);
    out << content;
    FEMBOX_REQUIRE(out.good(), "write: failed writing ", tmp);
  }
  FEMBOX_REQUIRE(std::rename(tmp.c_str(), path.c_str()) == 0, "write: cannot rename to ", path);
}

}  // namespace detail

/// Writes the mesh, the solution as point data, and named cell data arrays as
/// a legacy ASCII VTK 3.0 unstructured grid. CG solutions share one point per
/// mesh vertex; DG solutions duplicate the corner points per cell so that the
/// discontinuities are visible.
inline void write_vtk(const ForestMesh& mesh, const VtkFields& fields, const std::string& path) {
  for (const auto& [name, data] : fields.cell_fields)
    FEMBOX_REQUIRE(static_cast<int>(data.size()) == mesh.num_cells(),
                   "write_vtk: cell field ", name, " does not match the mesh");
  const int d = mesh.dim();
  const int ncorners = 1 << d;
  const bool duplicate =
      fields.point_field != nullptr && fields.point_field->space->conformity() == Conformity::DG;

  std::ostringstream os;
  os.precision(12);
  os << "# vtk DataFile Version 3.0\n";
  os << "fembox\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";

  // VTK corner order: counterclockwise bottom loop, then (3D) top loop
  const int vtk_corners_2d[4][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const int vtk_corners_3d[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

  std::vector<std::array<double, 3>> points;
  std::vector<int> connectivity;  // ncorners per cell, VTK order
  std::vector<double> point_values;

  if (duplicate) {
    const FeFunction& u = *fields.point_field;
    const ReferenceElement& elem = u.space->element();
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const CellMap map = mesh.cell_map(c);
      for (int k = 0; k < ncorners; ++k) {
        const int* bits = d == 2 ? vtk_corners_2d[k] : vtk_corners_3d[k];
        Point xi{bits[0] * 2.0 - 1.0, bits[1] * 2.0 - 1.0, d == 3 ? bits[2] * 2.0 - 1.0 : 0.0};
        const Point x = map.to_physical(xi);
        points.push_back({x[0], x[1], x[2]});
        connectivity.push_back(static_cast<int>(points.size()) - 1);
        const int node = detail::corner_node(elem, bits[0], bits[1], bits[2]);
        point_values.push_back(u[u.space->cell_dof(c, node)]);
      }
    }
  } else {
    // shared points: the vertex vefs of the mesh
    std::vector<int> vertex_point(mesh.vefs().size(), -1);
    for (int v = 0; v < static_cast<int>(mesh.vefs().size()); ++v) {
      const Vef& vef = mesh.vef(v);
      if (vef.dim != 0) continue;
      vertex_point[static_cast<std::size_t>(v)] = static_cast<int>(points.size());
      const Point x = mesh.vertex_coords(vef.anchor);
      points.push_back({x[0], x[1], x[2]});
      if (fields.point_field != nullptr) {
        const FeFunction& u = *fields.point_field;
        const auto [c, local] = vef.incident_cells.front();
        const int code = detail::subentity_codes(d)[static_cast<std::size_t>(local)];
        const int node = detail::corner_node(u.space->element(), code % 3, code / 3 % 3,
                                             code / 9 % 3);
        point_values.push_back(u[u.space->cell_dof(c, node)]);
      }
    }
    const auto& codes = detail::subentity_codes(d);
    std::vector<int> local_of_code(static_cast<std::size_t>(d == 2 ? 9 : 27), -1);
    for (int l = 0; l < static_cast<int>(codes.size()); ++l)
      local_of_code[static_cast<std::size_t>(codes[static_cast<std::size_t>(l)])] = l;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      for (int k = 0; k < ncorners; ++k) {
        const int* bits = d == 2 ? vtk_corners_2d[k] : vtk_corners_3d[k];
        const int code = bits[0] + 3 * bits[1] + 9 * (d == 3 ? bits[2] : 0);
        const int vid = mesh.cell_vef(c, local_of_code[static_cast<std::size_t>(code)]);
        connectivity.push_back(vertex_point[static_cast<std::size_t>(vid)]);
      }
    }
  }

  os << "POINTS " << points.size() << " double\n";
  for (const auto& p : points) os << p[0] << " " << p[1] << " " << p[2] << "\n";
  os << "CELLS " << mesh.num_cells() << " " << mesh.num_cells() * (ncorners + 1) << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) {
    os << ncorners;
    for (int k = 0; k < ncorners; ++k)
      os << " " << connectivity[static_cast<std::size_t>(c * ncorners + k)];
    os << "\n";
  }
  os << "CELL_TYPES " << mesh.num_cells() << "\n";
  const int cell_type = d == 2 ? 9 : 12;  // VTK_QUAD / VTK_HEXAHEDRON
  for (int c = 0; c < mesh.num_cells(); ++c) os << cell_type << "\n";

  if (fields.point_field != nullptr) {
    os << "POINT_DATA " << points.size() << "\n";
    os << "SCALARS " << fields.point_name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    for (double v : point_values) os << v << "\n";
  }
  if (!fields.cell_fields.empty()) {
    os << "CELL_DATA " << mesh.num_cells() << "\n";
    for (const auto& [name, data] : fields.cell_fields) {
      os << "SCALARS " << name << " double 1\n";
      os << "LOOKUP_TABLE default\n";
      for (double v : data) os << v << "\n";
    }
  }
  detail::atomic_write(path, os.str());
}

/// Output path of one AMR step in a series (step index in the file name).
inline std::string vtk_step_path(const std::string& directory, const std::string& base,
                                 int step) {
  std::ostringstream os;
  os << directory << "/" << base << "_" << std::setw(3) << std::setfill('0') << step << ".vtk";
  return os.str();
}

// ---------------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------------

struct StudyRecord {
  std::string id;  // cells per axis (uniform) or AMR step index
  int cells = 0;
  int dofs = 0;
  double error = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct StudyResult {
  std::vector<StudyRecord> rows;
  std::vector<double> observed_orders;  // between consecutive uniform rows
};

inline constexpr const char* kStudyCsvHeader = "mesh_or_step,cells,dofs,error,iterations,seconds";

/// Solves on a sequence of uniformly refined meshes; the observed order
/// between consecutive rows is log(e_i / e_{i+1}) / log(2).
inline StudyResult run_uniform_study(int dim, const std::vector<int>& cells_per_axis,
                                     const SolveConfig& config) {
  FEMBOX_REQUIRE(!cells_per_axis.empty(), "run_uniform_study: empty mesh list");
  StudyResult result;
  for (int n : cells_per_axis) {
    auto mesh = std::make_shared<ForestMesh>(create_unit_box_mesh(dim, {n, n, n}));
    const StepRecord rec = solve_on_mesh(mesh, config);
    result.rows.push_back({std::to_string(n), rec.cells, rec.free_dofs, rec.error,
                           rec.iterations, rec.seconds});
  }
  for (std::size_t i = 0; i + 1 < result.rows.size(); ++i)
    result.observed_orders.push_back(
        std::log(result.rows[i].error / result.rows[i + 1].error) / std::log(2.0));
  return result;
}

inline StudyResult run_amr_study(const AmrConfig& config,
                                 std::vector<StepRecord>* records_out = nullptr) {
  StudyResult result;
  std::vector<StepRecord> records = amr_loop(config);
  for (const StepRecord& rec : records)
    result.rows.push_back({std::to_string(rec.step), rec.cells, rec.free_dofs, rec.error,
                           rec.iterations, rec.seconds});
  if (records_out != nullptr) *records_out = std::move(records);
  return result;
}

enum class StudyMode { uniform, amr };

struct StudyConfig {
  StudyMode mode = StudyMode::uniform;
  int dim = 2;
  std::vector<int> cells_per_axis{16, 32, 64};  // uniform mode mesh sequence
  AmrConfig amr;                                // amr mode (solve shared below)
};

/// Uniform mode solves a sequence of uniformly refined meshes; amr mode runs
/// the adaptive loop. Both produce the same table schema.
inline StudyResult run_convergence_study(const StudyConfig& config) {
  if (config.mode == StudyMode::uniform)
    return run_uniform_study(config.dim, config.cells_per_axis, config.amr.solve);
  return run_amr_study(config.amr);
}

/// CSV with the fixed header row; wall times carry 3 decimals.
inline void write_study_csv(const StudyResult& result, const std::string& path) {
  std::ostringstream os;
  os << kStudyCsvHeader << "\n";
  for (const StudyRecord& r : result.rows) {
    os << r.id << "," << r.cells << "," << r.dofs << ",";
    os << std::setprecision(12) << r.error << "," << r.iterations << ",";
    os << std::fixed << std::setprecision(3) << r.seconds << "\n";
    os.unsetf(std::ios_base::fixed);
  }
  detail::atomic_write(path, os.str());
}

}  // namespace fembox

#endif  // FEMBOX_IO_CLI_HPP
