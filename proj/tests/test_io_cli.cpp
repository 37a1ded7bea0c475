// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "fembox/io_cli.hpp"

using namespace fembox;

namespace {

ParameterRegistry demo_registry() {
  ParameterRegistry reg;
  reg.add_string("FE_FORMULATION", "--FE_FORMULATION", "CG", "finite element formulation",
                 {"CG", "DG"});
  reg.add_int("FE_ORDER", "--FE_ORDER", 1, "polynomial order");
  reg.add_real("PROBLEM_ALPHA", "--PROBLEM_ALPHA", 200.0, "sharpness");
  reg.add_real_vector("PROBLEM_CENTER", "--PROBLEM_CENTER", {-0.05, -0.05}, "center");
  reg.add_flag("OUTPUT_VTK", "--OUTPUT_VTK", "write vtk files");
  return reg;
}

// strict structural checker for legacy ASCII VTK unstructured grids
struct VtkSummary {
  int points = 0;
  int cells = 0;
  std::vector<int> types;
  std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
  std::vector<std::pair<std::string, std::vector<double>>> point_scalars;
};

VtkSummary check_vtk(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  VtkSummary out;
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "# vtk DataFile Version 3.0");
  std::getline(in, line);  // title
  std::getline(in, line);
  REQUIRE(line == "ASCII");
  std::getline(in, line);
  REQUIRE(line == "DATASET UNSTRUCTURED_GRID");
  std::string keyword;
  int section = 0;  // 0 geometry, 1 point data, 2 cell data
  while (in >> keyword) {
    if (keyword == "POINTS") {
      std::string type;
      in >> out.points >> type;
      REQUIRE(type == "double");
      for (int i = 0; i < out.points; ++i) {
        double x, y, z;
        REQUIRE((in >> x >> y >> z));
      }
    } else if (keyword == "CELLS") {
      int total;
      in >> out.cells >> total;
      int consumed = 0;
      for (int c = 0; c < out.cells; ++c) {
        int npts;
        REQUIRE((in >> npts));
        ++consumed;
        for (int k = 0; k < npts; ++k) {
          int id;
          REQUIRE((in >> id));
          REQUIRE(id >= 0);
          REQUIRE(id < out.points);
          ++consumed;
        }
      }
      REQUIRE(consumed == total);
    } else if (keyword == "CELL_TYPES") {
      int n;
      in >> n;
      REQUIRE(n == out.cells);
      out.types.resize(static_cast<std::size_t>(n));
      for (auto& t : out.types) REQUIRE((in >> t));
    } else if (keyword == "POINT_DATA") {
      int n;
      in >> n;
      REQUIRE(n == out.points);
      section = 1;
    } else if (keyword == "CELL_DATA") {
      int n;
      in >> n;
      REQUIRE(n == out.cells);
      section = 2;
    } else if (keyword == "SCALARS") {
      REQUIRE(section != 0);
      std::string name, type;
      int comps;
      in >> name >> type >> comps;
      REQUIRE(type == "double");
      REQUIRE(comps == 1);
      std::string lut, tbl;
      in >> lut >> tbl;
      REQUIRE(lut == "LOOKUP_TABLE");
      const int count = section == 1 ? out.points : out.cells;
      std::vector<double> values(static_cast<std::size_t>(count));
      for (auto& v : values) REQUIRE((in >> v));
      if (section == 1)
        out.point_scalars.emplace_back(name, std::move(values));
      else
        out.cell_scalars.emplace_back(name, std::move(values));
    } else {
      FAIL("unexpected VTK keyword: " << keyword);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("parsing without arguments yields the defaults") {
  const ParameterRegistry reg = demo_registry();
  const auto result = reg.parse({});
  REQUIRE(result.status == ParameterRegistry::Status::ok);
  CHECK(result.values.get<std::string>("FE_FORMULATION") == "CG");
  CHECK(result.values.get<int>("FE_ORDER") == 1);
  CHECK(result.values.get<double>("PROBLEM_ALPHA") == 200.0);
  CHECK(result.values.get<bool>("OUTPUT_VTK") == false);
}

TEST_CASE("flags override the registered defaults") {
  const ParameterRegistry reg = demo_registry();
  const auto result =
      reg.parse({"--FE_FORMULATION", "DG", "--FE_ORDER", "3", "--OUTPUT_VTK"});
  REQUIRE(result.status == ParameterRegistry::Status::ok);
  CHECK(result.values.get<std::string>("FE_FORMULATION") == "DG");
  CHECK(result.values.get<int>("FE_ORDER") == 3);
  CHECK(result.values.get<bool>("OUTPUT_VTK") == true);
}

TEST_CASE("values outside the admissible choices fail naming the flag") {
  const ParameterRegistry reg = demo_registry();
  const auto result = reg.parse({"--FE_FORMULATION", "XX"});
  REQUIRE(result.status == ParameterRegistry::Status::error);
  CHECK(result.message.find("FE_FORMULATION") != std::string::npos);
  CHECK(result.message.find("CG") != std::string::npos);
  CHECK(result.message.find("DG") != std::string::npos);
}

TEST_CASE("unknown flags fail naming the flag") {
  const ParameterRegistry reg = demo_registry();
  const auto result = reg.parse({"--NO_SUCH_FLAG", "1"});
  REQUIRE(result.status == ParameterRegistry::Status::error);
  CHECK(result.message.find("--NO_SUCH_FLAG") != std::string::npos);
}

TEST_CASE("help reports every flag") {
  const ParameterRegistry reg = demo_registry();
  const auto result = reg.parse({"--help"});
  REQUIRE(result.status == ParameterRegistry::Status::help);
  for (const char* flag : {"--FE_FORMULATION", "--FE_ORDER", "--PROBLEM_ALPHA",
                           "--PROBLEM_CENTER", "--OUTPUT_VTK", "--PRINT_VALUES"})
    CHECK(result.message.find(flag) != std::string::npos);
}

TEST_CASE("print and reparse round trips the values") {
  const ParameterRegistry reg = demo_registry();
  const auto first = reg.parse({"--FE_FORMULATION", "DG", "--PROBLEM_ALPHA", "123.456",
                                "--PROBLEM_CENTER", "0.25", "-0.125", "--OUTPUT_VTK"});
  REQUIRE(first.status == ParameterRegistry::Status::ok);
  const auto args = reg.to_args(first.values);
  const auto second = reg.parse(args);
  REQUIRE(second.status == ParameterRegistry::Status::ok);
  CHECK(first.values.values == second.values.values);
  // the printed table carries every key
  const std::string table = reg.print_values(first.values);
  CHECK(table.find("FE_FORMULATION = DG") != std::string::npos);
  CHECK(table.find("PROBLEM_ALPHA = 123.456") != std::string::npos);
  CHECK(table.find("OUTPUT_VTK = true") != std::string::npos);
}

TEST_CASE("a single cell writes one quad with four points") {
  const ForestMesh mesh = create_unit_box_mesh(2, {1, 1, 0});
  VtkFields fields;
  write_vtk(mesh, fields, "vtk_single.vtk");
  const VtkSummary s = check_vtk("vtk_single.vtk");
  CHECK(s.points == 4);
  CHECK(s.cells == 1);
  REQUIRE(s.types.size() == 1);
  CHECK(s.types[0] == 9);
  std::remove("vtk_single.vtk");
}

TEST_CASE("cell data is written in cell order") {
  const ForestMesh mesh = create_unit_box_mesh(2, {2, 2, 0});
  VtkFields fields;
  fields.cell_fields.emplace_back("cell_error_sq", std::vector<double>{1.0, 2.0, 3.0, 4.0});
  write_vtk(mesh, fields, "vtk_cells.vtk");
  const VtkSummary s = check_vtk("vtk_cells.vtk");
  CHECK(s.cells == 4);
  REQUIRE(s.cell_scalars.size() == 1);
  CHECK(s.cell_scalars[0].first == "cell_error_sq");
  CHECK(s.cell_scalars[0].second == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  std::remove("vtk_cells.vtk");
}

TEST_CASE("cg solutions share points while dg solutions duplicate them") {
  const ForestMesh mesh = create_unit_box_mesh(2, {2, 1, 0});
  const ScalarFunc g = [](const Point& x) { return x[0]; };
  const FeSpace cg(mesh, 1, Conformity::CG, full_dirichlet(mesh, g));
  const FeFunction ucg = interpolate_function(cg, g);
  VtkFields fields;
  fields.point_field = &ucg;
  write_vtk(mesh, fields, "vtk_cg.vtk");
  const VtkSummary scg = check_vtk("vtk_cg.vtk");
  CHECK(scg.points == 6);
  REQUIRE(scg.point_scalars.size() == 1);
  CHECK(scg.point_scalars[0].first == "u_h");

  const FeSpace dg(mesh, 1, Conformity::DG);
  const FeFunction udg = interpolate_function(dg, g);
  VtkFields dfields;
  dfields.point_field = &udg;
  write_vtk(mesh, dfields, "vtk_dg.vtk");
  const VtkSummary sdg = check_vtk("vtk_dg.vtk");
  CHECK(sdg.points == 8);  // per-cell duplication
  std::remove("vtk_cg.vtk");
  std::remove("vtk_dg.vtk");
}

TEST_CASE("3d meshes write hexahedra") {
  const ForestMesh mesh = create_unit_box_mesh(3, {2, 2, 2});
  VtkFields fields;
  write_vtk(mesh, fields, "vtk_hex.vtk");
  const VtkSummary s = check_vtk("vtk_hex.vtk");
  CHECK(s.points == 27);
  CHECK(s.cells == 8);
  for (int t : s.types) CHECK(t == 12);
  std::remove("vtk_hex.vtk");
}

TEST_CASE("step paths carry the step index") {
  CHECK(vtk_step_path("out", "amr", 0) == "out/amr_000.vtk");
  CHECK(vtk_step_path("out", "amr", 17) == "out/amr_017.vtk");
}

TEST_CASE("the csv header is frozen") {
  CHECK(std::string(kStudyCsvHeader) == "mesh_or_step,cells,dofs,error,iterations,seconds");
}

TEST_CASE("uniform studies report decreasing errors and observed orders") {
  SolveConfig cfg;
  cfg.ms = ManufacturedSolution(200.0, 0.7, {-0.05, -0.05, 0});
  const StudyResult res = run_uniform_study(2, {8, 16, 32}, cfg);
  REQUIRE(res.rows.size() == 3);
  CHECK(res.rows[0].error > res.rows[1].error);
  CHECK(res.rows[1].error > res.rows[2].error);
  REQUIRE(res.observed_orders.size() == 2);
  for (double order : res.observed_orders) CHECK(order > 0.0);

  write_study_csv(res, "study.csv");
  std::ifstream in("study.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == kStudyCsvHeader);
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  std::remove("study.csv");
}

TEST_CASE("amr studies wrap the amr loop records") {
  AmrConfig cfg;
  cfg.solve.ms = ManufacturedSolution(200.0, 0.7, {-0.05, -0.05, 0});
  cfg.initial_uniform_steps = 2;
  cfg.amr_steps = 3;
  const StudyResult res = run_amr_study(cfg);
  REQUIRE(res.rows.size() == 4);
  CHECK(res.rows[0].id == "0");
  CHECK(res.rows[3].id == "3");
  CHECK(res.rows[0].cells == 16);
}
