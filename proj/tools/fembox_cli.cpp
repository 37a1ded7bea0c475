// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Poisson wave-front benchmark driver: single solves, uniform convergence
// studies and AMR runs, with VTK/CSV/MatrixMarket output.

#include <filesystem>
#include <iostream>

#include "fembox/fembox.hpp"

namespace {

fembox::ParameterRegistry make_registry() {
  fembox::ParameterRegistry reg;
  reg.add_string("RUN_MODE", "--RUN_MODE", "solve",
                 "what to run: a single solve, a uniform-mesh convergence study, "
                 "or an adaptive refinement run",
                 {"solve", "uniform_study", "amr"});
  reg.add_int("MESH_DIM", "--MESH_DIM", 2, "space dimension (2 or 3)");
  reg.add_int("MESH_CELLS_PER_AXIS", "--MESH_CELLS_PER_AXIS", 16,
              "cells per axis of the uniform mesh (solve mode)");
  reg.add_string("FE_FORMULATION", "--FE_FORMULATION", "CG", "finite element formulation",
                 {"CG", "DG"});
  reg.add_int("FE_ORDER", "--FE_ORDER", 1, "polynomial order q (1..4)");
  reg.add_real("DG_TAU", "--DG_TAU", 1.0, "interior-penalty variant: -1, 0 or 1");
  reg.add_real("DG_PENALTY_FACTOR", "--DG_PENALTY_FACTOR", 10.0,
               "penalty gamma = factor * q^2");
  reg.add_real("PROBLEM_ALPHA", "--PROBLEM_ALPHA", 200.0, "wave front sharpness");
  reg.add_real("PROBLEM_RADIUS", "--PROBLEM_RADIUS", 0.7, "wave front radius");
  reg.add_real_vector("PROBLEM_CENTER", "--PROBLEM_CENTER", {-0.05, -0.05, -0.05},
                      "wave front center coordinates");
  reg.add_int("AMR_UNIFORM_STEPS", "--AMR_UNIFORM_STEPS", 2,
              "initial uniform refinement steps (amr mode)");
  reg.add_int("AMR_STEPS", "--AMR_STEPS", 8, "adaptive refinement steps (amr mode)");
  reg.add_real("AMR_REFINE_FRACTION", "--AMR_REFINE_FRACTION", 0.1,
               "fraction of cells refined per step");
  reg.add_real("AMR_COARSEN_FRACTION", "--AMR_COARSEN_FRACTION", 0.05,
               "fraction of cells coarsened per step");
  reg.add_string("SOLVER_TYPE", "--SOLVER_TYPE", "direct", "linear solver",
                 {"direct", "pcg"});
  reg.add_string("SOLVER_PRECONDITIONER", "--SOLVER_PRECONDITIONER", "none",
                 "preconditioner for the pcg solver", {"none", "jacobi", "bddc"});
  reg.add_int_vector("BDDC_SUBDOMAIN_GRID", "--BDDC_SUBDOMAIN_GRID", {2, 2},
                     "subdomain grid (the product gives the number of Morton segments)");
  reg.add_real("SOLVER_RTOL", "--SOLVER_RTOL", 1e-6, "relative residual tolerance");
  reg.add_int("SOLVER_MAX_ITERATIONS", "--SOLVER_MAX_ITERATIONS", 2000,
              "iteration cap for the pcg solver");
  reg.add_int_vector("STUDY_CELL_SIZES", "--STUDY_CELL_SIZES", {16, 32},
                     "cells per axis of each mesh in a uniform study (up to 3 values; "
                     "pass the flag repeatedly for longer sequences)");
  reg.add_string("OUTPUT_DIR", "--OUTPUT_DIR", ".", "directory for output files");
  reg.add_flag("OUTPUT_VTK", "--OUTPUT_VTK", "write VTK files of meshes and solutions");
  reg.add_flag("OUTPUT_CSV", "--OUTPUT_CSV", "write the study table as CSV");
  reg.add_flag("OUTPUT_MATRIX", "--OUTPUT_MATRIX",
               "dump the assembled system in MatrixMarket format (solve mode)");
  return reg;
}

fembox::SolveConfig make_solve_config(const fembox::ParsedValues& v) {
  fembox::SolveConfig cfg;
  cfg.order = v.get<int>("FE_ORDER");
  cfg.formulation = v.get<std::string>("FE_FORMULATION") == "CG" ? fembox::Conformity::CG
                                                                 : fembox::Conformity::DG;
  const auto& center = v.get<std::vector<double>>("PROBLEM_CENTER");
  const std::size_t dim = static_cast<std::size_t>(v.get<int>("MESH_DIM"));
  fembox::Point xc{0, 0, 0};
  for (std::size_t a = 0; a < center.size() && a < dim; ++a) xc[a] = center[a];
  cfg.ms = fembox::ManufacturedSolution(v.get<double>("PROBLEM_ALPHA"),
                                        v.get<double>("PROBLEM_RADIUS"), xc);
  cfg.dg.tau = v.get<double>("DG_TAU");
  cfg.dg.penalty_factor = v.get<double>("DG_PENALTY_FACTOR");
  cfg.solver = v.get<std::string>("SOLVER_TYPE") == "direct" ? fembox::SolverKind::direct
                                                             : fembox::SolverKind::pcg;
  const std::string prec = v.get<std::string>("SOLVER_PRECONDITIONER");
  cfg.preconditioner = prec == "none"     ? fembox::PrecKind::none
                       : prec == "jacobi" ? fembox::PrecKind::jacobi
                                          : fembox::PrecKind::bddc;
  int parts = 1;
  for (int g : v.get<std::vector<int>>("BDDC_SUBDOMAIN_GRID")) parts *= std::max(1, g);
  cfg.subdomain_parts = parts;
  cfg.rtol = v.get<double>("SOLVER_RTOL");
  cfg.max_iterations = v.get<int>("SOLVER_MAX_ITERATIONS");
  return cfg;
}

void print_record(const fembox::StepRecord& rec) {
  std::cout << "cells " << rec.cells << "  free dofs " << rec.free_dofs << "  hanging "
            << rec.hanging_dofs << "  energy error " << rec.error;
  if (rec.iterations > 0) std::cout << "  iterations " << rec.iterations;
  std::cout << "  seconds " << rec.seconds << "\n";
}

int run_solve(const fembox::ParsedValues& v) {
  const fembox::SolveConfig cfg = make_solve_config(v);
  const int dim = v.get<int>("MESH_DIM");
  const int n = v.get<int>("MESH_CELLS_PER_AXIS");
  auto mesh = std::make_shared<fembox::ForestMesh>(
      fembox::create_unit_box_mesh(dim, {n, n, n}));
  const std::string dir = v.get<std::string>("OUTPUT_DIR");

  if (v.get<bool>("OUTPUT_MATRIX")) {
    fembox::AffineOperator op;
    if (cfg.formulation == fembox::Conformity::CG) {
      fembox::FeSpace space(*mesh, cfg.order, fembox::Conformity::CG,
                            fembox::full_dirichlet(*mesh, cfg.ms.value_func()));
      const auto g = fembox::interpolate_dirichlet_values(space, space.boundary_conditions());
      op = fembox::integrate_cg(space, cfg.ms.source_func(dim), g);
    } else {
      fembox::FeSpace space(*mesh, cfg.order, fembox::Conformity::DG);
      op = fembox::integrate_dg(space, cfg.ms.source_func(dim), cfg.ms.value_func(), cfg.dg);
    }
    fembox::write_matrix_market(op.matrix, dir + "/matrix.mtx");
    fembox::write_matrix_market_vector(op.rhs, dir + "/rhs.mtx");
    std::cout << "wrote " << dir << "/matrix.mtx and " << dir << "/rhs.mtx\n";
  }

  const fembox::StepRecord rec = fembox::solve_on_mesh(mesh, cfg);
  print_record(rec);
  if (v.get<bool>("OUTPUT_VTK")) {
    fembox::VtkFields fields;
    fields.point_field = rec.solution.get();
    fields.cell_fields.emplace_back("cell_error_sq", rec.estimator.cell_errors_sq);
    if (cfg.preconditioner == fembox::PrecKind::bddc) {
      const int parts = std::min(cfg.subdomain_parts, rec.mesh->num_cells());
      const fembox::Partition part = fembox::partition_sfc(*rec.mesh, parts);
      std::vector<double> owners(part.owner.begin(), part.owner.end());
      fields.cell_fields.emplace_back("subdomain", std::move(owners));
    }
    const std::string path = dir + "/solution.vtk";
    fembox::write_vtk(*rec.mesh, fields, path);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

int run_uniform_study(const fembox::ParsedValues& v) {
  fembox::StudyConfig study;
  study.mode = fembox::StudyMode::uniform;
  study.dim = v.get<int>("MESH_DIM");
  study.cells_per_axis = v.get<std::vector<int>>("STUDY_CELL_SIZES");
  study.amr.solve = make_solve_config(v);
  const fembox::StudyResult res = fembox::run_convergence_study(study);
  std::cout << fembox::kStudyCsvHeader << "\n";
  for (const auto& row : res.rows)
    std::cout << row.id << "," << row.cells << "," << row.dofs << "," << row.error << ","
              << row.iterations << "," << row.seconds << "\n";
  for (std::size_t i = 0; i < res.observed_orders.size(); ++i)
    std::cout << "observed order " << res.rows[i].id << " -> " << res.rows[i + 1].id << ": "
              << res.observed_orders[i] << "\n";
  if (v.get<bool>("OUTPUT_CSV"))
    fembox::write_study_csv(res, v.get<std::string>("OUTPUT_DIR") + "/uniform_study.csv");
  return 0;
}

int run_amr(const fembox::ParsedValues& v) {
  fembox::AmrConfig cfg;
  cfg.solve = make_solve_config(v);
  FEMBOX_REQUIRE(v.get<int>("MESH_DIM") == 2, "amr mode supports d=2 only");
  cfg.initial_uniform_steps = v.get<int>("AMR_UNIFORM_STEPS");
  cfg.amr_steps = v.get<int>("AMR_STEPS");
  cfg.alpha_r = v.get<double>("AMR_REFINE_FRACTION");
  cfg.alpha_c = v.get<double>("AMR_COARSEN_FRACTION");
  std::vector<fembox::StepRecord> records;
  const fembox::StudyResult res = fembox::run_amr_study(cfg, &records);
  for (const auto& rec : records) {
    std::cout << "step " << rec.step << ": ";
    print_record(rec);
  }
  const std::string dir = v.get<std::string>("OUTPUT_DIR");
  if (v.get<bool>("OUTPUT_CSV")) fembox::write_study_csv(res, dir + "/amr_study.csv");
  if (v.get<bool>("OUTPUT_VTK")) {
    for (const auto& rec : records) {
      fembox::VtkFields fields;
      fields.point_field = rec.solution.get();
      fields.cell_fields.emplace_back("cell_error_sq", rec.estimator.cell_errors_sq);
      fembox::write_vtk(*rec.mesh, fields, fembox::vtk_step_path(dir, "amr", rec.step));
    }
    std::cout << "wrote " << records.size() << " VTK steps to " << dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const fembox::ParameterRegistry registry = make_registry();
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto result = registry.parse(args);
  if (result.status == fembox::ParameterRegistry::Status::help) {
    std::cout << result.message;
    return 0;
  }
  if (result.status == fembox::ParameterRegistry::Status::error) {
    std::cerr << "error: " << result.message << "\n";
    return 1;
  }
  if (result.values.get<bool>(fembox::ParameterRegistry::kPrintValuesKey))
    std::cout << registry.print_values(result.values);
  try {
    std::filesystem::create_directories(result.values.get<std::string>("OUTPUT_DIR"));
    const std::string mode = result.values.get<std::string>("RUN_MODE");
    if (mode == "solve") return run_solve(result.values);
    if (mode == "uniform_study") return run_uniform_study(result.values);
    return run_amr(result.values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
