// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "fembox/adapt.hpp"
#include "fembox/bddc.hpp"

using namespace fembox;

namespace {

struct Problem {
  std::shared_ptr<ForestMesh> mesh;
  std::shared_ptr<FeSpace> space;
  AffineOperator op;
};

Problem assemble_benchmark(int cells_per_axis) {
  const ManufacturedSolution ms(200.0, 0.7, {-0.05, -0.05, 0});
  Problem p;
  p.mesh = std::make_shared<ForestMesh>(
      create_unit_box_mesh(2, {cells_per_axis, cells_per_axis, 0}));
  p.space = std::make_shared<FeSpace>(*p.mesh, 1, Conformity::CG,
                                      full_dirichlet(*p.mesh, ms.value_func()));
  const auto gh = interpolate_dirichlet_values(*p.space, p.space->boundary_conditions());
  p.op = integrate_cg(*p.space, ms.source_func(2), gh, 4);
  return p;
}

// entrywise scatter-sum of the sub-assembled matrices
std::vector<double> recompose(const std::vector<SubdomainProblem>& problems, int n) {
  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& sub : problems) {
    const CsrMatrix& a = sub.matrix;
    for (int i = 0; i < a.n; ++i)
      for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const int gi = sub.local_to_global[static_cast<std::size_t>(i)];
        const int gj = sub.local_to_global[static_cast<std::size_t>(a.col_idx[static_cast<std::size_t>(k)])];
        dense[static_cast<std::size_t>(gi) * n + gj] += a.values[static_cast<std::size_t>(k)];
      }
  }
  return dense;
}

}  // namespace

TEST_CASE("a single subdomain reproduces the global matrix") {
  const Problem p = assemble_benchmark(4);
  const Partition part = partition_sfc(*p.mesh, 1);
  const auto problems = build_subdomain_problems(*p.space, part);
  REQUIRE(problems.size() == 1);
  const int n = p.op.matrix.n;
  const auto sum = recompose(problems, n);
  for (int i = 0; i < n; ++i)
    for (int k = p.op.matrix.row_ptr[static_cast<std::size_t>(i)];
         k < p.op.matrix.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
      CHECK(sum[static_cast<std::size_t>(i) * n +
                p.op.matrix.col_idx[static_cast<std::size_t>(k)]] ==
            Catch::Approx(p.op.matrix.values[static_cast<std::size_t>(k)]).margin(1e-13));
}

TEST_CASE("shared interface diagonals recompose across two subdomains") {
  const Problem p = assemble_benchmark(4);
  const Partition part = partition_sfc(*p.mesh, 2);
  const auto problems = build_subdomain_problems(*p.space, part);
  const int n = p.op.matrix.n;
  const auto sum = recompose(problems, n);
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(p.op.matrix.value_at(i, i)));
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(sum[static_cast<std::size_t>(i) * n + i] - p.op.matrix.value_at(i, i)) <
          1e-12 * scale);
}

TEST_CASE("sub-assembled matrices recompose the operator entrywise") {
  const Problem p = assemble_benchmark(4);
  for (int parts : {2, 3, 4, 5}) {
    const Partition part = partition_sfc(*p.mesh, parts);
    const auto problems = build_subdomain_problems(*p.space, part);
    const int n = p.op.matrix.n;
    const auto sum = recompose(problems, n);
    double scale = 0.0;
    for (double v : p.op.matrix.values) scale = std::max(scale, std::abs(v));
    // every stored entry matches; recomposed entries outside the pattern are zero
    std::vector<double> reference(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = p.op.matrix.row_ptr[static_cast<std::size_t>(i)];
           k < p.op.matrix.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        reference[static_cast<std::size_t>(i) * n +
                  p.op.matrix.col_idx[static_cast<std::size_t>(k)]] =
            p.op.matrix.values[static_cast<std::size_t>(k)];
    for (std::size_t e = 0; e < reference.size(); ++e)
      CHECK(std::abs(sum[e] - reference[e]) <= 1e-12 * scale);
  }
}

TEST_CASE("dg spaces are rejected") {
  const ForestMesh mesh = create_unit_box_mesh(2, {4, 4, 0});
  const FeSpace dg(mesh, 1, Conformity::DG);
  const Partition part = partition_sfc(mesh, 2);
  CHECK_THROWS_AS(build_subdomain_problems(dg, part), InvalidArgument);
}

TEST_CASE("a 2x2 subdomain grid yields one corner and four edges") {
  const Problem p = assemble_benchmark(8);
  const Partition part = partition_sfc(*p.mesh, 4);
  const auto objects = classify_coarse_objects(*p.space, part);
  int corners = 0, edges = 0;
  for (const auto& o : objects) {
    corners += o.kind == CoarseObject::Kind::corner;
    edges += o.kind == CoarseObject::Kind::edge;
  }
  CHECK(corners == 1);
  CHECK(edges == 4);
  for (const auto& o : objects)
    if (o.kind == CoarseObject::Kind::corner) {
      REQUIRE(o.dofs.size() == 1);
      CHECK(o.subdomains.size() == 4);
      const Point& x = p.space->dof_coords(o.dofs[0]);
      CHECK(x[0] == Catch::Approx(0.5));
      CHECK(x[1] == Catch::Approx(0.5));
    }
}

TEST_CASE("a 1x2 strip yields one edge and no corners") {
  const ManufacturedSolution ms(200.0, 0.7, {-0.05, -0.05, 0});
  auto mesh = std::make_shared<ForestMesh>(create_unit_box_mesh(2, {4, 8, 0}));
  const FeSpace space(*mesh, 1, Conformity::CG, full_dirichlet(*mesh, ms.value_func()));
  const Partition part = partition_sfc(*mesh, 2);
  const auto objects = classify_coarse_objects(space, part);
  REQUIRE(objects.size() == 1);
  CHECK(objects[0].kind == CoarseObject::Kind::edge);
  CHECK(objects[0].subdomains == std::vector<int>{0, 1});
}

TEST_CASE("a single subdomain has no coarse objects") {
  const Problem p = assemble_benchmark(4);
  const Partition part = partition_sfc(*p.mesh, 1);
  CHECK(classify_coarse_objects(*p.space, part).empty());
}

TEST_CASE("coarse basis functions are nodal for the coarse functionals") {
  const Problem p = assemble_benchmark(16);
  const Partition part = partition_sfc(*p.mesh, 4);
  auto problems = build_subdomain_problems(*p.space, part);
  const auto objects = classify_coarse_objects(*p.space, part);
  const BddcPreconditioner M(p.op.matrix, problems, objects,
                             CoarseDofSelection::corners_and_means);
  // C_i Phi_i = I: a corner basis function is 1 at its own corner and 0 at
  // the other coarse dofs; an edge basis function has unit mean on its edge
  for (std::size_t sp = 0; sp < M.problems().size(); ++sp) {
    const auto& rows = M.subdomain_constraints(static_cast<int>(sp));
    const auto& phi = M.subdomain_coarse_basis(static_cast<int>(sp));
    const int nc = static_cast<int>(rows.size());
    const int nl = static_cast<int>(M.problems()[sp].local_to_global.size());
    for (int r = 0; r < nc; ++r)
      for (int k = 0; k < nc; ++k) {
        double v = 0.0;
        for (const auto& [li, ci] : rows[static_cast<std::size_t>(r)])
          v += ci * phi[static_cast<std::size_t>(k) * nl + li];
        CHECK(v == Catch::Approx(r == k ? 1.0 : 0.0).margin(1e-10));
      }
  }
}

TEST_CASE("the coarse matrix is symmetric positive definite") {
  const Problem p = assemble_benchmark(16);
  const Partition part = partition_sfc(*p.mesh, 4);
  const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part),
                             classify_coarse_objects(*p.space, part),
                             CoarseDofSelection::corners_and_means);
  const CsrMatrix& ac = M.coarse_matrix();
  REQUIRE(ac.n == M.num_coarse_dofs());
  for (int i = 0; i < ac.n; ++i)
    for (int k = ac.row_ptr[static_cast<std::size_t>(i)]; k < ac.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = ac.col_idx[static_cast<std::size_t>(k)];
      CHECK(ac.values[static_cast<std::size_t>(k)] ==
            Catch::Approx(ac.value_at(j, i)).margin(1e-10));
    }
  CHECK_NOTHROW(CholeskySolver(ac));  // SPD: the factorization exists
}

TEST_CASE("the preconditioner is exact for a single subdomain") {
  const Problem p = assemble_benchmark(8);
  const Partition part = partition_sfc(*p.mesh, 1);
  const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part),
                             classify_coarse_objects(*p.space, part),
                             CoarseDofSelection::corners_and_means);
  const auto z = M.apply(p.op.rhs);
  const auto x = cholesky_solve(p.op.matrix, p.op.rhs);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("the preconditioner is a symmetric operator") {
  const Problem p = assemble_benchmark(16);
  const Partition part = partition_sfc(*p.mesh, 4);
  const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part),
                             classify_coarse_objects(*p.space, part),
                             CoarseDofSelection::corners_and_means);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n = p.op.matrix.n;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (auto& v : a) v = unif(rng);
    for (auto& v : b) v = unif(rng);
    const auto ma = M.apply(a);
    const auto mb = M.apply(b);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      s1 += ma[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
      s2 += a[static_cast<std::size_t>(i)] * mb[static_cast<std::size_t>(i)];
    }
    CHECK(std::abs(s1 - s2) <= 1e-10 * std::max(1.0, std::abs(s1)));
  }
}

TEST_CASE("weights form a partition of unity on the interface") {
  const Problem p = assemble_benchmark(16);
  const Partition part = partition_sfc(*p.mesh, 4);
  auto problems = build_subdomain_problems(*p.space, part);
  const BddcPreconditioner M(p.op.matrix, problems, classify_coarse_objects(*p.space, part),
                             CoarseDofSelection::corners_and_means);
  std::map<int, double> weight_sum;
  for (std::size_t sp = 0; sp < M.problems().size(); ++sp) {
    const SubdomainProblem& sub = M.problems()[sp];
    for (std::size_t l = 0; l < sub.local_to_global.size(); ++l)
      weight_sum[sub.local_to_global[l]] += M.weight(static_cast<int>(sp), static_cast<int>(l));
  }
  for (const auto& [dof, sum] : weight_sum) CHECK(sum == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("pcg with bddc converges quickly at H/h = 4") {
  const Problem p = assemble_benchmark(16);  // 4x4 subdomains of 4x4 cells
  const Partition part = partition_sfc(*p.mesh, 16);
  const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part),
                             classify_coarse_objects(*p.space, part),
                             CoarseDofSelection::corners_and_means);
  const auto [x, report] = pcg(p.op.matrix, p.op.rhs, M.as_preconditioner(), 1e-6, 100);
  CHECK(report.converged);
  CHECK(report.iterations <= 25);
}

TEST_CASE("iteration counts stay flat as subdomains scale at fixed H/h") {
  std::vector<int> iterations;
  for (int g : {2, 4, 8}) {
    const Problem p = assemble_benchmark(4 * g);  // H/h = 4
    const Partition part = partition_sfc(*p.mesh, g * g);
    const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part),
                               classify_coarse_objects(*p.space, part),
                               CoarseDofSelection::corners_and_means);
    const auto [x, report] = pcg(p.op.matrix, p.op.rhs, M.as_preconditioner(), 1e-6, 100);
    REQUIRE(report.converged);
    iterations.push_back(report.iterations);
  }
  for (int its : iterations) CHECK(its <= 25);
  for (std::size_t k = 0; k + 1 < iterations.size(); ++k)
    CHECK(iterations[k + 1] - iterations[k] <= 5);
}

TEST_CASE("promoting every interface dof to a corner makes it exact") {
  const Problem p = assemble_benchmark(8);
  const Partition part = partition_sfc(*p.mesh, 4);
  const auto objects = all_interface_corners(classify_coarse_objects(*p.space, part));
  const BddcPreconditioner M(p.op.matrix, build_subdomain_problems(*p.space, part), objects,
                             CoarseDofSelection::corners);
  const auto [x, report] = pcg(p.op.matrix, p.op.rhs, M.as_preconditioner(), 1e-6, 10);
  CHECK(report.converged);
  CHECK(report.iterations <= 2);
}

TEST_CASE("corners-only selection on strips stays solvable via promotion") {
  const ManufacturedSolution ms(200.0, 0.7, {-0.05, -0.05, 0});
  auto mesh = std::make_shared<ForestMesh>(create_unit_box_mesh(2, {4, 8, 0}));
  const FeSpace space(*mesh, 1, Conformity::CG, full_dirichlet(*mesh, ms.value_func()));
  const auto gh = interpolate_dirichlet_values(space, space.boundary_conditions());
  const AffineOperator op = integrate_cg(space, ms.source_func(2), gh, 4);
  const Partition part = partition_sfc(*mesh, 2);
  const BddcPreconditioner M(op.matrix, build_subdomain_problems(space, part),
                             classify_coarse_objects(space, part), CoarseDofSelection::corners);
  CHECK(M.num_coarse_dofs() >= 1);  // edge endpoints promoted to corners
  const auto [x, report] = pcg(op.matrix, op.rhs, M.as_preconditioner(), 1e-6, 100);
  CHECK(report.converged);
}

TEST_CASE("bddc accelerates the adaptive benchmark as well") {
  // hanging-node mesh: constraints are eliminated before the preconditioner
  AmrConfig cfg;
  cfg.solve.ms = ManufacturedSolution(200.0, 0.7, {-0.05, -0.05, 0});
  cfg.initial_uniform_steps = 3;
  cfg.amr_steps = 4;
  const auto records = amr_loop(cfg);
  const ForestMesh& mesh = *records.back().mesh;
  const FeSpace& space = *records.back().space;
  const auto gh = interpolate_dirichlet_values(space, space.boundary_conditions());
  const AffineOperator op =
      integrate_cg(space, cfg.solve.ms.source_func(2), gh, cfg.solve.load_points());
  const Partition part = partition_sfc(mesh, 4);
  const BddcPreconditioner M(op.matrix, build_subdomain_problems(space, part),
                             classify_coarse_objects(space, part),
                             CoarseDofSelection::corners_and_means);
  const auto [x, report] = pcg(op.matrix, op.rhs, M.as_preconditioner(), 1e-6, 100);
  CHECK(report.converged);
  CHECK(report.iterations <= 25);
}
