// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_ADAPT_HPP
#define FEMBOX_ADAPT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "fembox/bddc.hpp"
#include "fembox/common.hpp"
#include "fembox/fespace.hpp"
#include "fembox/integration.hpp"
#include "fembox/linalg.hpp"
#include "fembox/mesh.hpp"

namespace fembox {

/// Benchmark solution with a sharp circular/spherical wave front of radius r
/// centered at x_c: u(x) = arctan(alpha * (|x - x_c| - r)).
struct ManufacturedSolution {
  double alpha = 200.0;
  double radius = 0.7;
  Point center{-0.05, -0.05, 0.0};

  ManufacturedSolution() = default;
  ManufacturedSolution(double a, double r, Point c) : alpha(a), radius(r), center(c) {
    FEMBOX_REQUIRE(a > 0.0 && r > 0.0, "ManufacturedSolution: alpha and r must be positive");
  }

  double rho(const Point& x) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += (x[a] - center[a]) * (x[a] - center[a]);
    return std::sqrt(s);
  }

  double value(const Point& x) const { return std::atan(alpha * (rho(x) - radius)); }

  Point gradient(const Point& x) const {
    const double p = rho(x);
    if (p == 0.0) return Point{0, 0, 0};  // center lies outside the benchmark domain
    const double t = alpha * (p - radius);
    const double s = alpha / (1.0 + t * t);
    Point g{0, 0, 0};
    for (int a = 0; a < 3; ++a) g[a] = s * (x[a] - center[a]) / p;
    return g;
  }

  /// Source f = -Laplace(u) for dimension d, from the radial form
  /// Laplace(u) = g''(rho) + (d-1)/rho g'(rho) with g(p) = atan(alpha(p - r)).
  double source(const Point& x, int dim) const {
    const double p = rho(x);
    const double t = alpha * (p - radius);
    const double den = 1.0 + t * t;
    const double second = -2.0 * alpha * alpha * t / (den * den);  // g''(rho)
    const double first = alpha / den;                              // g'(rho)
    return -(second + (dim - 1) * first / p);
  }

  ScalarFunc value_func() const {
    return [*this](const Point& x) { return value(x); };
  }

  VectorFunc gradient_func() const {
    return [*this](const Point& x) { return gradient(x); };
  }

  ScalarFunc source_func(int dim) const {
    return [*this, dim](const Point& x) { return source(x, dim); };
  }
};

/// Per-cell squared energy-norm errors e_K^2 and the total e = sqrt(sum e_K^2).
/// The estimated errors mirror the true ones (no a-posteriori estimator).
struct ErrorEstimator {
  std::vector<double> cell_errors_sq;
  std::vector<double> estimated_errors_sq;
  double total = 0.0;
};

/// e_K^2 = int_K |grad(u - u_h)|^2 by Gauss quadrature with q+2 points per
/// axis. Hanging DoF values of u_h must be up to date.
inline ErrorEstimator compute_local_true_errors(const FeSpace& space, const FeFunction& u_h,
                                                const ManufacturedSolution& ms,
                                                int quad_points = -1) {
  const ForestMesh& mesh = space.mesh();
  const int d = mesh.dim();
  const int n = quad_points > 0 ? quad_points : space.order() + 2;
  const Quadrature quad = gauss_quadrature(d, n);
  // reference gradients of the shape functions at the quadrature points
  std::vector<std::vector<Point>> ref_grads;
  ref_grads.reserve(static_cast<std::size_t>(quad.size()));
  for (int g = 0; g < quad.size(); ++g)
    ref_grads.push_back(space.element().shape_gradients(quad.points[static_cast<std::size_t>(g)]));

  ErrorEstimator est;
  est.cell_errors_sq.assign(static_cast<std::size_t>(mesh.num_cells()), 0.0);
  const int npc = space.dofs_per_cell();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellMap map = mesh.cell_map(c);
    const double jac = map.jacobian_det();
    double acc = 0.0;
    for (int g = 0; g < quad.size(); ++g) {
      Point grad_h{0, 0, 0};
      for (int a = 0; a < npc; ++a) {
        const double ua = u_h[space.cell_dof(c, a)];
        for (int ax = 0; ax < d; ++ax)
          grad_h[ax] += ua * ref_grads[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)][ax] /
                        map.half[ax];
      }
      const Point x = map.to_physical(quad.points[static_cast<std::size_t>(g)]);
      const Point grad_u = ms.gradient(x);
      double diff = 0.0;
      for (int ax = 0; ax < d; ++ax) diff += (grad_u[ax] - grad_h[ax]) * (grad_u[ax] - grad_h[ax]);
      acc += quad.weights[static_cast<std::size_t>(g)] * jac * diff;
    }
    est.cell_errors_sq[static_cast<std::size_t>(c)] = acc;
  }
  est.estimated_errors_sq = est.cell_errors_sq;
  est.total = std::sqrt(std::accumulate(est.cell_errors_sq.begin(), est.cell_errors_sq.end(), 0.0));
  return est;
}

/// Fixed-fraction marking: refine the top ceil(alpha_r N) cells and coarsen
/// the bottom ceil(alpha_c N) cells ranked by error.
struct FixedFractionStrategy {
  double alpha_r = 0.1;
  double alpha_c = 0.05;

  FixedFractionStrategy() = default;
  FixedFractionStrategy(double r, double c) : alpha_r(r), alpha_c(c) {
    FEMBOX_REQUIRE(r >= 0.0 && r < 1.0 && c >= 0.0 && c < 1.0,
                   "FixedFractionStrategy: fractions must lie in [0,1)");
    FEMBOX_REQUIRE(r + c <= 1.0, "FixedFractionStrategy: alpha_r + alpha_c must not exceed 1");
  }
};

/// Thresholds realized as order statistics: cells sorted by error descending
/// with ties broken by Morton order (earlier cell wins refinement); refine
/// flags take precedence if the two sets overlap.
inline RefinementFlags update_refinement_flags(const FixedFractionStrategy& strategy,
                                               const ErrorEstimator& estimator,
                                               const ForestMesh& mesh) {
  const int n = mesh.num_cells();
  FEMBOX_REQUIRE(static_cast<int>(estimator.estimated_errors_sq.size()) == n,
                 "update_refinement_flags: estimator does not match the mesh");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ea = estimator.estimated_errors_sq[static_cast<std::size_t>(a)];
    const double eb = estimator.estimated_errors_sq[static_cast<std::size_t>(b)];
    if (ea != eb) return ea > eb;
    return a < b;  // tie: earlier Morton position wins refinement
  });
  const int n_refine = static_cast<int>(std::ceil(strategy.alpha_r * n));
  const int n_coarsen = static_cast<int>(std::ceil(strategy.alpha_c * n));
  RefinementFlags flags = RefinementFlags::all(n, RefineFlag::keep);
  for (int k = 0; k < n_coarsen; ++k)
    flags.flags[static_cast<std::size_t>(order[static_cast<std::size_t>(n - 1 - k)])] =
        RefineFlag::coarsen;
  for (int k = 0; k < n_refine; ++k)
    flags.flags[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = RefineFlag::refine;
  return flags;
}

enum class SolverKind { direct, pcg };
enum class PrecKind { none, jacobi, bddc };

struct SolveConfig {
  int order = 1;
  Conformity formulation = Conformity::CG;
  ManufacturedSolution ms;
  DgParameters dg;
  SolverKind solver = SolverKind::direct;
  PrecKind preconditioner = PrecKind::none;
  int subdomain_parts = 4;
  double rtol = 1e-6;
  int max_iterations = 2000;
  // the sharp source is integrated with two extra Gauss points per axis
  int extra_load_points = 2;

  int load_points() const { return order + 1 + extra_load_points; }
};

struct AmrConfig {
  SolveConfig solve;
  int initial_uniform_steps = 2;
  int amr_steps = 8;
  double alpha_r = 0.1;
  double alpha_c = 0.05;
};

/// One solved mesh in an AMR or convergence sequence.
struct StepRecord {
  int step = 0;
  int cells = 0;
  int free_dofs = 0;
  int hanging_dofs = 0;
  double error = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::shared_ptr<ForestMesh> mesh;
  std::shared_ptr<FeSpace> space;
  std::shared_ptr<FeFunction> solution;
  ErrorEstimator estimator;
};

/// Assembles and solves the benchmark on one mesh.
inline StepRecord solve_on_mesh(std::shared_ptr<ForestMesh> mesh, const SolveConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.mesh = std::move(mesh);
  const ForestMesh& m = *rec.mesh;
  const int d = m.dim();
  const ScalarFunc exact = config.ms.value_func();
  const ScalarFunc source = config.ms.source_func(d);

  AffineOperator op;
  if (config.formulation == Conformity::CG) {
    rec.space = std::make_shared<FeSpace>(m, config.order, Conformity::CG,
                                          full_dirichlet(m, exact));
    const std::vector<double> g_h =
        interpolate_dirichlet_values(*rec.space, rec.space->boundary_conditions());
    op = integrate_cg(*rec.space, source, g_h, config.load_points());
    rec.solution = std::make_shared<FeFunction>(*rec.space);
    set_dirichlet_values(*rec.solution, g_h);
  } else {
    rec.space = std::make_shared<FeSpace>(m, config.order, Conformity::DG);
    op = integrate_dg(*rec.space, source, exact, config.dg, config.load_points());
    rec.solution = std::make_shared<FeFunction>(*rec.space);
  }

  std::vector<double> x;
  if (config.solver == SolverKind::direct) {
    x = cholesky_solve(op.matrix, op.rhs);
    rec.iterations = 0;
  } else {
    Preconditioner prec;
    std::unique_ptr<BddcPreconditioner> bddc;
    if (config.preconditioner == PrecKind::none) {
      prec = identity_preconditioner();
    } else if (config.preconditioner == PrecKind::jacobi) {
      prec = jacobi_preconditioner(op.matrix);
    } else {
      const int parts = std::min(config.subdomain_parts, m.num_cells());
      const Partition partition = partition_sfc(m, parts);
      auto problems = build_subdomain_problems(*rec.space, partition);
      const auto objects = classify_coarse_objects(*rec.space, partition);
      bddc = std::make_unique<BddcPreconditioner>(op.matrix, std::move(problems), objects,
                                                  CoarseDofSelection::corners_and_means);
      prec = bddc->as_preconditioner();
    }
    auto [sol, report] = pcg(op.matrix, op.rhs, prec, config.rtol, config.max_iterations);
    FEMBOX_NUMERIC_CHECK(report.converged, "solve_on_mesh: PCG did not converge within ",
                         config.max_iterations, " iterations");
    x = std::move(sol);
    rec.iterations = report.iterations;
  }
  rec.solution->set_free_values(x);
  update_hanging_dof_values(*rec.solution);

  rec.estimator = compute_local_true_errors(*rec.space, *rec.solution, config.ms);
  rec.error = rec.estimator.total;
  rec.cells = m.num_cells();
  rec.free_dofs = rec.space->num_free_dofs();
  rec.hanging_dofs = rec.space->num_hanging_dofs();
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// The AMR loop: uniformly refine a single-cell coarse mesh, then repeat
/// solve -> local errors -> fixed-fraction flags -> adapt.
inline std::vector<StepRecord> amr_loop(const AmrConfig& config) {
  FEMBOX_REQUIRE(config.initial_uniform_steps >= 0 && config.amr_steps >= 0,
                 "amr_loop: step counts must be non-negative");
  const FixedFractionStrategy strategy(config.alpha_r, config.alpha_c);
  auto mesh = std::make_shared<ForestMesh>(ForestMesh::adaptive_unit_box(2));
  for (int s = 0; s < config.initial_uniform_steps; ++s) {
    auto [refined, map] =
        refine_and_coarsen(*mesh, RefinementFlags::all(mesh->num_cells(), RefineFlag::refine));
    mesh = std::make_shared<ForestMesh>(std::move(refined));
  }
  std::vector<StepRecord> records;
  records.push_back(solve_on_mesh(mesh, config.solve));
  records.back().step = 0;
  for (int s = 1; s <= config.amr_steps; ++s) {
    const StepRecord& prev = records.back();
    const RefinementFlags flags =
        update_refinement_flags(strategy, prev.estimator, *prev.mesh);
    auto [adapted, map] = refine_and_coarsen(*prev.mesh, flags);
    auto next = std::make_shared<ForestMesh>(std::move(adapted));
    records.push_back(solve_on_mesh(next, config.solve));
    records.back().step = s;
  }
  return records;
}

}  // namespace fembox

#endif  // FEMBOX_ADAPT_HPP
