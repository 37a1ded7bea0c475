// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_INTEGRATION_HPP
#define FEMBOX_INTEGRATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "fembox/common.hpp"
#include "fembox/fespace.hpp"
#include "fembox/linalg.hpp"
#include "fembox/mesh.hpp"
#include "fembox/reference.hpp"

namespace fembox {

/// The discrete affine operator F_h(u) = A u - f over the free DoFs.
struct AffineOperator {
  CsrMatrix matrix;
  std::vector<double> rhs;
};

/// Interior-penalty DG parameters: tau in {-1, 0, 1} selects the method
/// variant; the penalty is gamma = penalty_factor * q^2, applied with the
/// facet-measure factor |F|^-1.
struct DgParameters {
  double tau = 1.0;
  double penalty_factor = 10.0;

  double gamma(int order) const { return penalty_factor * order * order; }
};

/// Per-cell DoF expansion: each local DoF maps to global (dof, coefficient)
/// pairs; hanging DoFs expand into their constraint masters.
inline void cell_dof_expansion(const FeSpace& space, int c,
                               std::vector<std::vector<std::pair<int, double>>>& expansion) {
  const int npc = space.dofs_per_cell();
  expansion.assign(static_cast<std::size_t>(npc), {});
  for (int a = 0; a < npc; ++a) {
    const int dof = space.cell_dof(c, a);
    if (space.is_hanging(dof)) {
      const auto& con =
          space.constraints()[static_cast<std::size_t>(dof - space.num_free_dofs() -
                                                       space.num_fixed_dofs())];
      expansion[static_cast<std::size_t>(a)] = con.masters;
    } else {
      expansion[static_cast<std::size_t>(a)] = {{dof, 1.0}};
    }
  }
}

/// Cell arrays after hanging-constraint application: the congruence transform
/// C^T A_K C and C^T f_K over the expanded (global) DoF set.
struct ConstrainedCellSystem {
  std::vector<int> dofs;       // expanded global DoFs, ascending
  std::vector<double> matrix;  // dense |dofs| x |dofs|, row major
  std::vector<double> rhs;
};

inline ConstrainedCellSystem apply_constraints_to_cell(
    const std::vector<double>& cell_matrix, const std::vector<double>& cell_rhs,
    const std::vector<std::vector<std::pair<int, double>>>& expansion) {
  const int npc = static_cast<int>(cell_rhs.size());
  FEMBOX_REQUIRE(static_cast<int>(cell_matrix.size()) == npc * npc,
                 "apply_constraints_to_cell: matrix/vector size mismatch");
  ConstrainedCellSystem out;
  for (const auto& terms : expansion)
    for (const auto& [dof, coeff] : terms) out.dofs.push_back(dof);
  std::sort(out.dofs.begin(), out.dofs.end());
  out.dofs.erase(std::unique(out.dofs.begin(), out.dofs.end()), out.dofs.end());
  const int m = static_cast<int>(out.dofs.size());
  auto pos = [&](int dof) {
    return static_cast<int>(std::lower_bound(out.dofs.begin(), out.dofs.end(), dof) -
                            out.dofs.begin());
  };
  out.matrix.assign(static_cast<std::size_t>(m) * m, 0.0);
  out.rhs.assign(static_cast<std::size_t>(m), 0.0);
  for (int a = 0; a < npc; ++a) {
    for (const auto& [ga, ca] : expansion[static_cast<std::size_t>(a)]) {
      const int pa = pos(ga);
      out.rhs[static_cast<std::size_t>(pa)] += ca * cell_rhs[static_cast<std::size_t>(a)];
      for (int b = 0; b < npc; ++b) {
        const double v = cell_matrix[static_cast<std::size_t>(a) * npc + b];
        if (v == 0.0) continue;
        for (const auto& [gb, cb] : expansion[static_cast<std::size_t>(b)])
          out.matrix[static_cast<std::size_t>(pa) * m + pos(gb)] += ca * v * cb;
      }
    }
  }
  return out;
}

namespace detail {

/// Deterministic CSR skeleton from (row, col) index pairs.
inline CsrMatrix pattern_to_csr(int n, std::vector<std::array<int, 2>>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  CsrMatrix a;
  a.n = n;
  a.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  a.col_idx.reserve(pairs.size());
  for (const auto& p : pairs) {
    ++a.row_ptr[static_cast<std::size_t>(p[0]) + 1];
    a.col_idx.push_back(p[1]);
  }
  for (int i = 0; i < n; ++i)
    a.row_ptr[static_cast<std::size_t>(i) + 1] += a.row_ptr[static_cast<std::size_t>(i)];
  a.values.assign(pairs.size(), 0.0);
  return a;
}

inline void csr_add(CsrMatrix& a, int i, int j, double v) {
  const auto begin = a.col_idx.begin() + a.row_ptr[static_cast<std::size_t>(i)];
  const auto end = a.col_idx.begin() + a.row_ptr[static_cast<std::size_t>(i) + 1];
  const auto it = std::lower_bound(begin, end, j);
  a.values[static_cast<std::size_t>(it - a.col_idx.begin())] += v;
}

/// Reference-cell shape tables at the quadrature points.
struct ShapeTables {
  std::vector<std::vector<double>> values;   // [gp][a]
  std::vector<std::vector<Point>> gradients; // [gp][a], reference gradients

  ShapeTables(const ReferenceElement& elem, const Quadrature& quad) {
    values.reserve(static_cast<std::size_t>(quad.size()));
    gradients.reserve(static_cast<std::size_t>(quad.size()));
    for (int g = 0; g < quad.size(); ++g) {
      values.push_back(elem.shape_values(quad.points[static_cast<std::size_t>(g)]));
      gradients.push_back(elem.shape_gradients(quad.points[static_cast<std::size_t>(g)]));
    }
  }
};

/// Dense cell stiffness and load: A_K[a][b] = int_K grad phi_b . grad phi_a
/// by the stiffness rule `quad`, f_K[a] = int_K f phi_a by `load_quad` (the
/// stiffness rule is exact on affine bricks; the load rule may carry extra
/// points for rough sources).
inline void cell_laplace_system(const FeSpace& space, int c, const Quadrature& quad,
                                const ShapeTables& tables, const ScalarFunc& source,
                                const Quadrature& load_quad, const ShapeTables& load_tables,
                                std::vector<double>& cell_matrix,
                                std::vector<double>& cell_rhs) {
  const int npc = space.dofs_per_cell();
  const int d = space.mesh().dim();
  const CellMap map = space.mesh().cell_map(c);
  const double jac = map.jacobian_det();
  cell_matrix.assign(static_cast<std::size_t>(npc) * npc, 0.0);
  cell_rhs.assign(static_cast<std::size_t>(npc), 0.0);
  for (int g = 0; g < quad.size(); ++g) {
    const double w = quad.weights[static_cast<std::size_t>(g)] * jac;
    const auto& grads = tables.gradients[static_cast<std::size_t>(g)];
    for (int a = 0; a < npc; ++a) {
      for (int b = 0; b < npc; ++b) {
        double dotg = 0.0;
        for (int ax = 0; ax < d; ++ax)
          dotg += (grads[static_cast<std::size_t>(a)][ax] / map.half[ax]) *
                  (grads[static_cast<std::size_t>(b)][ax] / map.half[ax]);
        cell_matrix[static_cast<std::size_t>(a) * npc + b] += w * dotg;
      }
    }
  }
  for (int g = 0; g < load_quad.size(); ++g) {
    const double w = load_quad.weights[static_cast<std::size_t>(g)] * jac;
    const auto& vals = load_tables.values[static_cast<std::size_t>(g)];
    const double fval = source(map.to_physical(load_quad.points[static_cast<std::size_t>(g)]));
    for (int a = 0; a < npc; ++a)
      cell_rhs[static_cast<std::size_t>(a)] += w * fval * vals[static_cast<std::size_t>(a)];
  }
}

}  // namespace detail

/// Constrained stiffness contribution of one cell (no load, no Dirichlet
/// elimination). Used for sub-assembled per-subdomain matrices.
inline ConstrainedCellSystem constrained_cell_stiffness(const FeSpace& space, int c) {
  const Quadrature quad = gauss_quadrature(space.mesh().dim(), space.order() + 1);
  const detail::ShapeTables tables(space.element(), quad);
  std::vector<double> cell_matrix, cell_rhs;
  const ScalarFunc zero = [](const Point&) { return 0.0; };
  detail::cell_laplace_system(space, c, quad, tables, zero, quad, tables, cell_matrix, cell_rhs);
  std::vector<std::vector<std::pair<int, double>>> expansion;
  cell_dof_expansion(space, c, expansion);
  return apply_constraints_to_cell(cell_matrix, cell_rhs, expansion);
}

/// Assembles the conforming Poisson operator over the free DoFs: cell-wise
/// stiffness with hanging constraints applied right before assembly, and
/// Dirichlet columns moved to the right-hand side.
inline AffineOperator integrate_cg(const FeSpace& space, const ScalarFunc& source,
                                   const std::vector<double>& dirichlet_values,
                                   int load_quadrature_points = 0) {
  FEMBOX_REQUIRE(space.conformity() == Conformity::CG, "integrate_cg: requires a CG space");
  FEMBOX_REQUIRE(static_cast<int>(dirichlet_values.size()) == space.num_fixed_dofs(),
                 "integrate_cg: Dirichlet value count mismatch");
  const ForestMesh& mesh = space.mesh();
  const int n = space.num_free_dofs();
  const Quadrature quad = gauss_quadrature(mesh.dim(), space.order() + 1);
  const detail::ShapeTables tables(space.element(), quad);
  const Quadrature load_quad =
      load_quadrature_points > 0 ? gauss_quadrature(mesh.dim(), load_quadrature_points) : quad;
  const detail::ShapeTables load_tables =
      load_quadrature_points > 0 ? detail::ShapeTables(space.element(), load_quad) : tables;

  // symbolic pass
  std::vector<std::array<int, 2>> pairs;
  std::vector<std::vector<std::pair<int, double>>> expansion;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    cell_dof_expansion(space, c, expansion);
    std::vector<int> frees;
    for (const auto& terms : expansion)
      for (const auto& [dof, coeff] : terms)
        if (space.is_free(dof)) frees.push_back(dof);
    std::sort(frees.begin(), frees.end());
    frees.erase(std::unique(frees.begin(), frees.end()), frees.end());
    for (int r : frees)
      for (int cidx : frees) pairs.push_back({r, cidx});
  }
  AffineOperator op;
  op.matrix = detail::pattern_to_csr(n, pairs);
  op.rhs.assign(static_cast<std::size_t>(n), 0.0);

  // numeric pass
  std::vector<double> cell_matrix, cell_rhs;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    detail::cell_laplace_system(space, c, quad, tables, source, load_quad, load_tables,
                                cell_matrix, cell_rhs);
    cell_dof_expansion(space, c, expansion);
    const ConstrainedCellSystem sys = apply_constraints_to_cell(cell_matrix, cell_rhs, expansion);
    const int m = static_cast<int>(sys.dofs.size());
    for (int p = 0; p < m; ++p) {
      const int gr = sys.dofs[static_cast<std::size_t>(p)];
      if (!space.is_free(gr)) continue;
      op.rhs[static_cast<std::size_t>(gr)] += sys.rhs[static_cast<std::size_t>(p)];
      for (int qd = 0; qd < m; ++qd) {
        const int gc = sys.dofs[static_cast<std::size_t>(qd)];
        const double v = sys.matrix[static_cast<std::size_t>(p) * m + qd];
        if (v == 0.0) continue;
        if (space.is_free(gc)) {
          detail::csr_add(op.matrix, gr, gc, v);
        } else if (space.is_fixed(gc)) {
          op.rhs[static_cast<std::size_t>(gr)] -=
              v * dirichlet_values[static_cast<std::size_t>(gc - n)];
        }
        // hanging columns cannot appear: the expansion removed them
      }
    }
  }
  return op;
}

/// Assembles the interior-penalty DG Poisson operator: cell terms, the four
/// facet matrices per interior facet, and the weak Dirichlet boundary terms
/// evaluated with the analytical boundary function.
inline AffineOperator integrate_dg(const FeSpace& space, const ScalarFunc& source,
                                   const ScalarFunc& boundary_g, const DgParameters& params,
                                   int load_quadrature_points = 0) {
  FEMBOX_REQUIRE(space.conformity() == Conformity::DG, "integrate_dg: requires a DG space");
  FEMBOX_REQUIRE(params.tau == 1.0 || params.tau == 0.0 || params.tau == -1.0,
                 "integrate_dg: tau must be one of {-1, 0, 1}");
  FEMBOX_REQUIRE(params.penalty_factor > 0.0, "integrate_dg: penalty factor must be positive");
  const ForestMesh& mesh = space.mesh();
  const int d = mesh.dim();
  const int n = space.num_free_dofs();
  const int npc = space.dofs_per_cell();
  const double gamma = params.gamma(space.order());
  const double tau = params.tau;
  const Quadrature cell_quad = gauss_quadrature(d, space.order() + 1);
  const Quadrature facet_quad = gauss_quadrature(d - 1, space.order() + 1);
  const detail::ShapeTables tables(space.element(), cell_quad);
  const Quadrature load_quad =
      load_quadrature_points > 0 ? gauss_quadrature(d, load_quadrature_points) : cell_quad;
  const detail::ShapeTables load_tables =
      load_quadrature_points > 0 ? detail::ShapeTables(space.element(), load_quad) : tables;

  // symbolic pass: cell blocks plus facet cross blocks
  std::vector<std::array<int, 2>> pairs;
  auto block = [&](int ca, int cb) {
    for (int a = 0; a < npc; ++a)
      for (int b = 0; b < npc; ++b)
        pairs.push_back({space.cell_dof(ca, a), space.cell_dof(cb, b)});
  };
  for (int c = 0; c < mesh.num_cells(); ++c) block(c, c);
  for (const auto& f : mesh.interior_facets()) {
    block(f.cell_plus, f.cell_minus);
    block(f.cell_minus, f.cell_plus);
  }
  AffineOperator op;
  op.matrix = detail::pattern_to_csr(n, pairs);
  op.rhs.assign(static_cast<std::size_t>(n), 0.0);

  // cell terms
  std::vector<double> cell_matrix, cell_rhs;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    detail::cell_laplace_system(space, c, cell_quad, tables, source, load_quad, load_tables,
                                cell_matrix, cell_rhs);
    for (int a = 0; a < npc; ++a) {
      const int ga = space.cell_dof(c, a);
      op.rhs[static_cast<std::size_t>(ga)] += cell_rhs[static_cast<std::size_t>(a)];
      for (int b = 0; b < npc; ++b)
        detail::csr_add(op.matrix, ga, space.cell_dof(c, b),
                        cell_matrix[static_cast<std::size_t>(a) * npc + b]);
    }
  }

  // interior facets: the four facet-wise matrices
  const ReferenceElement& elem = space.element();
  for (const auto& f : mesh.interior_facets()) {
    const CellMap map_plus = mesh.cell_map(f.cell_plus);
    const CellMap map_minus = mesh.cell_map(f.cell_minus);
    const TwoSidedFacetGeometry geo =
        two_sided_facet_geometry(map_plus, f.facet_plus, map_minus, f.facet_minus, facet_quad);
    const int cells[2] = {f.cell_plus, f.cell_minus};
    const Point normals[2] = {geo.normal_plus, geo.normal_minus};
    const int ngp = static_cast<int>(geo.phys_points.size());
    // per-side shape values and physical gradients at the integration points
    std::vector<std::vector<double>> vals[2];
    std::vector<std::vector<Point>> grads[2];
    for (int s = 0; s < 2; ++s) {
      const CellMap& map = s == 0 ? map_plus : map_minus;
      const auto& xi = s == 0 ? geo.xi_plus : geo.xi_minus;
      vals[s].resize(static_cast<std::size_t>(ngp));
      grads[s].resize(static_cast<std::size_t>(ngp));
      for (int g = 0; g < ngp; ++g) {
        vals[s][static_cast<std::size_t>(g)] = elem.shape_values(xi[static_cast<std::size_t>(g)]);
        auto rg = elem.shape_gradients(xi[static_cast<std::size_t>(g)]);
        grads[s][static_cast<std::size_t>(g)].resize(static_cast<std::size_t>(npc));
        for (int a = 0; a < npc; ++a)
          grads[s][static_cast<std::size_t>(g)][static_cast<std::size_t>(a)] =
              map.push_gradient(rg[static_cast<std::size_t>(a)]);
      }
    }
    const double penalty = gamma / geo.measure;
    for (int alpha = 0; alpha < 2; ++alpha) {
      for (int beta = 0; beta < 2; ++beta) {
        const double nn = dot(normals[alpha], normals[beta]);  // +1 same side, -1 across
        for (int g = 0; g < ngp; ++g) {
          const double w = geo.scaled_weights[static_cast<std::size_t>(g)];
          const auto& va = vals[alpha][static_cast<std::size_t>(g)];
          const auto& vb = vals[beta][static_cast<std::size_t>(g)];
          const auto& ga = grads[alpha][static_cast<std::size_t>(g)];
          const auto& gb = grads[beta][static_cast<std::size_t>(g)];
          for (int a = 0; a < npc; ++a) {
            const double na_grad_a = dot(normals[beta], ga[static_cast<std::size_t>(a)]);
            for (int b = 0; b < npc; ++b) {
              // -int [phi_b^beta].{grad phi_a^alpha} - tau int [phi_a^alpha].{grad phi_b^beta}
              // + gamma |F|^-1 int [phi_a^alpha].[phi_b^beta]
              const double jump_mean_1 =
                  vb[static_cast<std::size_t>(b)] * 0.5 * na_grad_a;
              const double jump_mean_2 = va[static_cast<std::size_t>(a)] * 0.5 *
                                         dot(normals[alpha], gb[static_cast<std::size_t>(b)]);
              const double pen = penalty * nn * va[static_cast<std::size_t>(a)] *
                                 vb[static_cast<std::size_t>(b)];
              const double v = w * (-jump_mean_1 - tau * jump_mean_2 + pen);
              detail::csr_add(op.matrix, space.cell_dof(cells[alpha], a),
                              space.cell_dof(cells[beta], b), v);
            }
          }
        }
      }
    }
  }

  // boundary facets: weak Dirichlet terms
  for (const auto& f : mesh.boundary_facets()) {
    const CellMap map = mesh.cell_map(f.cell);
    const FacetMap fmap{d, f.facet, -1};
    const FacetGeometry geo = facet_geometry(map, fmap, facet_quad);
    const double penalty = gamma / geo.measure;
    const Point n_out = geo.normal;
    for (int g = 0; g < static_cast<int>(geo.phys_points.size()); ++g) {
      const double w = geo.scaled_weights[static_cast<std::size_t>(g)];
      const Point xi = fmap.to_cell_reference(facet_quad.points[static_cast<std::size_t>(g)]);
      const auto va = elem.shape_values(xi);
      auto rg = elem.shape_gradients(xi);
      std::vector<Point> pg(static_cast<std::size_t>(npc));
      for (int a = 0; a < npc; ++a)
        pg[static_cast<std::size_t>(a)] = map.push_gradient(rg[static_cast<std::size_t>(a)]);
      const double gval = boundary_g(geo.phys_points[static_cast<std::size_t>(g)]);
      for (int a = 0; a < npc; ++a) {
        const int gdof_a = space.cell_dof(f.cell, a);
        op.rhs[static_cast<std::size_t>(gdof_a)] +=
            w * (-tau * gval * dot(n_out, pg[static_cast<std::size_t>(a)]) +
                 penalty * gval * va[static_cast<std::size_t>(a)]);
        for (int b = 0; b < npc; ++b) {
          const double v =
              w * (-va[static_cast<std::size_t>(b)] * dot(n_out, pg[static_cast<std::size_t>(a)]) -
                   tau * va[static_cast<std::size_t>(a)] * dot(n_out, pg[static_cast<std::size_t>(b)]) +
                   penalty * va[static_cast<std::size_t>(a)] * va[static_cast<std::size_t>(b)]);
          detail::csr_add(op.matrix, gdof_a, space.cell_dof(f.cell, b), v);
        }
      }
    }
  }
  return op;
}

}  // namespace fembox

#endif  // FEMBOX_INTEGRATION_HPP
