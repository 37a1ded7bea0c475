// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_FESPACE_HPP
#define FEMBOX_FESPACE_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "fembox/common.hpp"
#include "fembox/mesh.hpp"
#include "fembox/reference.hpp"

namespace fembox {

/// Dirichlet data: one scalar function per boundary region id.
struct StrongBoundaryConditions {
  std::vector<std::pair<int, ScalarFunc>> entries;

  void add(int set_id, ScalarFunc g) {
    for (const auto& [id, fn] : entries)
      FEMBOX_REQUIRE(id != set_id, "StrongBoundaryConditions: duplicate set id ", set_id);
    entries.emplace_back(set_id, std::move(g));
  }

  const ScalarFunc* find(int set_id) const {
    for (const auto& [id, fn] : entries)
      if (id == set_id) return &fn;
    return nullptr;
  }
};

enum class Conformity { CG, DG };

/// Algebraic constraint of one hanging DoF on non-hanging master DoFs.
struct HangingConstraint {
  int dof = -1;
  std::vector<std::pair<int, double>> masters;  // (master dof id, coefficient)
};

/// Global FE space on a ForestMesh: Lagrangian Q_q, either H1-conforming with
/// strong Dirichlet regions and hanging-node constraints, or fully
/// discontinuous with cell-local DoFs.
///
/// Global DoF ids are grouped as [ free | fixed | hanging ]. Free DoFs are
/// numbered by (owning entity in Morton order, local index), vef entities
/// first and cell-interior blocks last.
class FeSpace {
 public:
  FeSpace(const ForestMesh& mesh, int order, Conformity conf,
          std::optional<StrongBoundaryConditions> bcs = std::nullopt)
      : mesh_(&mesh), order_(order), conf_(conf), elem_(mesh.dim(), order) {
    if (conf == Conformity::CG) {
      FEMBOX_REQUIRE(!mesh.is_adaptive() || mesh.is_balanced(),
                     "FeSpace: CG spaces require a 2:1 balanced mesh");
      FEMBOX_REQUIRE(bcs.has_value() && !bcs->entries.empty(),
                     "FeSpace: CG spaces require strong boundary conditions");
      for (const auto& [id, fn] : bcs->entries)
        FEMBOX_REQUIRE(id >= 1 && id < mesh.interior_region_id(),
                       "FeSpace: boundary condition set id ", id,
                       " is not a boundary region id");
      bcs_ = std::move(*bcs);
      build_cg();
    } else {
      FEMBOX_REQUIRE(!bcs.has_value(),
                     "FeSpace: DG spaces impose boundary conditions weakly; "
                     "no strong boundary conditions allowed");
      build_dg();
    }
  }

  const ForestMesh& mesh() const { return *mesh_; }
  int order() const { return order_; }
  Conformity conformity() const { return conf_; }
  const ReferenceElement& element() const { return elem_; }
  const StrongBoundaryConditions& boundary_conditions() const { return bcs_; }

  int num_free_dofs() const { return n_free_; }
  int num_fixed_dofs() const { return n_fixed_; }
  int num_hanging_dofs() const { return n_hanging_; }
  int num_dofs() const { return n_free_ + n_fixed_ + n_hanging_; }

  bool is_free(int dof) const { return dof < n_free_; }
  bool is_fixed(int dof) const { return dof >= n_free_ && dof < n_free_ + n_fixed_; }
  bool is_hanging(int dof) const { return dof >= n_free_ + n_fixed_; }

  int dofs_per_cell() const { return elem_.num_nodes(); }

  /// Global DoF of local node `a` of cell `c`.
  int cell_dof(int c, int a) const {
    return cell_dofs_[static_cast<std::size_t>(c) * dofs_per_cell() + a];
  }

  const Point& dof_coords(int dof) const { return dof_coords_[static_cast<std::size_t>(dof)]; }

  /// Constraints indexed by hanging DoF (dof id - n_free - n_fixed).
  const std::vector<HangingConstraint>& constraints() const { return constraints_; }

  /// Boundary region id that fixed DoF `dof` belongs to.
  int fixed_dof_set_id(int dof) const {
    return fixed_set_id_[static_cast<std::size_t>(dof - n_free_)];
  }

 private:
  void build_dg() {
    const int npc = dofs_per_cell();
    n_free_ = mesh_->num_cells() * npc;
    n_fixed_ = 0;
    n_hanging_ = 0;
    cell_dofs_.resize(static_cast<std::size_t>(n_free_));
    dof_coords_.resize(static_cast<std::size_t>(n_free_));
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const CellMap map = mesh_->cell_map(c);
      for (int a = 0; a < npc; ++a) {
        const int dof = c * npc + a;
        cell_dofs_[static_cast<std::size_t>(dof)] = dof;
        dof_coords_[static_cast<std::size_t>(dof)] = map.to_physical(elem_.node_point(a));
      }
    }
  }

  // provisional per-entity DoF blocks; entities = mesh vefs + cell interiors
  struct EntityBlock {
    int first = 0;
    int count = 0;
  };

  int vef_dof_count(const Vef& v) const {
    const int q = order_;
    if (v.dim == 0) return 1;
    if (v.dim == 1) return q - 1;
    return (q - 1) * (q - 1);
  }

  void build_cg() {
    const int q = order_;
    const int d = mesh_->dim();
    const int nvefs = static_cast<int>(mesh_->vefs().size());

    // entity order: vefs by Morton order of their doubled midpoint, cells after
    std::vector<int> vef_order(static_cast<std::size_t>(nvefs));
    for (int i = 0; i < nvefs; ++i) vef_order[static_cast<std::size_t>(i)] = i;
    std::sort(vef_order.begin(), vef_order.end(), [&](int a, int b) {
      const Vef& va = mesh_->vef(a);
      const Vef& vb = mesh_->vef(b);
      std::array<std::int64_t, 3> ma{0, 0, 0}, mb{0, 0, 0};
      for (int ax = 0; ax < d; ++ax) {
        ma[ax] = 2 * va.anchor[ax] + va.ext[ax];
        mb[ax] = 2 * vb.anchor[ax] + vb.ext[ax];
      }
      std::int64_t max_res = 1;
      for (int ax = 0; ax < d; ++ax) max_res = std::max(max_res, mesh_->resolution()[ax]);
      int bits = 1;
      while ((std::int64_t{1} << bits) <= 2 * max_res) ++bits;
      const std::uint64_t ka = morton_interleave(d, ma, bits);
      const std::uint64_t kb = morton_interleave(d, mb, bits);
      if (ka != kb) return ka < kb;
      return va.dim < vb.dim;
    });

    std::vector<EntityBlock> vef_blocks(static_cast<std::size_t>(nvefs));
    std::vector<EntityBlock> cell_blocks(static_cast<std::size_t>(mesh_->num_cells()));
    int next = 0;
    for (int idx : vef_order) {
      const int count = vef_dof_count(mesh_->vef(idx));
      vef_blocks[static_cast<std::size_t>(idx)] = {next, count};
      next += count;
    }
    const int interior_per_cell = [&] {
      int n = 1;
      for (int a = 0; a < d; ++a) n *= q - 1;
      return n;
    }();
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      cell_blocks[static_cast<std::size_t>(c)] = {next, interior_per_cell};
      next += interior_per_cell;
    }
    const int n_total = next;

    // classification: 0 free, 1 fixed, 2 hanging
    std::vector<int> cls(static_cast<std::size_t>(n_total), 0);
    std::vector<int> prov_set_id(static_cast<std::size_t>(n_total), 0);
    for (int v = 0; v < nvefs; ++v) {
      const Vef& vef = mesh_->vef(v);
      const EntityBlock& blk = vef_blocks[static_cast<std::size_t>(v)];
      int kind = 0;
      if (bcs_.find(vef.set_id) != nullptr)
        kind = 1;  // boundary wins over hanging
      else if (vef.is_hanging)
        kind = 2;
      for (int k = 0; k < blk.count; ++k) {
        cls[static_cast<std::size_t>(blk.first + k)] = kind;
        prov_set_id[static_cast<std::size_t>(blk.first + k)] = vef.set_id;
      }
    }

    // provisional -> final ids: free, then fixed, then hanging
    n_free_ = n_fixed_ = n_hanging_ = 0;
    for (int i = 0; i < n_total; ++i) {
      if (cls[static_cast<std::size_t>(i)] == 0) ++n_free_;
      else if (cls[static_cast<std::size_t>(i)] == 1) ++n_fixed_;
      else ++n_hanging_;
    }
    std::vector<int> final_id(static_cast<std::size_t>(n_total));
    int f = 0, x = n_free_, h = n_free_ + n_fixed_;
    // walk in entity (numbering) order so free dofs follow the entity order
    for (int idx : vef_order) {
      const EntityBlock& blk = vef_blocks[static_cast<std::size_t>(idx)];
      for (int k = 0; k < blk.count; ++k) {
        const int p = blk.first + k;
        const int kind = cls[static_cast<std::size_t>(p)];
        final_id[static_cast<std::size_t>(p)] = kind == 0 ? f++ : kind == 1 ? x++ : h++;
      }
    }
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const EntityBlock& blk = cell_blocks[static_cast<std::size_t>(c)];
      for (int k = 0; k < blk.count; ++k) {
        const int p = blk.first + k;
        final_id[static_cast<std::size_t>(p)] = f++;  // interiors are always free
      }
    }

    fixed_set_id_.assign(static_cast<std::size_t>(n_fixed_), 0);
    dof_coords_.assign(static_cast<std::size_t>(n_total), Point{0, 0, 0});
    for (int v = 0; v < nvefs; ++v) {
      const Vef& vef = mesh_->vef(v);
      const EntityBlock& blk = vef_blocks[static_cast<std::size_t>(v)];
      for (int k = 0; k < blk.count; ++k) {
        const int p = blk.first + k;
        const int id = final_id[static_cast<std::size_t>(p)];
        dof_coords_[static_cast<std::size_t>(id)] = vef_node_coords(vef, k);
        if (cls[static_cast<std::size_t>(p)] == 1)
          fixed_set_id_[static_cast<std::size_t>(id - n_free_)] = vef.set_id;
      }
    }
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      const EntityBlock& blk = cell_blocks[static_cast<std::size_t>(c)];
      const CellMap map = mesh_->cell_map(c);
      for (int k = 0; k < blk.count; ++k) {
        std::array<int, 3> lat{0, 0, 0};
        int rem = k;
        for (int ax = 0; ax < d; ++ax) {
          lat[ax] = rem % (q - 1) + 1;
          rem /= q - 1;
        }
        Point xi{0, 0, 0};
        for (int ax = 0; ax < d; ++ax) xi[ax] = -1.0 + 2.0 * lat[ax] / q;
        const int id = final_id[static_cast<std::size_t>(blk.first + k)];
        dof_coords_[static_cast<std::size_t>(id)] = map.to_physical(xi);
      }
    }

    // cell local -> global map via the sub-entity of each lattice node
    const int npc = dofs_per_cell();
    cell_dofs_.assign(static_cast<std::size_t>(mesh_->num_cells()) * npc, -1);
    const auto& codes = detail::subentity_codes(d);
    std::vector<int> local_of_code(static_cast<std::size_t>(d == 2 ? 9 : 27), -1);
    for (int l = 0; l < static_cast<int>(codes.size()); ++l)
      local_of_code[static_cast<std::size_t>(codes[static_cast<std::size_t>(l)])] = l;
    for (int c = 0; c < mesh_->num_cells(); ++c) {
      for (int a = 0; a < npc; ++a) {
        const auto lat = elem_.node_lattice(a);
        int code = 0, pw = 1, interior_axes = 0;
        for (int ax = 0; ax < d; ++ax) {
          const int s = lat[ax] == 0 ? 0 : lat[ax] == q ? 1 : 2;
          if (s == 2) ++interior_axes;
          code += s * pw;
          pw *= 3;
        }
        int prov;
        if (interior_axes == d) {
          int off = 0, mul = 1;
          for (int ax = 0; ax < d; ++ax) {
            off += (lat[ax] - 1) * mul;
            mul *= q - 1;
          }
          prov = cell_blocks[static_cast<std::size_t>(c)].first + off;
        } else {
          const int local = local_of_code[static_cast<std::size_t>(code)];
          const int vid = mesh_->cell_vef(c, local);
          int off = 0, mul = 1;
          for (int ax = 0; ax < d; ++ax) {
            if (lat[ax] == 0 || lat[ax] == q) continue;
            off += (lat[ax] - 1) * mul;
            mul *= q - 1;
          }
          prov = vef_blocks[static_cast<std::size_t>(vid)].first + off;
        }
        cell_dofs_[static_cast<std::size_t>(c) * npc + a] = final_id[static_cast<std::size_t>(prov)];
      }
    }

    build_constraints(vef_blocks, final_id);
  }

  /// Physical coordinates of node k of a vef's DoF block (lattice order,
  /// lower spanned axis fastest).
  Point vef_node_coords(const Vef& vef, int k) const {
    const int q = order_;
    std::array<double, 3> frac{0, 0, 0};
    if (vef.dim == 0) {
      // single node at the vertex
    } else if (vef.dim == 1) {
      const int t = vef.ext[0] > 0 ? 0 : vef.ext[1] > 0 ? 1 : 2;
      frac[t] = static_cast<double>(k + 1) / q;
    } else {
      int ts[2], nt = 0;
      for (int a = 0; a < 3; ++a)
        if (vef.ext[a] > 0) ts[nt++] = a;
      frac[ts[0]] = static_cast<double>(k % (q - 1) + 1) / q;
      frac[ts[1]] = static_cast<double>(k / (q - 1) + 1) / q;
    }
    Point p{0, 0, 0};
    for (int a = 0; a < mesh_->dim(); ++a) {
      const double lo = static_cast<double>(vef.anchor[a]) / static_cast<double>(mesh_->resolution()[a]);
      const double len = static_cast<double>(vef.ext[a]) / static_cast<double>(mesh_->resolution()[a]);
      p[a] = lo + frac[a] * len;
    }
    return p;
  }

  void build_constraints(const std::vector<EntityBlock>& vef_blocks,
                         const std::vector<int>& final_id) {
    constraints_.assign(static_cast<std::size_t>(n_hanging_), HangingConstraint{});
    const int q = order_;
    const ReferenceElement line(1, q);
    for (int v = 0; v < static_cast<int>(mesh_->vefs().size()); ++v) {
      const Vef& vef = mesh_->vef(v);
      if (!vef.is_hanging) continue;
      const EntityBlock& blk = vef_blocks[static_cast<std::size_t>(v)];
      if (blk.count == 0) continue;
      const Vef& coarse = mesh_->vef(vef.hanging_parent);
      FEMBOX_REQUIRE(!coarse.is_hanging, "FeSpace: hanging constraint master entity is hanging");
      const int t = coarse.ext[0] > 0 ? 0 : 1;

      // master dofs: the (q+1) facet nodes of the coarse edge in 1D node order
      std::vector<int> master_dofs(static_cast<std::size_t>(q + 1));
      {
        const auto [cc, clocal] = coarse.incident_cells[0];
        const auto& codes = detail::subentity_codes(mesh_->dim());
        const int ecode = codes[static_cast<std::size_t>(clocal)];
        const int pw = t == 0 ? 1 : 3;
        const int lo_code = ecode - 2 * pw + 0 * pw;
        const int hi_code = ecode - 2 * pw + 1 * pw;
        std::vector<int> local_of_code(static_cast<std::size_t>(mesh_->dim() == 2 ? 9 : 27), -1);
        for (int l = 0; l < static_cast<int>(codes.size()); ++l)
          local_of_code[static_cast<std::size_t>(codes[static_cast<std::size_t>(l)])] = l;
        const int vlo = mesh_->cell_vef(cc, local_of_code[static_cast<std::size_t>(lo_code)]);
        const int vhi = mesh_->cell_vef(cc, local_of_code[static_cast<std::size_t>(hi_code)]);
        master_dofs[0] = final_id[static_cast<std::size_t>(vef_blocks[static_cast<std::size_t>(vlo)].first)];
        master_dofs[static_cast<std::size_t>(q)] =
            final_id[static_cast<std::size_t>(vef_blocks[static_cast<std::size_t>(vhi)].first)];
        for (int k = 1; k < q; ++k)
          master_dofs[static_cast<std::size_t>(k)] = final_id[static_cast<std::size_t>(
              vef_blocks[static_cast<std::size_t>(vef.hanging_parent)].first + (k - 1))];
      }
      for (int dof : master_dofs)
        FEMBOX_REQUIRE(!is_hanging(dof), "FeSpace: hanging constraint has a hanging master");

      for (int k = 0; k < blk.count; ++k) {
        const int dof = final_id[static_cast<std::size_t>(blk.first + k)];
        // embedded 1D coordinate of the hanging node on the coarse edge
        double tpos;
        if (vef.dim == 0) {
          tpos = static_cast<double>(vef.anchor[t] - coarse.anchor[t]) /
                 static_cast<double>(coarse.ext[t]);
        } else {
          const double node = static_cast<double>(vef.anchor[t]) +
                              static_cast<double>(k + 1) / q * static_cast<double>(vef.ext[t]);
          tpos = (node - static_cast<double>(coarse.anchor[t])) /
                 static_cast<double>(coarse.ext[t]);
        }
        const double xi = 2.0 * tpos - 1.0;
        HangingConstraint con;
        con.dof = dof;
        for (int m = 0; m <= q; ++m)
          con.masters.emplace_back(master_dofs[static_cast<std::size_t>(m)],
                                   line.lagrange_1d(m, xi));
        constraints_[static_cast<std::size_t>(dof - n_free_ - n_fixed_)] = std::move(con);
      }
    }
  }

  const ForestMesh* mesh_;
  int order_;
  Conformity conf_;
  ReferenceElement elem_;
  StrongBoundaryConditions bcs_;
  int n_free_ = 0, n_fixed_ = 0, n_hanging_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<Point> dof_coords_;
  std::vector<int> fixed_set_id_;
  std::vector<HangingConstraint> constraints_;
};

inline FeSpace build_fe_space(const ForestMesh& mesh, int order, Conformity conf,
                              std::optional<StrongBoundaryConditions> bcs = std::nullopt) {
  return FeSpace(mesh, order, conf, std::move(bcs));
}

/// Dirichlet data imposed with one function on every boundary region of the
/// unit box.
inline StrongBoundaryConditions full_dirichlet(const ForestMesh& mesh, const ScalarFunc& g) {
  StrongBoundaryConditions bcs;
  for (int id = 1; id < mesh.interior_region_id(); ++id) bcs.add(id, g);
  return bcs;
}

/// FE function: one value per DoF, stored as [ free | fixed | hanging ].
struct FeFunction {
  const FeSpace* space = nullptr;
  std::vector<double> values;

  explicit FeFunction(const FeSpace& s)
      : space(&s), values(static_cast<std::size_t>(s.num_dofs()), 0.0) {}

  double& operator[](int dof) { return values[static_cast<std::size_t>(dof)]; }
  double operator[](int dof) const { return values[static_cast<std::size_t>(dof)]; }

  std::vector<double> free_values() const {
    return {values.begin(), values.begin() + space->num_free_dofs()};
  }

  void set_free_values(const std::vector<double>& v) {
    FEMBOX_REQUIRE(static_cast<int>(v.size()) == space->num_free_dofs(),
                   "FeFunction: free value size mismatch");
    std::copy(v.begin(), v.end(), values.begin());
  }

  /// Value of u_h at reference point xi of cell c (hanging values must be
  /// up to date).
  double evaluate(int c, const Point& xi) const {
    const auto vals = space->element().shape_values(xi);
    double u = 0.0;
    for (int a = 0; a < space->dofs_per_cell(); ++a)
      u += vals[static_cast<std::size_t>(a)] * values[static_cast<std::size_t>(space->cell_dof(c, a))];
    return u;
  }

  /// Physical gradient of u_h at reference point xi of cell c.
  Point evaluate_gradient(int c, const Point& xi) const {
    const auto grads = space->element().shape_gradients(xi);
    const CellMap map = space->mesh().cell_map(c);
    Point g{0, 0, 0};
    for (int a = 0; a < space->dofs_per_cell(); ++a) {
      const Point pg = map.push_gradient(grads[static_cast<std::size_t>(a)]);
      const double ua = values[static_cast<std::size_t>(space->cell_dof(c, a))];
      for (int ax = 0; ax < map.dim; ++ax) g[ax] += ua * pg[ax];
    }
    return g;
  }
};

/// Values of the Dirichlet trace g_h: g evaluated at each fixed DoF node.
inline std::vector<double> interpolate_dirichlet_values(const FeSpace& space,
                                                        const StrongBoundaryConditions& bcs) {
  FEMBOX_REQUIRE(space.conformity() == Conformity::CG,
                 "interpolate_dirichlet_values: CG spaces only");
  std::vector<double> g(static_cast<std::size_t>(space.num_fixed_dofs()), 0.0);
  for (int k = 0; k < space.num_fixed_dofs(); ++k) {
    const int dof = space.num_free_dofs() + k;
    const ScalarFunc* fn = bcs.find(space.fixed_dof_set_id(dof));
    FEMBOX_REQUIRE(fn != nullptr, "interpolate_dirichlet_values: no function for set id ",
                   space.fixed_dof_set_id(dof));
    g[static_cast<std::size_t>(k)] = (*fn)(space.dof_coords(dof));
  }
  return g;
}

inline void set_dirichlet_values(FeFunction& u, const std::vector<double>& g) {
  const FeSpace& s = *u.space;
  FEMBOX_REQUIRE(static_cast<int>(g.size()) == s.num_fixed_dofs(),
                 "set_dirichlet_values: size mismatch");
  std::copy(g.begin(), g.end(), u.values.begin() + s.num_free_dofs());
}

/// Recomputes hanging DoF values from their constraints.
inline void update_hanging_dof_values(FeFunction& u) {
  const FeSpace& s = *u.space;
  for (const auto& con : s.constraints()) {
    double v = 0.0;
    for (const auto& [m, c] : con.masters) v += c * u[m];
    u[con.dof] = v;
  }
}

/// Nodal interpolation of an analytical function (all DoFs, including fixed
/// and hanging, take the nodal value).
inline FeFunction interpolate_function(const FeSpace& space, const ScalarFunc& f) {
  FeFunction u(space);
  for (int dof = 0; dof < space.num_dofs(); ++dof) u[dof] = f(space.dof_coords(dof));
  return u;
}

/// Transfers a FE function across one mesh adaptation: every node of the new
/// space takes the value of the old piecewise polynomial at that node,
/// evaluated on the old cell containing it (exact prolongation under
/// refinement, injection under coarsening). Hanging values are recomputed.
inline FeFunction transfer_fe_function(const FeSpace& old_space, const FeSpace& new_space,
                                       const CellTransferMap& map, const FeFunction& u_old) {
  FEMBOX_REQUIRE(old_space.order() == new_space.order() &&
                     old_space.conformity() == new_space.conformity(),
                 "transfer_fe_function: spaces differ in order or conformity");
  FEMBOX_REQUIRE(static_cast<int>(map.entries.size()) == new_space.mesh().num_cells(),
                 "transfer_fe_function: transfer map does not match the new mesh");
  FeFunction u_work = u_old;
  update_hanging_dof_values(u_work);
  FeFunction u_new(new_space);
  const ForestMesh& old_mesh = old_space.mesh();
  for (int c = 0; c < new_space.mesh().num_cells(); ++c) {
    for (int a = 0; a < new_space.dofs_per_cell(); ++a) {
      const int dof = new_space.cell_dof(c, a);
      const Point x = new_space.dof_coords(dof);
      const int oc = old_mesh.locate_cell(x);
      const Point xi = old_mesh.cell_map(oc).to_reference(x);
      u_new[dof] = u_work.evaluate(oc, xi);
    }
  }
  update_hanging_dof_values(u_new);
  return u_new;
}

}  // namespace fembox

#endif  // FEMBOX_FESPACE_HPP
