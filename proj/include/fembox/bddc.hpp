// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_BDDC_HPP
#define FEMBOX_BDDC_HPP

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fembox/common.hpp"
#include "fembox/fespace.hpp"
#include "fembox/integration.hpp"
#include "fembox/linalg.hpp"
#include "fembox/mesh.hpp"

namespace fembox {

/// Sub-assembled Neumann problem of one subdomain: stiffness contributions of
/// its owned cells only, over the free DoFs those cells touch.
struct SubdomainProblem {
  int subdomain = 0;
  std::vector<int> cells;
  std::vector<int> local_to_global;  // ascending global free DoF ids
  CsrMatrix matrix;                  // over local DoFs
  std::vector<char> on_interface;    // per local DoF: shared with another subdomain
};

/// Interface DoF group sharing the same set of subdomains.
struct CoarseObject {
  enum class Kind { corner, edge, face };
  Kind kind = Kind::corner;
  std::vector<int> dofs;        // global free DoF ids, ascending
  std::vector<int> subdomains;  // sharing subdomains, ascending
};

/// A coarse DoF: point value at a corner object, or mean value over an
/// edge/face object.
struct CoarseDof {
  int object = -1;
  CoarseObject::Kind kind = CoarseObject::Kind::corner;
};

enum class CoarseDofSelection {
  corners,            // corner point values only
  corners_and_means,  // corners plus edge (2D) / edge+face (3D) mean values
};

enum class BddcWeighting { cardinality };

namespace detail {

/// Dense SPD Cholesky for the small per-subdomain coarse blocks.
class DenseCholesky {
 public:
  DenseCholesky() = default;

  void factor(int n, std::vector<double> a) {
    n_ = n;
    l_ = std::move(a);
    for (int j = 0; j < n; ++j) {
      double d = l_[static_cast<std::size_t>(j) * n + j];
      for (int k = 0; k < j; ++k) {
        const double v = l_[static_cast<std::size_t>(j) * n + k];
        d -= v * v;
      }
      FEMBOX_NUMERIC_CHECK(d > 0.0, "DenseCholesky: non-positive pivot at ", j);
      const double dj = std::sqrt(d);
      l_[static_cast<std::size_t>(j) * n + j] = dj;
      for (int i = j + 1; i < n; ++i) {
        double s = l_[static_cast<std::size_t>(i) * n + j];
        for (int k = 0; k < j; ++k)
          s -= l_[static_cast<std::size_t>(i) * n + k] * l_[static_cast<std::size_t>(j) * n + k];
        l_[static_cast<std::size_t>(i) * n + j] = s / dj;
      }
    }
  }

  std::vector<double> solve(std::vector<double> b) const {
    for (int i = 0; i < n_; ++i) {
      double s = b[static_cast<std::size_t>(i)];
      for (int k = 0; k < i; ++k) s -= l_[static_cast<std::size_t>(i) * n_ + k] * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] = s / l_[static_cast<std::size_t>(i) * n_ + i];
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double s = b[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < n_; ++k) s -= l_[static_cast<std::size_t>(k) * n_ + i] * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] = s / l_[static_cast<std::size_t>(i) * n_ + i];
    }
    return b;
  }

 private:
  int n_ = 0;
  std::vector<double> l_;
};

/// Per-subdomain sharing count of every free DoF (how many subdomains' owned
/// cells touch it).
inline std::vector<int> dof_sharing_count(const FeSpace& space, const Partition& partition,
                                          std::vector<std::vector<int>>& subdomain_dofs) {
  const int nparts = partition.num_parts;
  subdomain_dofs.assign(static_cast<std::size_t>(nparts), {});
  std::vector<std::vector<std::pair<int, double>>> expansion;
  for (int c = 0; c < space.mesh().num_cells(); ++c) {
    const int p = partition.owner[static_cast<std::size_t>(c)];
    cell_dof_expansion(space, c, expansion);
    for (const auto& terms : expansion)
      for (const auto& [dof, coeff] : terms)
        if (space.is_free(dof)) subdomain_dofs[static_cast<std::size_t>(p)].push_back(dof);
  }
  std::vector<int> count(static_cast<std::size_t>(space.num_free_dofs()), 0);
  for (auto& dofs : subdomain_dofs) {
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    for (int dof : dofs) ++count[static_cast<std::size_t>(dof)];
  }
  return count;
}

}  // namespace detail

/// Builds the sub-assembled Neumann matrices, one per subdomain: each A_i
/// accumulates only the cells owned by subdomain i; the scatter-sum of all
/// A_i recomposes the global matrix.
inline std::vector<SubdomainProblem> build_subdomain_problems(const FeSpace& space,
                                                              const Partition& partition) {
  FEMBOX_REQUIRE(space.conformity() == Conformity::CG,
                 "build_subdomain_problems: BDDC supports CG spaces only");
  FEMBOX_REQUIRE(static_cast<int>(partition.owner.size()) == space.mesh().num_cells(),
                 "build_subdomain_problems: partition does not match the mesh");
  std::vector<std::vector<int>> subdomain_dofs;
  const std::vector<int> sharing = detail::dof_sharing_count(space, partition, subdomain_dofs);

  std::vector<SubdomainProblem> problems(static_cast<std::size_t>(partition.num_parts));
  for (int p = 0; p < partition.num_parts; ++p) {
    SubdomainProblem& sub = problems[static_cast<std::size_t>(p)];
    sub.subdomain = p;
    sub.local_to_global = subdomain_dofs[static_cast<std::size_t>(p)];
    sub.on_interface.resize(sub.local_to_global.size());
    for (std::size_t k = 0; k < sub.local_to_global.size(); ++k)
      sub.on_interface[k] = sharing[static_cast<std::size_t>(sub.local_to_global[k])] > 1;
  }
  for (int c = 0; c < space.mesh().num_cells(); ++c)
    problems[static_cast<std::size_t>(partition.owner[static_cast<std::size_t>(c)])].cells.push_back(c);

  for (auto& sub : problems) {
    auto local_of = [&](int dof) {
      return static_cast<int>(std::lower_bound(sub.local_to_global.begin(),
                                               sub.local_to_global.end(), dof) -
                              sub.local_to_global.begin());
    };
    std::vector<std::array<int, 2>> pattern;
    std::vector<double> values;
    for (int c : sub.cells) {
      const ConstrainedCellSystem sys = constrained_cell_stiffness(space, c);
      const int m = static_cast<int>(sys.dofs.size());
      for (int a = 0; a < m; ++a) {
        if (!space.is_free(sys.dofs[static_cast<std::size_t>(a)])) continue;
        const int la = local_of(sys.dofs[static_cast<std::size_t>(a)]);
        for (int b = 0; b < m; ++b) {
          if (!space.is_free(sys.dofs[static_cast<std::size_t>(b)])) continue;
          pattern.push_back({la, local_of(sys.dofs[static_cast<std::size_t>(b)])});
          values.push_back(sys.matrix[static_cast<std::size_t>(a) * m + b]);
        }
      }
    }
    sub.matrix = CsrMatrix::from_triplets(static_cast<int>(sub.local_to_global.size()),
                                          std::move(pattern), values);
  }
  return problems;
}

/// Groups the interface DoFs by their full sharing-subdomain set. Groups
/// shared by more than two subdomains, and single-DoF groups, become corners
/// (one object per DoF); pair-shared groups become edges (2D) or faces (3D).
inline std::vector<CoarseObject> classify_coarse_objects(const FeSpace& space,
                                                         const Partition& partition) {
  std::vector<std::vector<int>> subdomain_dofs;
  const std::vector<int> sharing = detail::dof_sharing_count(space, partition, subdomain_dofs);
  std::map<std::vector<int>, std::vector<int>> groups;  // sharing set -> dofs
  std::vector<std::vector<int>> sharers(static_cast<std::size_t>(space.num_free_dofs()));
  for (int p = 0; p < partition.num_parts; ++p)
    for (int dof : subdomain_dofs[static_cast<std::size_t>(p)])
      if (sharing[static_cast<std::size_t>(dof)] > 1)
        sharers[static_cast<std::size_t>(dof)].push_back(p);
  for (int dof = 0; dof < space.num_free_dofs(); ++dof)
    if (!sharers[static_cast<std::size_t>(dof)].empty())
      groups[sharers[static_cast<std::size_t>(dof)]].push_back(dof);

  std::vector<CoarseObject> objects;
  for (auto& [subs, dofs] : groups) {
    std::sort(dofs.begin(), dofs.end());
    const bool corner_like = subs.size() > 2 || dofs.size() == 1;
    if (corner_like) {
      for (int dof : dofs) {
        CoarseObject obj;
        obj.kind = CoarseObject::Kind::corner;
        obj.dofs = {dof};
        obj.subdomains = subs;
        objects.push_back(std::move(obj));
      }
    } else {
      CoarseObject obj;
      obj.kind = space.mesh().dim() == 2 ? CoarseObject::Kind::edge : CoarseObject::Kind::face;
      obj.dofs = dofs;
      obj.subdomains = subs;
      objects.push_back(std::move(obj));
    }
  }
  return objects;
}

/// Explodes every object into per-DoF corner objects (used to test the
/// exactness degeneracy of the preconditioner).
inline std::vector<CoarseObject> all_interface_corners(const std::vector<CoarseObject>& objects) {
  std::vector<CoarseObject> out;
  for (const auto& obj : objects)
    for (int dof : obj.dofs) {
      CoarseObject c;
      c.kind = CoarseObject::Kind::corner;
      c.dofs = {dof};
      c.subdomains = obj.subdomains;
      out.push_back(std::move(c));
    }
  return out;
}

/// 2-level BDDC preconditioner: per-subdomain interior (Dirichlet) solvers,
/// constrained Neumann solvers built from the sub-assembled matrices, and a
/// coarse problem assembled by Galerkin projection with the coarse basis.
class BddcPreconditioner {
 public:
  BddcPreconditioner(const CsrMatrix& global_matrix, std::vector<SubdomainProblem> problems,
                     const std::vector<CoarseObject>& objects, CoarseDofSelection selection,
                     BddcWeighting weighting = BddcWeighting::cardinality)
      : a_(&global_matrix),
        problems_(std::move(problems)),
        selection_includes_means_(selection == CoarseDofSelection::corners_and_means) {
    (void)weighting;  // cardinality is the single supported weighting
    select_coarse_dofs(objects);
    const int nparts = static_cast<int>(problems_.size());
    sub_.resize(static_cast<std::size_t>(nparts));

    // global sharing counts for the cardinality weights
    std::vector<int> sharing(static_cast<std::size_t>(a_->n), 0);
    for (const auto& p : problems_)
      for (int dof : p.local_to_global) ++sharing[static_cast<std::size_t>(dof)];

    std::vector<std::array<int, 2>> coarse_pattern;
    std::vector<double> coarse_values;
    for (int p = 0; p < nparts; ++p) setup_subdomain(p, sharing, coarse_pattern, coarse_values);

    if (num_coarse_dofs() > 0) {
      coarse_matrix_ = CsrMatrix::from_triplets(num_coarse_dofs(), std::move(coarse_pattern),
                                                coarse_values);
      try {
        coarse_solver_ = std::make_unique<CholeskySolver>(coarse_matrix_);
      } catch (const NumericError& e) {
        throw NumericError(std::string("BddcPreconditioner: coarse matrix is singular: ") +
                           e.what());
      }
    }
  }

  int num_coarse_dofs() const { return static_cast<int>(coarse_dofs_.size()); }
  const std::vector<CoarseDof>& coarse_dofs() const { return coarse_dofs_; }
  const std::vector<CoarseObject>& selected_objects() const { return objects_; }
  const CsrMatrix& coarse_matrix() const { return coarse_matrix_; }
  const std::vector<SubdomainProblem>& problems() const { return problems_; }

  /// Cardinality weight of global DoF `dof` within subdomain `p`.
  double weight(int p, int local) const {
    return sub_[static_cast<std::size_t>(p)].weights[static_cast<std::size_t>(local)];
  }

  /// Constraint rows of subdomain p over its local DoFs, one per coarse DoF.
  const std::vector<std::vector<std::pair<int, double>>>& subdomain_constraints(int p) const {
    return sub_[static_cast<std::size_t>(p)].constraints;
  }

  /// Global coarse DoF ids of subdomain p's constraint rows.
  const std::vector<int>& subdomain_coarse_ids(int p) const {
    return sub_[static_cast<std::size_t>(p)].coarse_ids;
  }

  /// Coarse basis of subdomain p: column k holds the local values of the
  /// basis function of its k-th coarse DoF (column-major, n_local rows).
  const std::vector<double>& subdomain_coarse_basis(int p) const {
    return sub_[static_cast<std::size_t>(p)].phi;
  }

  /// z = M r.
  std::vector<double> apply(const std::vector<double>& r) const {
    FEMBOX_REQUIRE(static_cast<int>(r.size()) == a_->n, "BddcPreconditioner: size mismatch");
    std::vector<double> z1 = interior_correction(r);
    // r2 = r - A z1 vanishes on subdomain interiors
    std::vector<double> r2 = spmv(*a_, z1);
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = r[i] - r2[i];
    std::vector<double> z2 = interface_correction(r2);
    // symmetrization: z = z1 + z2 - M_int(A z2)
    std::vector<double> y = spmv(*a_, z2);
    std::vector<double> z3 = interior_correction(y);
    std::vector<double> z(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = z1[i] + z2[i] - z3[i];
    return z;
  }

  Preconditioner as_preconditioner() const {
    return [this](const std::vector<double>& r) { return apply(r); };
  }

 private:
  struct SubdomainData {
    std::vector<int> interior;                  // local interior dofs
    std::unique_ptr<CholeskySolver> dirichlet;  // A_II factor
    std::unique_ptr<CholeskySolver> neumann;    // augmented (penalized) A_i factor
    detail::DenseCholesky schur;                // C Atilde^{-1} C^T
    std::vector<std::vector<std::pair<int, double>>> constraints;  // per coarse row
    std::vector<int> coarse_ids;                // global coarse dof per row
    std::vector<double> phi;                    // n_local x nc, column major
    std::vector<double> weights;                // per local dof
  };

  void select_coarse_dofs(const std::vector<CoarseObject>& objects) {
    objects_ = objects;
    const int nparts = static_cast<int>(problems_.size());
    std::vector<int> per_subdomain(static_cast<std::size_t>(nparts), 0);
    std::vector<char> selected(objects_.size(), 0);
    auto select = [&](std::size_t i) {
      if (selected[i]) return;
      selected[i] = 1;
      for (int s : objects_[i].subdomains) ++per_subdomain[static_cast<std::size_t>(s)];
    };
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (objects_[i].kind == CoarseObject::Kind::corner || selection_includes_means_) select(i);
    }

    // a subdomain without any coarse dof gets the endpoints of its edge/face
    // objects promoted to corners (nonsingular constrained Neumann problems)
    std::vector<CoarseObject> promoted;
    for (int p = 0; p < nparts; ++p) {
      if (per_subdomain[static_cast<std::size_t>(p)] > 0) continue;
      bool has_interface = false;
      for (char c : problems_[static_cast<std::size_t>(p)].on_interface) has_interface |= c != 0;
      if (!has_interface) continue;  // no interface: interior solve is exact
      for (std::size_t i = 0; i < objects_.size(); ++i) {
        const CoarseObject& obj = objects_[i];
        if (obj.kind == CoarseObject::Kind::corner) continue;
        if (std::find(obj.subdomains.begin(), obj.subdomains.end(), p) == obj.subdomains.end())
          continue;
        for (int dof : {obj.dofs.front(), obj.dofs.back()}) {
          CoarseObject corner;
          corner.kind = CoarseObject::Kind::corner;
          corner.dofs = {dof};
          corner.subdomains = obj.subdomains;
          promoted.push_back(corner);
        }
        for (int s : obj.subdomains) ++per_subdomain[static_cast<std::size_t>(s)];
      }
      FEMBOX_REQUIRE(per_subdomain[static_cast<std::size_t>(p)] > 0,
                     "BddcPreconditioner: subdomain ", p,
                     " has interface DoFs but no coarse DoF candidates");
    }

    coarse_dofs_.clear();
    std::vector<CoarseObject> final_objects;
    for (std::size_t i = 0; i < objects_.size(); ++i)
      if (selected[i]) final_objects.push_back(objects_[i]);
    for (auto& obj : promoted) final_objects.push_back(std::move(obj));
    objects_ = std::move(final_objects);
    for (std::size_t i = 0; i < objects_.size(); ++i)
      coarse_dofs_.push_back(CoarseDof{static_cast<int>(i), objects_[i].kind});
  }

  void setup_subdomain(int p, const std::vector<int>& sharing,
                       std::vector<std::array<int, 2>>& coarse_pattern,
                       std::vector<double>& coarse_values) {
    const SubdomainProblem& prob = problems_[static_cast<std::size_t>(p)];
    SubdomainData& data = sub_[static_cast<std::size_t>(p)];
    const int nl = static_cast<int>(prob.local_to_global.size());

    data.weights.resize(static_cast<std::size_t>(nl));
    for (int i = 0; i < nl; ++i)
      data.weights[static_cast<std::size_t>(i)] =
          1.0 / sharing[static_cast<std::size_t>(prob.local_to_global[static_cast<std::size_t>(i)])];

    for (int i = 0; i < nl; ++i)
      if (!prob.on_interface[static_cast<std::size_t>(i)]) data.interior.push_back(i);

    // interior (Dirichlet) factor
    if (!data.interior.empty()) {
      std::vector<int> pos(static_cast<std::size_t>(nl), -1);
      for (std::size_t k = 0; k < data.interior.size(); ++k)
        pos[static_cast<std::size_t>(data.interior[k])] = static_cast<int>(k);
      std::vector<std::array<int, 2>> pattern;
      std::vector<double> values;
      for (int i = 0; i < nl; ++i) {
        if (pos[static_cast<std::size_t>(i)] < 0) continue;
        for (int k = prob.matrix.row_ptr[static_cast<std::size_t>(i)];
             k < prob.matrix.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
          const int j = prob.matrix.col_idx[static_cast<std::size_t>(k)];
          if (pos[static_cast<std::size_t>(j)] < 0) continue;
          pattern.push_back({pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]});
          values.push_back(prob.matrix.values[static_cast<std::size_t>(k)]);
        }
      }
      const CsrMatrix aii = CsrMatrix::from_triplets(static_cast<int>(data.interior.size()),
                                                     std::move(pattern), values);
      try {
        data.dirichlet = std::make_unique<CholeskySolver>(aii);
      } catch (const NumericError& e) {
        throw NumericError(detail_msg(p, "interior Dirichlet problem", e.what()));
      }
    }

    // coarse constraint rows of this subdomain, ordered by global coarse dof
    for (std::size_t obj_i = 0; obj_i < objects_.size(); ++obj_i) {
      const CoarseObject& obj = objects_[obj_i];
      if (std::find(obj.subdomains.begin(), obj.subdomains.end(), p) == obj.subdomains.end())
        continue;
      std::vector<std::pair<int, double>> row;
      const double c = obj.kind == CoarseObject::Kind::corner
                           ? 1.0
                           : 1.0 / static_cast<double>(obj.dofs.size());
      for (int dof : obj.dofs) {
        const auto it = std::lower_bound(prob.local_to_global.begin(), prob.local_to_global.end(),
                                         dof);
        FEMBOX_REQUIRE(it != prob.local_to_global.end() && *it == dof,
                       "BddcPreconditioner: coarse object dof not local to subdomain ", p);
        row.emplace_back(static_cast<int>(it - prob.local_to_global.begin()), c);
      }
      data.constraints.push_back(std::move(row));
      data.coarse_ids.push_back(static_cast<int>(obj_i));
    }
    const int nc = static_cast<int>(data.constraints.size());
    if (nc == 0) return;  // no interface (single-subdomain case)

    // penalized Neumann matrix Atilde = A_i + alpha C^T C (SPD)
    double diag_scale = 0.0;
    for (int i = 0; i < nl; ++i) diag_scale += prob.matrix.value_at(i, i);
    diag_scale = diag_scale > 0.0 ? diag_scale / nl : 1.0;
    const double alpha = diag_scale;
    std::vector<std::array<int, 2>> pattern;
    std::vector<double> values;
    for (int i = 0; i < nl; ++i)
      for (int k = prob.matrix.row_ptr[static_cast<std::size_t>(i)];
           k < prob.matrix.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        pattern.push_back({i, prob.matrix.col_idx[static_cast<std::size_t>(k)]});
        values.push_back(prob.matrix.values[static_cast<std::size_t>(k)]);
      }
    for (const auto& row : data.constraints)
      for (const auto& [li, ci] : row)
        for (const auto& [lj, cj] : row) {
          pattern.push_back({li, lj});
          values.push_back(alpha * ci * cj);
        }
    const CsrMatrix atilde = CsrMatrix::from_triplets(nl, std::move(pattern), values);
    try {
      data.neumann = std::make_unique<CholeskySolver>(atilde);
    } catch (const NumericError& e) {
      throw NumericError(detail_msg(p, "constrained Neumann problem", e.what()));
    }

    // Schur block S = C Atilde^{-1} C^T and coarse basis Phi = Atilde^{-1} C^T S^{-1}
    std::vector<std::vector<double>> acol(static_cast<std::size_t>(nc));
    for (int r = 0; r < nc; ++r) {
      std::vector<double> rhs(static_cast<std::size_t>(nl), 0.0);
      for (const auto& [li, ci] : data.constraints[static_cast<std::size_t>(r)])
        rhs[static_cast<std::size_t>(li)] = ci;
      acol[static_cast<std::size_t>(r)] = data.neumann->solve(rhs);
    }
    std::vector<double> s(static_cast<std::size_t>(nc) * nc, 0.0);
    for (int r = 0; r < nc; ++r)
      for (int q = 0; q < nc; ++q) {
        double v = 0.0;
        for (const auto& [li, ci] : data.constraints[static_cast<std::size_t>(q)])
          v += ci * acol[static_cast<std::size_t>(r)][static_cast<std::size_t>(li)];
        s[static_cast<std::size_t>(q) * nc + r] = v;
      }
    try {
      data.schur.factor(nc, s);
    } catch (const NumericError& e) {
      throw NumericError(detail_msg(p, "constrained Neumann problem (dependent constraints)",
                                    e.what()));
    }
    data.phi.assign(static_cast<std::size_t>(nl) * nc, 0.0);
    for (int k = 0; k < nc; ++k) {
      std::vector<double> ek(static_cast<std::size_t>(nc), 0.0);
      ek[static_cast<std::size_t>(k)] = 1.0;
      const std::vector<double> mu = data.schur.solve(ek);
      for (int i = 0; i < nl; ++i) {
        double v = 0.0;
        for (int r = 0; r < nc; ++r)
          v += acol[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
               mu[static_cast<std::size_t>(r)];
        data.phi[static_cast<std::size_t>(k) * nl + i] = v;
      }
    }

    // local coarse matrix Phi^T A_i Phi scattered into the global coarse system
    for (int k = 0; k < nc; ++k) {
      std::vector<double> phi_k(data.phi.begin() + static_cast<std::ptrdiff_t>(k) * nl,
                                data.phi.begin() + static_cast<std::ptrdiff_t>(k + 1) * nl);
      const std::vector<double> a_phi_k = spmv(prob.matrix, phi_k);
      for (int l = 0; l < nc; ++l) {
        double v = 0.0;
        for (int i = 0; i < nl; ++i)
          v += data.phi[static_cast<std::size_t>(l) * nl + i] * a_phi_k[static_cast<std::size_t>(i)];
        coarse_pattern.push_back({data.coarse_ids[static_cast<std::size_t>(l)],
                                  data.coarse_ids[static_cast<std::size_t>(k)]});
        coarse_values.push_back(v);
      }
    }
  }

  static std::string detail_msg(int p, const char* what, const char* inner) {
    return detail::format_msg("BddcPreconditioner: subdomain ", p, ": ", what,
                              " is singular (", inner, ")");
  }

  /// Exclusive per-subdomain interior solves.
  std::vector<double> interior_correction(const std::vector<double>& r) const {
    std::vector<double> z(r.size(), 0.0);
    for (std::size_t p = 0; p < problems_.size(); ++p) {
      const SubdomainProblem& prob = problems_[p];
      const SubdomainData& data = sub_[p];
      if (data.interior.empty()) continue;
      std::vector<double> rl(data.interior.size());
      for (std::size_t k = 0; k < data.interior.size(); ++k)
        rl[k] = r[static_cast<std::size_t>(
            prob.local_to_global[static_cast<std::size_t>(data.interior[k])])];
      const std::vector<double> zl = data.dirichlet->solve(rl);
      for (std::size_t k = 0; k < data.interior.size(); ++k)
        z[static_cast<std::size_t>(
            prob.local_to_global[static_cast<std::size_t>(data.interior[k])])] = zl[k];
    }
    return z;
  }

  /// Weighted coarse plus constrained-Neumann corrections.
  std::vector<double> interface_correction(const std::vector<double>& r) const {
    std::vector<double> z(r.size(), 0.0);
    const int ncg = num_coarse_dofs();
    std::vector<double> coarse_rhs(static_cast<std::size_t>(ncg), 0.0);
    std::vector<std::vector<double>> w(problems_.size());
    for (std::size_t p = 0; p < problems_.size(); ++p) {
      const SubdomainProblem& prob = problems_[p];
      const SubdomainData& data = sub_[p];
      const int nl = static_cast<int>(prob.local_to_global.size());
      const int nc = static_cast<int>(data.constraints.size());
      if (nc == 0) continue;
      std::vector<double> rl(static_cast<std::size_t>(nl));
      for (int i = 0; i < nl; ++i)
        rl[static_cast<std::size_t>(i)] =
            data.weights[static_cast<std::size_t>(i)] *
            r[static_cast<std::size_t>(prob.local_to_global[static_cast<std::size_t>(i)])];
      // constrained Neumann solve with zero coarse values
      std::vector<double> v = data.neumann->solve(rl);
      std::vector<double> cv(static_cast<std::size_t>(nc), 0.0);
      for (int q = 0; q < nc; ++q)
        for (const auto& [li, ci] : data.constraints[static_cast<std::size_t>(q)])
          cv[static_cast<std::size_t>(q)] += ci * v[static_cast<std::size_t>(li)];
      const std::vector<double> mu = data.schur.solve(cv);
      // v <- v - Atilde^{-1} C^T mu enforces the homogeneous coarse values
      std::vector<double> ct_mu(static_cast<std::size_t>(nl), 0.0);
      for (int q = 0; q < nc; ++q)
        for (const auto& [li, ci] : data.constraints[static_cast<std::size_t>(q)])
          ct_mu[static_cast<std::size_t>(li)] += ci * mu[static_cast<std::size_t>(q)];
      const std::vector<double> corr = data.neumann->solve(ct_mu);
      for (int i = 0; i < nl; ++i) v[static_cast<std::size_t>(i)] -= corr[static_cast<std::size_t>(i)];
      w[p] = std::move(v);
      // coarse right-hand side: Phi^T (D r)
      for (int k = 0; k < nc; ++k) {
        double s = 0.0;
        for (int i = 0; i < nl; ++i)
          s += data.phi[static_cast<std::size_t>(k) * nl + i] * rl[static_cast<std::size_t>(i)];
        coarse_rhs[static_cast<std::size_t>(data.coarse_ids[static_cast<std::size_t>(k)])] += s;
      }
    }
    std::vector<double> uc;
    if (ncg > 0 && coarse_solver_) uc = coarse_solver_->solve(coarse_rhs);
    for (std::size_t p = 0; p < problems_.size(); ++p) {
      const SubdomainProblem& prob = problems_[p];
      const SubdomainData& data = sub_[p];
      const int nl = static_cast<int>(prob.local_to_global.size());
      const int nc = static_cast<int>(data.constraints.size());
      if (nc == 0) continue;
      std::vector<double>& v = w[p];
      for (int k = 0; k < nc; ++k) {
        const double u = uc[static_cast<std::size_t>(data.coarse_ids[static_cast<std::size_t>(k)])];
        for (int i = 0; i < nl; ++i)
          v[static_cast<std::size_t>(i)] += data.phi[static_cast<std::size_t>(k) * nl + i] * u;
      }
      for (int i = 0; i < nl; ++i)
        z[static_cast<std::size_t>(prob.local_to_global[static_cast<std::size_t>(i)])] +=
            data.weights[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    }
    return z;
  }

  const CsrMatrix* a_;
  std::vector<SubdomainProblem> problems_;
  std::vector<CoarseObject> objects_;
  std::vector<CoarseDof> coarse_dofs_;
  std::vector<SubdomainData> sub_;
  CsrMatrix coarse_matrix_;
  std::unique_ptr<CholeskySolver> coarse_solver_;
  bool selection_includes_means_ = true;
};

/// Builds the preconditioner from sub-assembled problems and classified
/// coarse objects.
inline BddcPreconditioner setup_preconditioner(const CsrMatrix& global_matrix,
                                               std::vector<SubdomainProblem> problems,
                                               const std::vector<CoarseObject>& objects,
                                               CoarseDofSelection selection,
                                               BddcWeighting weighting = BddcWeighting::cardinality) {
  return BddcPreconditioner(global_matrix, std::move(problems), objects, selection, weighting);
}

}  // namespace fembox

#endif  // FEMBOX_BDDC_HPP
