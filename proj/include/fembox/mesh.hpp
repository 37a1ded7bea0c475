// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_MESH_HPP
#define FEMBOX_MESH_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <vector>

#include "fembox/common.hpp"
#include "fembox/morton.hpp"
#include "fembox/reference.hpp"

namespace fembox {

/// A leaf cell of the mesh. Integer anchor/extent per axis are expressed in
/// the mesh resolution grid (see ForestMesh::resolution).
struct Cell {
  MortonKey key;
  int set_id = 1;
  std::array<std::int64_t, 3> anchor{0, 0, 0};
  std::array<std::int64_t, 3> ext{0, 0, 0};
};

/// Vertex/edge/face of the mesh. Identified by its integer anchor box:
/// ext[a] == 0 on point-like axes, > 0 on spanned axes.
struct Vef {
  int dim = 0;  // number of spanned axes
  std::array<std::int64_t, 3> anchor{0, 0, 0};
  std::array<std::int64_t, 3> ext{0, 0, 0};
  int set_id = 0;
  bool is_hanging = false;
  int hanging_parent = -1;  // coarse vef this one hangs on, -1 if regular
  std::vector<std::pair<int, int>> incident_cells;  // (cell id, local subentity index)
};

enum class RefineFlag : std::uint8_t { keep = 0, refine = 1, coarsen = 2 };

struct RefinementFlags {
  std::vector<RefineFlag> flags;

  static RefinementFlags all(int n, RefineFlag f) {
    RefinementFlags r;
    r.flags.assign(static_cast<std::size_t>(n), f);
    return r;
  }
};

/// Lineage of each new cell after an adaptation, for FE function transfer.
struct CellTransferMap {
  enum class Kind : std::uint8_t { copied, refined, coarsened };
  struct Entry {
    Kind kind = Kind::copied;
    std::vector<int> old_cells;  // refined/copied: single ancestor; coarsened: merged leaves
  };
  std::vector<Entry> entries;  // indexed by new cell id
};

/// Interior integration facet. For hanging interfaces the plus side is the
/// fine cell and the facet is its whole (fine) facet; the minus side embeds
/// into subfacet `subfacet_minus` of the coarse cell's facet.
struct InteriorFacet {
  int cell_plus = -1;
  int facet_plus = -1;  // local facet id (2*axis + side)
  int cell_minus = -1;
  int facet_minus = -1;
  int subfacet_minus = -1;  // -1 for conforming interfaces
  bool hanging = false;
  int vef = -1;
};

struct BoundaryFacet {
  int cell = -1;
  int facet = -1;
  int vef = -1;
};

/// Morton-contiguous partition of the mesh cells.
struct Partition {
  int num_parts = 1;
  std::vector<int> owner;                  // per cell
  std::vector<std::vector<int>> ghosts;    // per part: off-part cells sharing a vef
};

namespace detail {

struct VefKeyHash {
  std::size_t operator()(const std::array<std::int64_t, 6>& k) const {
    std::size_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

/// Sub-entity state codes: per axis 0 = at low end, 1 = at high end, 2 = spanned.
/// Cells enumerate their 3^d - 1 proper sub-entities grouped by dimension
/// (vertices, then edges, then faces), within a group by ascending code.
inline const std::vector<int>& subentity_codes(int dim) {
  static const std::vector<int> codes2 = [] {
    std::vector<int> c;
    for (int k = 0; k < 2; ++k)
      for (int code = 0; code < 9; ++code) {
        int spans = (code % 3 == 2) + (code / 3 % 3 == 2);
        if (spans == k) c.push_back(code);
      }
    return c;
  }();
  static const std::vector<int> codes3 = [] {
    std::vector<int> c;
    for (int k = 0; k < 3; ++k)
      for (int code = 0; code < 27; ++code) {
        int spans = (code % 3 == 2) + (code / 3 % 3 == 2) + (code / 9 % 3 == 2);
        if (spans == k) c.push_back(code);
      }
    return c;
  }();
  return dim == 2 ? codes2 : codes3;
}

/// Region ids of the 3^d geometric regions of the unit box: groups of
/// increasing number of interior axes (corners first, interior last), within
/// a group ascending state code; ids start at 1.
inline const std::vector<int>& region_id_by_code(int dim) {
  static const std::vector<int> ids2 = [] {
    std::vector<int> ids(9, 0);
    int next = 1;
    for (int k = 0; k <= 2; ++k)
      for (int code = 0; code < 9; ++code) {
        int interior = (code % 3 == 2) + (code / 3 % 3 == 2);
        if (interior == k) ids[code] = next++;
      }
    return ids;
  }();
  static const std::vector<int> ids3 = [] {
    std::vector<int> ids(27, 0);
    int next = 1;
    for (int k = 0; k <= 3; ++k)
      for (int code = 0; code < 27; ++code) {
        int interior = (code % 3 == 2) + (code / 3 % 3 == 2) + (code / 9 % 3 == 2);
        if (interior == k) ids[code] = next++;
      }
    return ids;
  }();
  return dim == 2 ? ids2 : ids3;
}

}  // namespace detail

class ForestMesh {
 public:
  enum class Kind { uniform, adaptive };

  /// Conforming uniform mesh of the unit box with cells_per_dim[a] cells
  /// along axis a.
  static ForestMesh unit_box(int dim, std::array<int, 3> cells_per_dim) {
    FEMBOX_REQUIRE(dim == 2 || dim == 3, "unit_box: dimension must be 2 or 3, got ", dim);
    for (int a = 0; a < dim; ++a)
      FEMBOX_REQUIRE(cells_per_dim[a] >= 1, "unit_box: cells per axis must be >= 1");
    ForestMesh m;
    m.dim_ = dim;
    m.kind_ = Kind::uniform;
    int level = 0;
    int maxn = 1;
    for (int a = 0; a < dim; ++a) maxn = std::max(maxn, cells_per_dim[a]);
    while ((1 << level) < maxn) ++level;
    m.max_level_ = level;
    for (int a = 0; a < dim; ++a) m.res_[a] = cells_per_dim[a];
    std::array<std::int64_t, 3> ij{0, 0, 0};
    std::vector<Cell> cells;
    const int nz = dim == 3 ? cells_per_dim[2] : 1;
    for (ij[2] = 0; ij[2] < nz; ++ij[2])
      for (ij[1] = 0; ij[1] < cells_per_dim[1]; ++ij[1])
        for (ij[0] = 0; ij[0] < cells_per_dim[0]; ++ij[0]) {
          Cell c;
          c.key = MortonKey{level, morton_interleave(dim, ij, level)};
          c.anchor = ij;
          c.ext = {1, 1, dim == 3 ? 1 : 0};
          cells.push_back(c);
        }
    std::sort(cells.begin(), cells.end(),
              [](const Cell& a, const Cell& b) { return a.key.index < b.key.index; });
    m.cells_ = std::move(cells);
    m.balanced_ = true;
    m.finalize();
    return m;
  }

  /// Single-root adaptive mesh of the unit box. Adaptive meshes are 2D only.
  static ForestMesh adaptive_unit_box(int dim) {
    FEMBOX_REQUIRE(dim == 2, "adaptive_unit_box: adaptive meshes support d=2 only, got d=", dim);
    ForestMesh m;
    m.dim_ = dim;
    m.kind_ = Kind::adaptive;
    m.max_level_ = 0;
    m.res_ = {1, 1, 0};
    Cell root;
    root.key = MortonKey{0, 0};
    root.anchor = {0, 0, 0};
    root.ext = {1, 1, 0};
    m.cells_ = {root};
    m.balanced_ = true;
    m.finalize();
    return m;
  }

  /// Low-level constructor from leaf keys (2D adaptive). Validates that the
  /// leaves tile the unit box; an unbalanced mesh is accepted but carries no
  /// vef/facet tables until balanced.
  static ForestMesh from_leaf_keys(int dim, const std::vector<MortonKey>& keys,
                                   const std::vector<int>& set_ids = {}) {
    FEMBOX_REQUIRE(dim == 2, "from_leaf_keys: adaptive meshes support d=2 only");
    FEMBOX_REQUIRE(!keys.empty(), "from_leaf_keys: empty leaf set");
    FEMBOX_REQUIRE(set_ids.empty() || set_ids.size() == keys.size(),
                   "from_leaf_keys: set_ids size mismatch");
    ForestMesh m;
    m.dim_ = dim;
    m.kind_ = Kind::adaptive;
    std::vector<Cell> cells(keys.size());
    int max_level = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      cells[i].key = keys[i];
      cells[i].set_id = set_ids.empty() ? 1 : set_ids[i];
      max_level = std::max(max_level, keys[i].level);
    }
    m.max_level_ = max_level;
    m.res_ = {std::int64_t{1} << max_level, std::int64_t{1} << max_level, 0};
    for (auto& c : cells) {
      const auto lc = morton_coords(dim, c.key);
      const std::int64_t e = std::int64_t{1} << (max_level - c.key.level);
      for (int a = 0; a < dim; ++a) c.anchor[a] = lc[a] * e;
      c.ext = {e, e, 0};
    }
    std::sort(cells.begin(), cells.end(), [dim](const Cell& a, const Cell& b) {
      return morton_traversal_less(dim, a.key, b.key);
    });
    // disjoint tiling check: scaled ranges must exactly cover [0, 4^Lmax)
    std::uint64_t covered = 0;
    for (const auto& c : cells) {
      const std::uint64_t lo = morton_scaled_index(dim, c.key, max_level);
      FEMBOX_REQUIRE(lo == covered, "from_leaf_keys: leaves overlap or leave gaps");
      covered = lo + (std::uint64_t{1} << (dim * (max_level - c.key.level)));
    }
    FEMBOX_REQUIRE(covered == (std::uint64_t{1} << (dim * max_level)),
                   "from_leaf_keys: leaves do not tile the unit box");
    m.cells_ = std::move(cells);
    m.balanced_ = m.audit_balance();
    if (m.balanced_) m.finalize();
    return m;
  }

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  bool is_adaptive() const { return kind_ == Kind::adaptive; }
  bool is_balanced() const { return balanced_; }
  int max_level() const { return max_level_; }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  const std::vector<Cell>& cells() const { return cells_; }
  const Cell& cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
  const std::vector<Vef>& vefs() const { return vefs_; }
  const Vef& vef(int i) const { return vefs_[static_cast<std::size_t>(i)]; }
  const std::vector<InteriorFacet>& interior_facets() const { return interior_facets_; }
  const std::vector<BoundaryFacet>& boundary_facets() const { return boundary_facets_; }
  const std::array<std::int64_t, 3>& resolution() const { return res_; }

  int num_subentities() const { return dim_ == 2 ? 8 : 26; }
  int interior_region_id() const { return dim_ == 2 ? 9 : 27; }

  /// Vef id of local sub-entity `local` of cell `c`.
  int cell_vef(int c, int local) const {
    return cell_vefs_[static_cast<std::size_t>(c) * num_subentities() + local];
  }

  Point vertex_coords(const std::array<std::int64_t, 3>& ip) const {
    Point p{0, 0, 0};
    for (int a = 0; a < dim_; ++a) p[a] = static_cast<double>(ip[a]) / static_cast<double>(res_[a]);
    return p;
  }

  CellMap cell_map(int i) const {
    const Cell& c = cell(i);
    CellMap map;
    map.dim = dim_;
    for (int a = 0; a < dim_; ++a) {
      map.lower[a] = static_cast<double>(c.anchor[a]) / static_cast<double>(res_[a]);
      map.half[a] = 0.5 * static_cast<double>(c.ext[a]) / static_cast<double>(res_[a]);
    }
    return map;
  }

  double cell_measure(int i) const {
    const CellMap m = cell_map(i);
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= 2.0 * m.half[a];
    return v;
  }

  double domain_measure() const { return 1.0; }

  /// Cell containing physical point x (lower-closed box convention).
  int locate_cell(const Point& x) const {
    std::array<std::int64_t, 3> ip{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      const double s = x[a] * static_cast<double>(res_[a]);
      std::int64_t i = static_cast<std::int64_t>(std::floor(s));
      i = std::max<std::int64_t>(0, std::min<std::int64_t>(res_[a] - 1, i));
      ip[a] = i;
    }
    if (kind_ == Kind::uniform) {
      const MortonKey k{max_level_, morton_interleave(dim_, ip, max_level_)};
      const auto it = std::lower_bound(
          cells_.begin(), cells_.end(), k,
          [](const Cell& c, const MortonKey& key) { return c.key.index < key.index; });
      FEMBOX_REQUIRE(it != cells_.end() && it->key.index == k.index,
                     "locate_cell: point outside mesh");
      return static_cast<int>(it - cells_.begin());
    }
    const std::uint64_t scaled = morton_interleave(dim_, ip, max_level_);
    int lo = 0, hi = num_cells() - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (morton_scaled_index(dim_, cells_[mid].key, max_level_) <= scaled)
        lo = mid;
      else
        hi = mid - 1;
    }
    return lo;
  }

  /// Full pairwise 2:1 audit over cells whose closures intersect.
  bool audit_balance() const {
    if (kind_ == Kind::uniform) return true;
    for (int i = 0; i < num_cells(); ++i) {
      const Cell& ci = cells_[static_cast<std::size_t>(i)];
      if (!check_neighborhood(ci.key, ci.key.level + 1)) return false;
    }
    return true;
  }

 private:
  friend ForestMesh enforce_2to1_balance(const ForestMesh&);
  friend std::pair<ForestMesh, CellTransferMap> refine_and_coarsen(const ForestMesh&,
                                                                   const RefinementFlags&);

  /// True if no leaf adjacent to `key` (closures intersect) has level > level_cap.
  bool check_neighborhood(const MortonKey& key, int level_cap) const {
    const auto lc = morton_coords(dim_, key);
    const std::int64_t n = std::int64_t{1} << key.level;
    std::array<std::int64_t, 3> dv{0, 0, 0};
    const int dz = dim_ == 3 ? 1 : 0;
    for (dv[2] = -dz; dv[2] <= dz; ++dv[2])
      for (dv[1] = -1; dv[1] <= 1; ++dv[1])
        for (dv[0] = -1; dv[0] <= 1; ++dv[0]) {
          if (dv[0] == 0 && dv[1] == 0 && dv[2] == 0) continue;
          std::array<std::int64_t, 3> nb{0, 0, 0};
          bool inside = true;
          for (int a = 0; a < dim_; ++a) {
            nb[a] = lc[a] + dv[a];
            if (nb[a] < 0 || nb[a] >= n) inside = false;
          }
          if (!inside) continue;
          const MortonKey nkey = MortonKey{key.level, morton_interleave(dim_, nb, key.level)};
          const std::uint64_t lo = morton_scaled_index(dim_, nkey, max_level_);
          const std::uint64_t hi =
              lo + (std::uint64_t{1} << (dim_ * (max_level_ - key.level)));
          // leaves under the neighbor box form a contiguous run
          int first = 0, last = num_cells() - 1, pos = num_cells();
          while (first <= last) {
            const int mid = (first + last) / 2;
            if (morton_scaled_index(dim_, cells_[mid].key, max_level_) >= lo) {
              pos = mid;
              last = mid - 1;
            } else {
              first = mid + 1;
            }
          }
          for (int j = pos; j < num_cells(); ++j) {
            const Cell& cj = cells_[static_cast<std::size_t>(j)];
            if (morton_scaled_index(dim_, cj.key, max_level_) >= hi) break;
            if (cj.key.level <= level_cap) continue;
            if (boxes_touch(key, cj.key)) return false;
          }
        }
    return true;
  }

  bool boxes_touch(const MortonKey& a, const MortonKey& b) const {
    const auto ca = morton_coords(dim_, a);
    const auto cb = morton_coords(dim_, b);
    for (int ax = 0; ax < dim_; ++ax) {
      const std::int64_t alo = ca[ax] << (max_level_ - a.level);
      const std::int64_t ahi = alo + (std::int64_t{1} << (max_level_ - a.level));
      const std::int64_t blo = cb[ax] << (max_level_ - b.level);
      const std::int64_t bhi = blo + (std::int64_t{1} << (max_level_ - b.level));
      if (ahi < blo || bhi < alo) return false;
    }
    return true;
  }

  /// Builds vefs, incidence, hanging classification and facet lists.
  void finalize() {
    vefs_.clear();
    cell_vefs_.assign(static_cast<std::size_t>(num_cells()) * num_subentities(), -1);
    std::unordered_map<std::array<std::int64_t, 6>, int, detail::VefKeyHash> table;
    const auto& codes = detail::subentity_codes(dim_);
    const auto& region = detail::region_id_by_code(dim_);
    for (int c = 0; c < num_cells(); ++c) {
      const Cell& cell = cells_[static_cast<std::size_t>(c)];
      for (int local = 0; local < num_subentities(); ++local) {
        const int code = codes[static_cast<std::size_t>(local)];
        std::array<std::int64_t, 3> anchor{0, 0, 0};
        std::array<std::int64_t, 3> ext{0, 0, 0};
        int vdim = 0;
        int rem = code;
        for (int a = 0; a < dim_; ++a) {
          const int s = rem % 3;
          rem /= 3;
          if (s == 0) {
            anchor[a] = cell.anchor[a];
          } else if (s == 1) {
            anchor[a] = cell.anchor[a] + cell.ext[a];
          } else {
            anchor[a] = cell.anchor[a];
            ext[a] = cell.ext[a];
            ++vdim;
          }
        }
        const std::array<std::int64_t, 6> key{anchor[0], anchor[1], anchor[2],
                                              ext[0],    ext[1],    ext[2]};
        auto [it, inserted] = table.try_emplace(key, static_cast<int>(vefs_.size()));
        if (inserted) {
          Vef v;
          v.dim = vdim;
          v.anchor = anchor;
          v.ext = ext;
          int rcode = 0;
          for (int a = 0; a < dim_; ++a) {
            int state;
            if (ext[a] > 0 || (anchor[a] > 0 && anchor[a] < res_[a]))
              state = 2;
            else
              state = anchor[a] == 0 ? 0 : 1;
            rcode += state * (a == 0 ? 1 : a == 1 ? 3 : 9);
          }
          v.set_id = region[static_cast<std::size_t>(rcode)];
          vefs_.push_back(std::move(v));
        }
        vefs_[static_cast<std::size_t>(it->second)].incident_cells.emplace_back(c, local);
        cell_vefs_[static_cast<std::size_t>(c) * num_subentities() + local] = it->second;
      }
    }

    // hanging classification (2D adaptive): a vertex inside an edge, or a
    // fine edge strictly contained in a coarser edge
    if (kind_ == Kind::adaptive) {
      for (int v = 0; v < static_cast<int>(vefs_.size()); ++v) {
        Vef& fine = vefs_[static_cast<std::size_t>(v)];
        if (fine.dim != 1) continue;
        const int t = fine.ext[0] > 0 ? 0 : 1;
        // midpoint vertex of this edge, if present, hangs on it
        if (fine.ext[t] % 2 == 0) {
          std::array<std::int64_t, 6> mid{fine.anchor[0], fine.anchor[1], 0, 0, 0, 0};
          mid[t] += fine.ext[t] / 2;
          const auto it = table.find(mid);
          if (it != table.end()) {
            Vef& vert = vefs_[static_cast<std::size_t>(it->second)];
            vert.is_hanging = true;
            vert.hanging_parent = v;
          }
        }
        // a double-length containing edge marks this edge as hanging
        const std::int64_t e = fine.ext[t];
        std::array<std::int64_t, 6> parent{fine.anchor[0], fine.anchor[1], 0, 0, 0, 0};
        parent[t] -= fine.anchor[t] % (2 * e);
        parent[3 + t] = 2 * e;
        const auto it = table.find(parent);
        if (it != table.end() && it->second != v) {
          fine.is_hanging = true;
          fine.hanging_parent = it->second;
        }
      }
    }

    build_facets();
  }

  void build_facets() {
    interior_facets_.clear();
    boundary_facets_.clear();
    const int fdim = dim_ - 1;
    for (int v = 0; v < static_cast<int>(vefs_.size()); ++v) {
      const Vef& vef = vefs_[static_cast<std::size_t>(v)];
      if (vef.dim != fdim) continue;
      if (vef.incident_cells.size() == 2) {
        const auto [c0, l0] = vef.incident_cells[0];
        const auto [c1, l1] = vef.incident_cells[1];
        InteriorFacet f;
        f.cell_plus = std::min(c0, c1);
        f.cell_minus = std::max(c0, c1);
        f.facet_plus = local_facet_id(f.cell_plus == c0 ? l0 : l1);
        f.facet_minus = local_facet_id(f.cell_plus == c0 ? l1 : l0);
        f.vef = v;
        interior_facets_.push_back(f);
        continue;
      }
      FEMBOX_REQUIRE(vef.incident_cells.size() == 1,
                     "build_facets: facet incident to more than two cells");
      const auto [c0, l0] = vef.incident_cells[0];
      if (vef.set_id != interior_region_id()) {
        boundary_facets_.push_back(BoundaryFacet{c0, local_facet_id(l0), v});
        continue;
      }
      if (vef.is_hanging) {
        const Vef& coarse = vefs_[static_cast<std::size_t>(vef.hanging_parent)];
        FEMBOX_REQUIRE(coarse.incident_cells.size() == 1,
                       "build_facets: coarse side of hanging facet not unique");
        const auto [c1, l1] = coarse.incident_cells[0];
        InteriorFacet f;
        f.cell_plus = c0;   // fine side carries the integration facet
        f.facet_plus = local_facet_id(l0);
        f.cell_minus = c1;
        f.facet_minus = local_facet_id(l1);
        const int t = vef.ext[0] > 0 ? 0 : 1;
        f.subfacet_minus = vef.anchor[t] == coarse.anchor[t] ? 0 : 1;
        f.hanging = true;
        f.vef = v;
        interior_facets_.push_back(f);
      }
      // else: coarse side of a hanging interface; integrated from the fine side
    }
  }

  /// Local facet id (2*axis + side) from a local sub-entity index of
  /// codimension one.
  int local_facet_id(int local) const {
    const int code = detail::subentity_codes(dim_)[static_cast<std::size_t>(local)];
    int rem = code;
    for (int a = 0; a < dim_; ++a) {
      const int s = rem % 3;
      rem /= 3;
      if (s != 2) return 2 * a + s;
    }
    FEMBOX_REQUIRE(false, "local_facet_id: sub-entity is not a facet");
    return -1;
  }

  int dim_ = 2;
  Kind kind_ = Kind::uniform;
  int max_level_ = 0;
  bool balanced_ = false;
  std::array<std::int64_t, 3> res_{1, 1, 0};
  std::vector<Cell> cells_;
  std::vector<Vef> vefs_;
  std::vector<int> cell_vefs_;
  std::vector<InteriorFacet> interior_facets_;
  std::vector<BoundaryFacet> boundary_facets_;
};

/// Uniform conforming unit-box mesh, d in {2,3}.
inline ForestMesh create_unit_box_mesh(int dim, std::array<int, 3> cells_per_dim) {
  return ForestMesh::unit_box(dim, cells_per_dim);
}

/// Minimal extra refinements so that every pair of vef-adjacent cells differs
/// by at most one level. Idempotent.
inline ForestMesh enforce_2to1_balance(const ForestMesh& mesh) {
  FEMBOX_REQUIRE(mesh.is_adaptive(), "enforce_2to1_balance: mesh is not adaptive");
  std::vector<MortonKey> keys;
  std::vector<int> ids;
  keys.reserve(mesh.cells().size());
  for (const auto& c : mesh.cells()) {
    keys.push_back(c.key);
    ids.push_back(c.set_id);
  }
  for (;;) {
    ForestMesh current = ForestMesh::from_leaf_keys(mesh.dim(), keys, ids);
    std::vector<MortonKey> next;
    std::vector<int> next_ids;
    bool changed = false;
    for (int i = 0; i < current.num_cells(); ++i) {
      const Cell& c = current.cell(i);
      if (current.check_neighborhood(c.key, c.key.level + 1)) {
        next.push_back(c.key);
        next_ids.push_back(c.set_id);
      } else {
        changed = true;
        for (int child = 0; child < (1 << current.dim()); ++child) {
          next.push_back(MortonKey{c.key.level + 1,
                                   (c.key.index << current.dim()) | std::uint64_t(child)});
          next_ids.push_back(c.set_id);
        }
      }
    }
    if (!changed) return current;
    keys = std::move(next);
    ids = std::move(next_ids);
  }
}

/// Adapts a 2D adaptive mesh: refine splits 1:4; coarsen merges complete
/// sibling groups in which all members are flagged; the result is re-balanced
/// (balance overrides coarsening where the two conflict).
inline std::pair<ForestMesh, CellTransferMap> refine_and_coarsen(const ForestMesh& mesh,
                                                                 const RefinementFlags& flags) {
  FEMBOX_REQUIRE(mesh.is_adaptive(), "refine_and_coarsen: mesh is not adaptive");
  FEMBOX_REQUIRE(static_cast<int>(flags.flags.size()) == mesh.num_cells(),
                 "refine_and_coarsen: flags length ", flags.flags.size(),
                 " does not match cell count ", mesh.num_cells());
  const int dim = mesh.dim();
  const int nchild = 1 << dim;
  std::vector<MortonKey> keys;
  std::vector<int> ids;
  for (int i = 0; i < mesh.num_cells(); ++i) {
    const Cell& c = mesh.cell(i);
    const RefineFlag f = flags.flags[static_cast<std::size_t>(i)];
    // complete sibling group flagged for coarsening: emit the parent once
    if (f == RefineFlag::coarsen && c.key.level > 0) {
      const std::uint64_t child_pos = c.key.index & std::uint64_t(nchild - 1);
      const int first = i - static_cast<int>(child_pos);
      bool merge = first >= 0 && first + nchild <= mesh.num_cells();
      if (merge) {
        for (int k = 0; k < nchild; ++k) {
          const Cell& s = mesh.cell(first + k);
          if (s.key.level != c.key.level ||
              s.key.index != (mesh.cell(first).key.index | std::uint64_t(k)) ||
              flags.flags[static_cast<std::size_t>(first + k)] != RefineFlag::coarsen) {
            merge = false;
            break;
          }
        }
        merge = merge && (mesh.cell(first).key.index & std::uint64_t(nchild - 1)) == 0;
      }
      if (merge) {
        if (i == first) {
          keys.push_back(MortonKey{c.key.level - 1, c.key.index >> dim});
          ids.push_back(mesh.cell(first).set_id);
        }
        continue;  // siblings other than the first are consumed by the merge
      }
      // partial sibling group: coarsen flag has no effect
      keys.push_back(c.key);
      ids.push_back(c.set_id);
      continue;
    }
    if (f == RefineFlag::refine) {
      for (int k = 0; k < nchild; ++k) {
        keys.push_back(MortonKey{c.key.level + 1, (c.key.index << dim) | std::uint64_t(k)});
        ids.push_back(c.set_id);
      }
    } else {
      keys.push_back(c.key);
      ids.push_back(c.set_id);
    }
  }
  ForestMesh raw = ForestMesh::from_leaf_keys(dim, keys, ids);
  ForestMesh out = raw.is_balanced() ? std::move(raw) : enforce_2to1_balance(raw);

  CellTransferMap map;
  map.entries.resize(static_cast<std::size_t>(out.num_cells()));
  const int ref = std::max(mesh.max_level(), out.max_level());
  for (int i = 0; i < out.num_cells(); ++i) {
    const Cell& nc = out.cell(i);
    const std::uint64_t lo = morton_scaled_index(dim, nc.key, ref);
    const std::uint64_t hi = lo + (std::uint64_t{1} << (dim * (ref - nc.key.level)));
    // old leaf containing the new cell's anchor
    int first = 0, last = mesh.num_cells() - 1;
    while (first < last) {
      const int mid = (first + last + 1) / 2;
      if (morton_scaled_index(dim, mesh.cell(mid).key, ref) <= lo)
        first = mid;
      else
        last = mid - 1;
    }
    auto& entry = map.entries[static_cast<std::size_t>(i)];
    const Cell& oc = mesh.cell(first);
    if (oc.key.level == nc.key.level) {
      entry.kind = CellTransferMap::Kind::copied;
      entry.old_cells = {first};
    } else if (oc.key.level < nc.key.level) {
      entry.kind = CellTransferMap::Kind::refined;
      entry.old_cells = {first};
    } else {
      entry.kind = CellTransferMap::Kind::coarsened;
      for (int j = first; j < mesh.num_cells(); ++j) {
        if (morton_scaled_index(dim, mesh.cell(j).key, ref) >= hi) break;
        entry.old_cells.push_back(j);
      }
    }
  }
  return {std::move(out), std::move(map)};
}

/// Per-vef hanging classification of a balanced adaptive mesh.
inline std::vector<bool> find_hanging_vefs(const ForestMesh& mesh) {
  FEMBOX_REQUIRE(!mesh.is_adaptive() || mesh.is_balanced(),
                 "find_hanging_vefs: mesh violates the 2:1 balance constraint");
  std::vector<bool> hanging(mesh.vefs().size(), false);
  for (std::size_t i = 0; i < mesh.vefs().size(); ++i) hanging[i] = mesh.vefs()[i].is_hanging;
  return hanging;
}

/// Splits cells into P Morton-contiguous segments of size ceil(N/P) or
/// floor(N/P) and computes per-part ghost sets (off-part cells sharing a vef
/// with a part-local cell).
inline Partition partition_sfc(const ForestMesh& mesh, int num_parts) {
  const int n = mesh.num_cells();
  FEMBOX_REQUIRE(num_parts >= 1, "partition_sfc: need P >= 1");
  FEMBOX_REQUIRE(num_parts <= n, "partition_sfc: P = ", num_parts, " exceeds cell count ", n);
  Partition part;
  part.num_parts = num_parts;
  part.owner.resize(static_cast<std::size_t>(n));
  const int base = n / num_parts;
  const int rem = n % num_parts;
  int cursor = 0;
  for (int p = 0; p < num_parts; ++p) {
    const int size = base + (p < rem ? 1 : 0);
    for (int k = 0; k < size; ++k) part.owner[static_cast<std::size_t>(cursor++)] = p;
  }
  std::vector<std::set<int>> ghosts(static_cast<std::size_t>(num_parts));
  for (const auto& vef : mesh.vefs()) {
    for (const auto& [ci, li] : vef.incident_cells)
      for (const auto& [cj, lj] : vef.incident_cells) {
        const int pi = part.owner[static_cast<std::size_t>(ci)];
        const int pj = part.owner[static_cast<std::size_t>(cj)];
        if (pi != pj) ghosts[static_cast<std::size_t>(pi)].insert(cj);
      }
  }
  part.ghosts.resize(static_cast<std::size_t>(num_parts));
  for (int p = 0; p < num_parts; ++p)
    part.ghosts[static_cast<std::size_t>(p)].assign(ghosts[static_cast<std::size_t>(p)].begin(),
                                                    ghosts[static_cast<std::size_t>(p)].end());
  return part;
}

}  // namespace fembox

#endif  // FEMBOX_MESH_HPP
