// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_MORTON_HPP
#define FEMBOX_MORTON_HPP

#include <array>
#include <cstdint>

#include "fembox/common.hpp"

namespace fembox {

/// Identifies a quadtree/octree node: refinement level plus the bit-interleaved
/// index of its anchor within the 2^level per-axis grid of that level.
/// The x coordinate occupies the least significant bit of each interleave group.
struct MortonKey {
  int level = 0;
  std::uint64_t index = 0;

  friend bool operator==(const MortonKey&, const MortonKey&) = default;
};

/// Bit-interleave of per-axis coordinates, x least significant.
inline std::uint64_t morton_interleave(int dim, const std::array<std::int64_t, 3>& coords,
                                       int bits) {
  std::uint64_t out = 0;
  for (int b = 0; b < bits; ++b)
    for (int a = 0; a < dim; ++a)
      out |= ((static_cast<std::uint64_t>(coords[a]) >> b) & 1u) << (b * dim + a);
  return out;
}

inline std::array<std::int64_t, 3> morton_deinterleave(int dim, std::uint64_t index, int bits) {
  std::array<std::int64_t, 3> coords{0, 0, 0};
  for (int b = 0; b < bits; ++b)
    for (int a = 0; a < dim; ++a)
      coords[a] |= static_cast<std::int64_t>((index >> (b * dim + a)) & 1u) << b;
  return coords;
}

/// Key of the cell at `level` anchored at integer coordinates `coords`
/// (0 <= coords[a] < 2^level). Rejects out-of-range coordinates.
inline MortonKey morton_key(int dim, int level, const std::array<std::int64_t, 3>& coords) {
  FEMBOX_REQUIRE(dim == 2 || dim == 3, "morton_key: dim must be 2 or 3, got ", dim);
  FEMBOX_REQUIRE(level >= 0 && level <= 20, "morton_key: level out of range: ", level);
  for (int a = 0; a < dim; ++a)
    FEMBOX_REQUIRE(coords[a] >= 0 && coords[a] < (std::int64_t{1} << level),
                   "morton_key: coordinate ", coords[a], " out of range for level ", level);
  return MortonKey{level, morton_interleave(dim, coords, level)};
}

inline std::array<std::int64_t, 3> morton_coords(int dim, const MortonKey& key) {
  return morton_deinterleave(dim, key.index, key.level);
}

/// Index of the key scaled to a finer reference level; the subtree rooted at
/// the key covers [scaled, scaled + 2^(dim*(ref_level-level))) at ref_level.
inline std::uint64_t morton_scaled_index(int dim, const MortonKey& key, int ref_level) {
  return key.index << (dim * (ref_level - key.level));
}

/// Depth-first traversal order of disjoint tree nodes (the z-curve order).
inline bool morton_traversal_less(int dim, const MortonKey& a, const MortonKey& b) {
  const int ref = a.level > b.level ? a.level : b.level;
  const std::uint64_t sa = morton_scaled_index(dim, a, ref);
  const std::uint64_t sb = morton_scaled_index(dim, b, ref);
  if (sa != sb) return sa < sb;
  return a.level < b.level;  // ancestor precedes descendant
}

}  // namespace fembox

#endif  // FEMBOX_MORTON_HPP
