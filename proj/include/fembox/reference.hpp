// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_REFERENCE_HPP
#define FEMBOX_REFERENCE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fembox/common.hpp"

namespace fembox {

/// Quadrature rule on the reference cell [-1,1]^d or reference facet [-1,1]^(d-1).
struct Quadrature {
  int dim = 0;  // dimension of the integration domain
  std::vector<Point> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
inline void gauss_legendre_1d(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // evaluate P_n(t) and P_n'(t) via the three-term recurrence
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

}  // namespace detail

/// Tensor-product Gauss-Legendre rule with n points per axis, exact for
/// polynomials of per-axis degree <= 2n-1. dim = 0 yields the single-point
/// rule of weight 1 used for vertex "facets" of 1D constructs.
inline Quadrature gauss_quadrature(int dim, int n) {
  FEMBOX_REQUIRE(dim >= 0 && dim <= 3, "gauss_quadrature: bad dim ", dim);
  FEMBOX_REQUIRE(n >= 1, "gauss_quadrature: need n >= 1, got ", n);
  std::vector<double> x, w;
  detail::gauss_legendre_1d(n, x, w);
  Quadrature q;
  q.dim = dim;
  if (dim == 0) {
    q.points.push_back({0, 0, 0});
    q.weights.push_back(1.0);
    return q;
  }
  int total = 1;
  for (int a = 0; a < dim; ++a) total *= n;
  q.points.reserve(total);
  q.weights.reserve(total);
  for (int flat = 0; flat < total; ++flat) {
    int rem = flat;
    Point p{0, 0, 0};
    double weight = 1.0;
    for (int a = 0; a < dim; ++a) {
      const int ia = rem % n;
      rem /= n;
      p[a] = x[ia];
      weight *= w[ia];
    }
    q.points.push_back(p);
    q.weights.push_back(weight);
  }
  return q;
}

/// Scalar Lagrangian element Q_q on [-1,1]^d with the equispaced node lattice,
/// nodes ordered lexicographically with x fastest.
class ReferenceElement {
 public:
  ReferenceElement(int dim, int order) : dim_(dim), order_(order) {
    FEMBOX_REQUIRE(dim == 1 || dim == 2 || dim == 3, "ReferenceElement: bad dim ", dim);
    FEMBOX_REQUIRE(order >= 1 && order <= 4, "ReferenceElement: order must be in 1..4, got ",
                   order);
    nodes_1d_.resize(order + 1);
    for (int k = 0; k <= order; ++k) nodes_1d_[k] = -1.0 + 2.0 * k / order;
    num_nodes_ = 1;
    for (int a = 0; a < dim; ++a) num_nodes_ *= order + 1;
  }

  int dim() const { return dim_; }
  int order() const { return order_; }
  int num_nodes() const { return num_nodes_; }
  const std::vector<double>& nodes_1d() const { return nodes_1d_; }

  /// Lattice multi-index of node i (x fastest).
  std::array<int, 3> node_lattice(int i) const {
    std::array<int, 3> m{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      m[a] = i % (order_ + 1);
      i /= order_ + 1;
    }
    return m;
  }

  Point node_point(int i) const {
    const auto m = node_lattice(i);
    Point p{0, 0, 0};
    for (int a = 0; a < dim_; ++a) p[a] = nodes_1d_[m[a]];
    return p;
  }

  /// 1D Lagrange basis value L_k(t) for the equispaced nodes.
  double lagrange_1d(int k, double t) const {
    double v = 1.0;
    for (int j = 0; j <= order_; ++j) {
      if (j == k) continue;
      v *= (t - nodes_1d_[j]) / (nodes_1d_[k] - nodes_1d_[j]);
    }
    return v;
  }

  double lagrange_1d_deriv(int k, double t) const {
    double sum = 0.0;
    for (int m = 0; m <= order_; ++m) {
      if (m == k) continue;
      double term = 1.0 / (nodes_1d_[k] - nodes_1d_[m]);
      for (int j = 0; j <= order_; ++j) {
        if (j == k || j == m) continue;
        term *= (t - nodes_1d_[j]) / (nodes_1d_[k] - nodes_1d_[j]);
      }
      sum += term;
    }
    return sum;
  }

  /// All shape function values at a reference point. Points outside the cube
  /// are permitted (polynomial extrapolation).
  std::vector<double> shape_values(const Point& xi) const {
    std::array<std::vector<double>, 3> l;
    for (int a = 0; a < dim_; ++a) {
      l[a].resize(order_ + 1);
      for (int k = 0; k <= order_; ++k) l[a][k] = lagrange_1d(k, xi[a]);
    }
    std::vector<double> vals(num_nodes_);
    for (int i = 0; i < num_nodes_; ++i) {
      const auto m = node_lattice(i);
      double v = 1.0;
      for (int a = 0; a < dim_; ++a) v *= l[a][m[a]];
      vals[i] = v;
    }
    return vals;
  }

  /// All shape function gradients (w.r.t. reference coordinates) at a point.
  std::vector<Point> shape_gradients(const Point& xi) const {
    std::array<std::vector<double>, 3> l, dl;
    for (int a = 0; a < dim_; ++a) {
      l[a].resize(order_ + 1);
      dl[a].resize(order_ + 1);
      for (int k = 0; k <= order_; ++k) {
        l[a][k] = lagrange_1d(k, xi[a]);
        dl[a][k] = lagrange_1d_deriv(k, xi[a]);
      }
    }
    std::vector<Point> grads(num_nodes_, Point{0, 0, 0});
    for (int i = 0; i < num_nodes_; ++i) {
      const auto m = node_lattice(i);
      for (int a = 0; a < dim_; ++a) {
        double g = 1.0;
        for (int b = 0; b < dim_; ++b) g *= (b == a) ? dl[b][m[b]] : l[b][m[b]];
        grads[i][a] = g;
      }
    }
    return grads;
  }

 private:
  int dim_;
  int order_;
  int num_nodes_;
  std::vector<double> nodes_1d_;
};

/// Affine map from [-1,1]^d onto an axis-aligned brick cell.
struct CellMap {
  int dim = 2;
  Point lower{0, 0, 0};       // physical lower corner
  Point half{1, 1, 1};        // physical half-lengths per axis

  Point to_physical(const Point& xi) const {
    Point x{0, 0, 0};
    for (int a = 0; a < dim; ++a) x[a] = lower[a] + half[a] * (xi[a] + 1.0);
    return x;
  }

  Point to_reference(const Point& x) const {
    Point xi{0, 0, 0};
    for (int a = 0; a < dim; ++a) xi[a] = (x[a] - lower[a]) / half[a] - 1.0;
    return xi;
  }

  /// Determinant of the (diagonal) Jacobian.
  double jacobian_det() const {
    double j = 1.0;
    for (int a = 0; a < dim; ++a) j *= half[a];
    return j;
  }

  /// Push a reference gradient to physical space (J^{-T} grad).
  Point push_gradient(const Point& ref_grad) const {
    Point g{0, 0, 0};
    for (int a = 0; a < dim; ++a) g[a] = ref_grad[a] / half[a];
    return g;
  }
};

/// Mapped cell quadrature: physical points and weights scaled by |J_K|.
inline void map_cell_quadrature(const CellMap& map, const Quadrature& quad,
                                std::vector<Point>& phys_points,
                                std::vector<double>& scaled_weights) {
  FEMBOX_REQUIRE(quad.dim == map.dim, "map_cell_quadrature: dimension mismatch");
  const double jac = map.jacobian_det();
  FEMBOX_NUMERIC_CHECK(jac > 0.0, "map_cell_quadrature: non-positive Jacobian");
  phys_points.resize(quad.size());
  scaled_weights.resize(quad.size());
  for (int g = 0; g < quad.size(); ++g) {
    phys_points[g] = map.to_physical(quad.points[g]);
    scaled_weights[g] = quad.weights[g] * jac;
  }
}

/// Embedding of facet reference coordinates into cell reference coordinates.
/// Local facet id f encodes axis f/2 and side f%2 (0 -> xi_axis = -1).
/// The tangential axes enter in increasing axis order. An optional subfacet
/// selector restricts to one half (2D) or quadrant (3D) of the facet, the
/// halves enumerated lexicographically in the facet coordinates.
struct FacetMap {
  int dim = 2;        // cell dimension
  int local_facet = 0;
  int subfacet = -1;  // -1: whole facet; else 0..2^(d-1)-1

  int axis() const { return local_facet / 2; }
  int side() const { return local_facet % 2; }

  /// Facet reference point (eta in [-1,1]^(d-1)) -> cell reference point.
  Point to_cell_reference(const Point& eta) const {
    Point xi{0, 0, 0};
    int t = 0;
    for (int a = 0; a < dim; ++a) {
      if (a == axis()) {
        xi[a] = side() == 0 ? -1.0 : 1.0;
      } else {
        double e = eta[t];
        if (subfacet >= 0) {
          const int bit = (subfacet >> t) & 1;
          e = 0.5 * e + (bit == 0 ? -0.5 : 0.5);
        }
        xi[a] = e;
        ++t;
      }
    }
    return xi;
  }

  /// Outward unit normal of the owning cell on this facet (axis-aligned).
  Point outward_normal() const {
    Point n{0, 0, 0};
    n[axis()] = side() == 0 ? -1.0 : 1.0;
    return n;
  }
};

/// Geometry of one integration facet seen from the cell that owns it:
/// physical points, outward normal, and measure factor |J_F|.
struct FacetGeometry {
  std::vector<Point> phys_points;
  std::vector<double> scaled_weights;  // w * |J_F|
  Point normal{0, 0, 0};
  double jacobian = 0.0;  // |J_F|
  double measure = 0.0;   // integral of 1 over the facet
};

/// Evaluates facet quadrature geometry for cell `map`, local facet `facet`.
/// `quad` is a (d-1)-dimensional rule. For axis-aligned bricks |J_F| is the
/// product of the tangential half-lengths.
inline FacetGeometry facet_geometry(const CellMap& map, const FacetMap& facet,
                                    const Quadrature& quad) {
  FEMBOX_REQUIRE(quad.dim == map.dim - 1, "facet_geometry: quadrature dim mismatch");
  FEMBOX_REQUIRE(facet.dim == map.dim, "facet_geometry: facet/cell dim mismatch");
  FacetGeometry geo;
  double jac = 1.0;
  for (int a = 0; a < map.dim; ++a)
    if (a != facet.axis()) jac *= map.half[a];
  if (facet.subfacet >= 0) jac /= double(1 << (map.dim - 1));  // half-size subfacet
  geo.jacobian = jac;
  geo.normal = facet.outward_normal();
  geo.phys_points.resize(quad.size());
  geo.scaled_weights.resize(quad.size());
  geo.measure = 0.0;
  for (int g = 0; g < quad.size(); ++g) {
    geo.phys_points[g] = map.to_physical(facet.to_cell_reference(quad.points[g]));
    geo.scaled_weights[g] = quad.weights[g] * jac;
    geo.measure += geo.scaled_weights[g];
  }
  return geo;
}

/// Both-sided geometry of an interface: quadrature carried by the plus-side
/// facet (the fine facet on hanging interfaces), with embeddings of the
/// integration points into both cells' reference coordinates.
struct TwoSidedFacetGeometry {
  std::vector<Point> phys_points;
  std::vector<double> scaled_weights;  // w * |J_F| of the integration facet
  std::vector<Point> xi_plus, xi_minus;
  Point normal_plus{0, 0, 0};
  Point normal_minus{0, 0, 0};
  double jacobian = 0.0;
  double measure = 0.0;  // |F| of the integration facet
};

/// Evaluates the shared facet between `map_plus` (integration side, whole
/// facet `facet_plus`) and `map_minus` (embedding into facet `facet_minus`,
/// optionally a subfacet of it on hanging interfaces). Rejects cell pairs
/// whose facets do not coincide in physical space.
inline TwoSidedFacetGeometry two_sided_facet_geometry(const CellMap& map_plus, int facet_plus,
                                                      const CellMap& map_minus, int facet_minus,
                                                      const Quadrature& quad) {
  const FacetMap fplus{map_plus.dim, facet_plus, -1};
  const FacetMap fminus{map_minus.dim, facet_minus, -1};
  TwoSidedFacetGeometry geo;
  const FacetGeometry side = facet_geometry(map_plus, fplus, quad);
  geo.phys_points = side.phys_points;
  geo.scaled_weights = side.scaled_weights;
  geo.jacobian = side.jacobian;
  geo.measure = side.measure;
  geo.normal_plus = side.normal;
  geo.normal_minus = fminus.outward_normal();
  for (int a = 0; a < map_plus.dim; ++a)
    FEMBOX_REQUIRE(std::abs(geo.normal_plus[a] + geo.normal_minus[a]) < 1e-14,
                   "two_sided_facet_geometry: cells are not facing each other");
  geo.xi_plus.resize(geo.phys_points.size());
  geo.xi_minus.resize(geo.phys_points.size());
  for (std::size_t g = 0; g < geo.phys_points.size(); ++g) {
    geo.xi_plus[g] = fplus.to_cell_reference(quad.points[static_cast<int>(g)]);
    geo.xi_minus[g] = map_minus.to_reference(geo.phys_points[g]);
    for (int a = 0; a < map_minus.dim; ++a)
      FEMBOX_REQUIRE(geo.xi_minus[g][a] > -1.0 - 1e-12 && geo.xi_minus[g][a] < 1.0 + 1e-12,
                     "two_sided_facet_geometry: cells do not share the facet");
  }
  return geo;
}

}  // namespace fembox

#endif  // FEMBOX_REFERENCE_HPP
