// Copyright (c) 2026 fembox developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef FEMBOX_LINALG_HPP
#define FEMBOX_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fembox/common.hpp"

namespace fembox {

/// Square sparse matrix in CSR format, column indices sorted within each row.
/// With symmetric_storage only the upper triangle (including the diagonal)
/// is stored and kernels expand it on the fly.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;
  bool symmetric_storage = false;

  static CsrMatrix identity(int n) {
    CsrMatrix a;
    a.n = n;
    a.row_ptr.resize(static_cast<std::size_t>(n) + 1);
    a.col_idx.resize(static_cast<std::size_t>(n));
    a.values.assign(static_cast<std::size_t>(n), 1.0);
    for (int i = 0; i <= n; ++i) a.row_ptr[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n; ++i) a.col_idx[static_cast<std::size_t>(i)] = i;
    return a;
  }

  /// Builds a CSR matrix from coordinate entries; duplicates are summed.
  static CsrMatrix from_triplets(int n, std::vector<std::array<int, 2>> pattern,
                                 const std::vector<double>& vals,
                                 bool symmetric_storage = false) {
    FEMBOX_REQUIRE(pattern.size() == vals.size(), "from_triplets: size mismatch");
    std::vector<std::size_t> order(pattern.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pattern[a][0] != pattern[b][0]) return pattern[a][0] < pattern[b][0];
      return pattern[a][1] < pattern[b][1];
    });
    CsrMatrix m;
    m.n = n;
    m.symmetric_storage = symmetric_storage;
    m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& e = pattern[order[k]];
      if (k > 0 && pattern[order[k - 1]] == e) {
        m.values.back() += vals[order[k]];
        continue;
      }
      m.col_idx.push_back(e[1]);
      m.values.push_back(vals[order[k]]);
      ++m.row_ptr[static_cast<std::size_t>(e[0]) + 1];
    }
    for (int i = 0; i < n; ++i)
      m.row_ptr[static_cast<std::size_t>(i) + 1] += m.row_ptr[static_cast<std::size_t>(i)];
    return m;
  }

  double value_at(int i, int j) const {
    for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
      if (col_idx[static_cast<std::size_t>(k)] == j) return values[static_cast<std::size_t>(k)];
    if (symmetric_storage && j > i) return 0.0;
    if (symmetric_storage && j < i) return value_at(j, i);
    return 0.0;
  }
};

/// y = A x.
inline std::vector<double> spmv(const CsrMatrix& a, const std::vector<double>& x) {
  FEMBOX_REQUIRE(static_cast<int>(x.size()) == a.n, "spmv: dimension mismatch (n=", a.n,
                 ", x size ", x.size(), ")");
  std::vector<double> y(static_cast<std::size_t>(a.n), 0.0);
  for (int i = 0; i < a.n; ++i) {
    for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = a.col_idx[static_cast<std::size_t>(k)];
      const double v = a.values[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] += v * x[static_cast<std::size_t>(j)];
      if (a.symmetric_storage && j != i)
        y[static_cast<std::size_t>(j)] += v * x[static_cast<std::size_t>(i)];
    }
  }
  return y;
}

namespace detail {

/// Undirected adjacency from the CSR pattern (diagonal excluded).
inline std::vector<std::vector<int>> pattern_graph(const CsrMatrix& a) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(a.n));
  for (int i = 0; i < a.n; ++i)
    for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = a.col_idx[static_cast<std::size_t>(k)];
      if (j == i) continue;
      adj[static_cast<std::size_t>(i)].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

inline std::vector<int> bfs_levels(const std::vector<std::vector<int>>& adj, int start,
                                   int& last) {
  std::vector<int> level(adj.size(), -1);
  std::deque<int> queue{start};
  level[static_cast<std::size_t>(start)] = 0;
  last = start;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    last = u;
    for (int v : adj[static_cast<std::size_t>(u)])
      if (level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
  }
  return level;
}

}  // namespace detail

/// Reverse Cuthill-McKee ordering of the CSR pattern. perm[new] = old.
inline std::vector<int> rcm_ordering(const CsrMatrix& a) {
  const auto adj = detail::pattern_graph(a);
  const int n = a.n;
  std::vector<int> perm;
  perm.reserve(static_cast<std::size_t>(n));
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  auto degree = [&](int u) { return static_cast<int>(adj[static_cast<std::size_t>(u)].size()); };

  for (int seed = 0; seed < n; ++seed) {
    if (visited[static_cast<std::size_t>(seed)]) continue;
    // pseudo-peripheral start: double BFS from the component's min-degree node
    int start = seed;
    {
      int dummy;
      const auto lvl = detail::bfs_levels(adj, seed, dummy);
      for (int u = seed; u < n; ++u) {
        if (visited[static_cast<std::size_t>(u)] || lvl[static_cast<std::size_t>(u)] < 0)
          continue;
        if (degree(u) < degree(start)) start = u;
      }
    }
    int far;
    detail::bfs_levels(adj, start, far);
    start = far;

    std::deque<int> queue{start};
    visited[static_cast<std::size_t>(start)] = 1;
    std::vector<int> component;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      component.push_back(u);
      std::vector<int> next;
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!visited[static_cast<std::size_t>(v)]) {
          visited[static_cast<std::size_t>(v)] = 1;
          next.push_back(v);
        }
      std::sort(next.begin(), next.end(),
                [&](int x, int y) { return degree(x) != degree(y) ? degree(x) < degree(y) : x < y; });
      for (int v : next) queue.push_back(v);
    }
    perm.insert(perm.end(), component.begin(), component.end());
  }
  std::reverse(perm.begin(), perm.end());
  return perm;
}

/// Sparse symmetric positive definite solver: reverse Cuthill-McKee ordering
/// followed by an envelope (skyline) Cholesky factorization.
class CholeskySolver {
 public:
  explicit CholeskySolver(const CsrMatrix& a) : n_(a.n) {
    perm_ = rcm_ordering(a);
    inv_perm_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) inv_perm_[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])] = i;

    // permuted envelope: first[i] = min permuted column in row i
    first_.assign(static_cast<std::size_t>(n_), 0);
    for (int i = 0; i < n_; ++i) first_[static_cast<std::size_t>(i)] = i;
    auto note = [&](int pi, int pj) {
      const int r = std::max(pi, pj);
      const int c = std::min(pi, pj);
      first_[static_cast<std::size_t>(r)] = std::min(first_[static_cast<std::size_t>(r)], c);
    };
    for (int i = 0; i < n_; ++i)
      for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        note(inv_perm_[static_cast<std::size_t>(i)],
             inv_perm_[static_cast<std::size_t>(a.col_idx[static_cast<std::size_t>(k)])]);

    offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i)
      offsets_[static_cast<std::size_t>(i) + 1] =
          offsets_[static_cast<std::size_t>(i)] + (i - first_[static_cast<std::size_t>(i)] + 1);
    env_.assign(static_cast<std::size_t>(offsets_[static_cast<std::size_t>(n_)]), 0.0);

    // scatter A into the envelope (expanding symmetric storage)
    auto add = [&](int i, int j, double v) {
      const int pi = inv_perm_[static_cast<std::size_t>(i)];
      const int pj = inv_perm_[static_cast<std::size_t>(j)];
      const int r = std::max(pi, pj);
      const int c = std::min(pi, pj);
      env_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(r)] + (c - first_[static_cast<std::size_t>(r)]))] += v;
    };
    double max_diag = 0.0;
    for (int i = 0; i < a.n; ++i)
      for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const int j = a.col_idx[static_cast<std::size_t>(k)];
        const double v = a.values[static_cast<std::size_t>(k)];
        if (j == i) max_diag = std::max(max_diag, std::abs(v));
        // full storage holds (i,j) and (j,i); scatter each logical pair once
        if (!a.symmetric_storage && j > i) continue;
        add(i, j, v);
      }

    factorize(max_diag);
  }

  int size() const { return n_; }

  std::vector<double> solve(const std::vector<double>& b) const {
    FEMBOX_REQUIRE(static_cast<int>(b.size()) == n_, "CholeskySolver::solve: size mismatch");
    std::vector<double> y(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      y[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])];
    // forward substitution L y' = y
    for (int i = 0; i < n_; ++i) {
      double s = y[static_cast<std::size_t>(i)];
      const int fi = first_[static_cast<std::size_t>(i)];
      const double* row = &env_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i)])];
      for (int c = fi; c < i; ++c) s -= row[c - fi] * y[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(i)] = s / row[i - fi];
    }
    // backward substitution L^T x = y'
    for (int i = n_ - 1; i >= 0; --i) {
      const int fi = first_[static_cast<std::size_t>(i)];
      const double* row = &env_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i)])];
      const double xi = y[static_cast<std::size_t>(i)] / row[i - fi];
      y[static_cast<std::size_t>(i)] = xi;
      for (int c = fi; c < i; ++c) y[static_cast<std::size_t>(c)] -= row[c - fi] * xi;
    }
    std::vector<double> x(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      x[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])] = y[static_cast<std::size_t>(i)];
    return x;
  }

 private:
  void factorize(double max_diag) {
    const double tiny = 1e-14 * std::max(max_diag, 1.0);
    for (int i = 0; i < n_; ++i) {
      const int fi = first_[static_cast<std::size_t>(i)];
      double* row_i = &env_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(i)])];
      for (int j = fi; j < i; ++j) {
        const int fj = first_[static_cast<std::size_t>(j)];
        const double* row_j = &env_[static_cast<std::size_t>(offsets_[static_cast<std::size_t>(j)])];
        double s = row_i[j - fi];
        const int lo = std::max(fi, fj);
        for (int k = lo; k < j; ++k) s -= row_i[k - fi] * row_j[k - fj];
        row_i[j - fi] = s / row_j[j - fj];
      }
      double s = row_i[i - fi];
      for (int k = fi; k < i; ++k) s -= row_i[k - fi] * row_i[k - fi];
      FEMBOX_NUMERIC_CHECK(s > tiny,
                           "CholeskySolver: non-positive pivot at row ", i,
                           " (matrix is not positive definite)");
      row_i[i - fi] = std::sqrt(s);
    }
  }

  int n_ = 0;
  std::vector<int> perm_, inv_perm_;
  std::vector<int> first_, offsets_;
  std::vector<double> env_;
};

/// Direct solve of an SPD system; throws NumericError if a non-positive
/// pivot is met.
inline std::vector<double> cholesky_solve(const CsrMatrix& a, const std::vector<double>& b) {
  return CholeskySolver(a).solve(b);
}

/// Linear operator used as a preconditioner: z = M r.
using Preconditioner = std::function<std::vector<double>(const std::vector<double>&)>;

inline Preconditioner identity_preconditioner() {
  return [](const std::vector<double>& r) { return r; };
}

inline Preconditioner jacobi_preconditioner(const CsrMatrix& a) {
  std::vector<double> inv_diag(static_cast<std::size_t>(a.n), 0.0);
  for (int i = 0; i < a.n; ++i) {
    const double d = a.value_at(i, i);
    FEMBOX_NUMERIC_CHECK(d > 0.0, "jacobi_preconditioner: non-positive diagonal at ", i);
    inv_diag[static_cast<std::size_t>(i)] = 1.0 / d;
  }
  return [inv_diag](const std::vector<double>& r) {
    std::vector<double> z(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag[i] * r[i];
    return z;
  };
}

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // relative l2 residuals, one per iteration
  bool converged = false;
};

/// Preconditioned conjugate gradients. Converged when ||b - A x|| / ||b||
/// drops below rtol; reaching maxit leaves converged = false.
inline std::pair<std::vector<double>, SolveReport> pcg(const CsrMatrix& a,
                                                       const std::vector<double>& b,
                                                       const Preconditioner& m, double rtol,
                                                       int maxit) {
  FEMBOX_REQUIRE(static_cast<int>(b.size()) == a.n, "pcg: dimension mismatch");
  const int n = a.n;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  SolveReport report;
  const double bnorm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  if (bnorm == 0.0) {
    report.converged = true;
    return {x, report};
  }
  std::vector<double> r = b;
  std::vector<double> z = m(r);
  std::vector<double> p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  for (int it = 0; it < maxit; ++it) {
    const std::vector<double> ap = spmv(a, p);
    const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    FEMBOX_NUMERIC_CHECK(pap > 0.0, "pcg: operator is not positive definite (p^T A p = ", pap,
                         ")");
    const double alpha = rz / pap;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
      r[static_cast<std::size_t>(i)] -= alpha * ap[static_cast<std::size_t>(i)];
    }
    const double rnorm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    report.residual_history.push_back(rnorm / bnorm);
    report.iterations = it + 1;
    if (rnorm / bnorm <= rtol) {
      report.converged = true;
      break;
    }
    z = m(r);
    const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i)
      p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
  }
  return {x, report};
}

/// MatrixMarket coordinate export (1-based indices) of a matrix and a vector,
/// for debugging.
inline void write_matrix_market(const CsrMatrix& a, const std::string& path) {
  std::ofstream out(path);
  FEMBOX_REQUIRE(out.good(), "write_matrix_market: cannot open ", path);
  out << "%%MatrixMarket matrix coordinate real "
      << (a.symmetric_storage ? "symmetric" : "general") << "\n";
  out << a.n << " " << a.n << " " << a.values.size() << "\n";
  out.precision(17);
  for (int i = 0; i < a.n; ++i)
    for (int k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      // symmetric MatrixMarket stores the lower triangle
      const int j = a.col_idx[static_cast<std::size_t>(k)];
      if (a.symmetric_storage)
        out << j + 1 << " " << i + 1 << " " << a.values[static_cast<std::size_t>(k)] << "\n";
      else
        out << i + 1 << " " << j + 1 << " " << a.values[static_cast<std::size_t>(k)] << "\n";
    }
  FEMBOX_REQUIRE(out.good(), "write_matrix_market: write failed for ", path);
}

inline void write_matrix_market_vector(const std::vector<double>& v, const std::string& path) {
  std::ofstream out(path);
  FEMBOX_REQUIRE(out.good(), "write_matrix_market_vector: cannot open ", path);
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  out.precision(17);
  for (double x : v) out << x << "\n";
  FEMBOX_REQUIRE(out.good(), "write_matrix_market_vector: write failed for ", path);
}

}  // namespace fembox

#endif  // FEMBOX_LINALG_HPP
