#pragma once

#include <functional>
#include <limits>
#include <numeric>

#include <gcond/gcond.hpp>

namespace gtest_support {

using gcond::Index;
using gcond::Matrix;

// Central differences of a plain double-valued function. Kept separate from the
// library's own checker so the oracle does not share code with what it checks.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x0, double h = 1e-6) {
  Matrix g(x0.rows(), x0.cols());
  Matrix x = x0;
  for (Index j = 0; j < x0.cols(); ++j) {
    for (Index i = 0; i < x0.rows(); ++i) {
      x(i, j) = x0(i, j) + h;
      const double up = f(x);
      x(i, j) = x0(i, j) - h;
      const double down = f(x);
      x(i, j) = x0(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline double max_rel_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Index j = 0; j < analytic.cols(); ++j)
    for (Index i = 0; i < analytic.rows(); ++i)
      worst = std::max(worst, std::abs(analytic(i, j) - numeric(i, j)) / std::max(1.0, std::abs(numeric(i, j))));
  return worst;
}

inline Matrix random_matrix(Index r, Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  gcond::Rng rng(seed);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Small labelled graph with every split populated.
inline gcond::GraphDataset toy_graph(int n, int d, int classes, std::uint64_t seed, double p = 0.3) {
  gcond::GeneratorSpec s;
  s.model = gcond::ErdosRenyi{p};
  s.num_nodes = n;
  s.num_features = d;
  s.num_classes = classes;
  s.seed = seed;
  return gcond::generate_graph(s);
}

inline gcond::GraphDataset sbm_graph(std::vector<int> blocks, double p_in, double p_out, int d, std::uint64_t seed) {
  gcond::GeneratorSpec s;
  s.model = gcond::StochasticBlockModel{std::move(blocks), p_in, p_out};
  s.num_features = d;
  s.seed = seed;
  return gcond::generate_graph(s);
}

inline gcond::GraphDataset permuted(const gcond::GraphDataset& g, std::uint64_t seed) {
  gcond::Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(g.num_nodes));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  gcond::GraphDataset h = g;
  std::vector<std::pair<int, int>> edges;
  for (auto [a, b] : gcond::edge_list(g.adjacency)) {
    const int pa = perm[static_cast<std::size_t>(a)], pb = perm[static_cast<std::size_t>(b)];
    edges.emplace_back(std::min(pa, pb), std::max(pa, pb));
  }
  h.adjacency = gcond::adjacency_from_edges(g.num_nodes, edges);
  for (int i = 0; i < g.num_nodes; ++i) h.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
  return h;
}

// Exhaustive optimum over all assignments of n points to m non-empty clusters.
inline double brute_force_sse(const Matrix& x, int m) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      std::vector<int> count(static_cast<std::size_t>(m), 0);
      Matrix c = Matrix::Zero(m, x.cols());
      for (int k = 0; k < n; ++k) {
        ++count[static_cast<std::size_t>(assign[static_cast<std::size_t>(k)])];
        c.row(assign[static_cast<std::size_t>(k)]) += x.row(k);
      }
      for (int q : count)
        if (q == 0) return;
      for (int q = 0; q < m; ++q) c.row(q) /= count[static_cast<std::size_t>(q)];
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += (x.row(k) - c.row(assign[static_cast<std::size_t>(k)])).squaredNorm();
      best = std::min(best, s);
      return;
    }
    for (int q = 0; q < m; ++q) {
      assign[static_cast<std::size_t>(i)] = q;
      rec(i + 1);
    }
  };
  rec(0);
  return best;
}

}  // namespace gtest_support
