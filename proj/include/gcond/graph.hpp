#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace gcond {

/// Node index lists for the three disjoint splits.
struct Splits {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// An undirected, unweighted node-classification graph.
struct GraphDataset {
  int num_nodes = 0;
  int num_features = 0;
  int num_classes = 0;
  SparseMatrix adjacency;  // symmetric 0/1, zero diagonal
  Matrix features;         // num_nodes x num_features
  std::vector<int> labels;
  Splits splits;

  /// 0/1 indicator over nodes for one of the splits.
  static std::vector<char> mask_of(const std::vector<int>& idx, int n) {
    std::vector<char> m(static_cast<std::size_t>(n), 0);
    for (int i : idx) m[static_cast<std::size_t>(i)] = 1;
    return m;
  }

  Index num_edges() const { return adjacency.nonZeros() / 2; }
};

inline bool operator==(const Splits& a, const Splits& b) {
  return a.train == b.train && a.val == b.val && a.test == b.test;
}

/// Builds a symmetric 0/1 adjacency from undirected pairs (each listed once).
inline SparseMatrix adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    trips.emplace_back(a, b, 1.0);
    trips.emplace_back(b, a, 1.0);
  }
  SparseMatrix adj(n, n);
  adj.setFromTriplets(trips.begin(), trips.end());
  adj.makeCompressed();
  return adj;
}

/// Undirected edges (i < j), sorted lexicographically.
inline std::vector<std::pair<int, int>> edge_list(const SparseMatrix& adj) {
  std::vector<std::pair<int, int>> out;
  for (Index k = 0; k < adj.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(adj, k); it; ++it) {
      const auto i = static_cast<int>(it.row());
      const auto j = static_cast<int>(it.col());
      if (i < j && it.value() != 0.0) out.emplace_back(i, j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Checks every GraphDataset invariant; throws ValidationError naming the first violation.
inline void validate(const GraphDataset& g) {
  const int n = g.num_nodes;
  require(n >= 0 && g.num_features >= 0 && g.num_classes >= 1, "meta: invalid counts");
  require(g.adjacency.rows() == n && g.adjacency.cols() == n,
          "shape mismatch: adjacency is " + shape_str(g.adjacency.rows(), g.adjacency.cols()) +
              ", expected " + shape_str(n, n));
  require(g.features.rows() == n && g.features.cols() == g.num_features,
          "shape mismatch: features are " + shape_str(g.features.rows(), g.features.cols()) +
              ", expected " + shape_str(n, g.num_features));
  require(static_cast<int>(g.labels.size()) == n,
          "shape mismatch: " + std::to_string(g.labels.size()) + " labels for " +
              std::to_string(n) + " nodes");
  for (int i = 0; i < n; ++i) {
    const int y = g.labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < g.num_classes,
            "label out of range: node " + std::to_string(i) + " has label " + std::to_string(y));
  }
  for (Index k = 0; k < g.adjacency.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(g.adjacency, k); it; ++it) {
      require(it.row() != it.col(), "self-loop at node " + std::to_string(it.row()));
      require(it.value() == 1.0, "adjacency entries must be 0/1");
      require(g.adjacency.coeff(it.col(), it.row()) == it.value(),
              "non-symmetric adjacency at pair (" + std::to_string(it.row()) + "," +
                  std::to_string(it.col()) + ")");
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* split : {&g.splits.train, &g.splits.val, &g.splits.test}) {
    for (int i : *split) {
      require(i >= 0 && i < n, "split index out of range: " + std::to_string(i));
      require(!seen[static_cast<std::size_t>(i)],
              "splits overlap or repeat at node " + std::to_string(i));
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
  require(g.features.allFinite(), "features contain non-finite values");
}

/// Symmetric normalization D^{-1/2} (A [+ I]) D^{-1/2}. Rows of nodes with zero
/// degree come out as zero rows.
inline SparseMatrix normalize_adjacency_sparse(const SparseMatrix& adj, bool add_self_loops) {
  const Index n = adj.rows();
  SparseMatrix a = adj;
  if (add_self_loops) {
    SparseMatrix eye(n, n);
    eye.setIdentity();
    a = a + eye;
  }
  Vector deg = Vector::Zero(n);
  for (Index k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) deg(it.row()) += it.value();
  }
  Vector dinv(n);
  for (Index i = 0; i < n; ++i) dinv(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  for (Index k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      it.valueRef() = dinv(it.row()) * it.value() * dinv(it.col());
    }
  }
  a.prune(0.0);
  a.makeCompressed();
  return a;
}

inline Matrix normalize_adjacency(const SparseMatrix& adj, bool add_self_loops) {
  return Matrix(normalize_adjacency_sparse(adj, add_self_loops));
}

/// Dense overload, for small synthetic graphs.
inline Matrix normalize_adjacency(const Matrix& adj, bool add_self_loops) {
  const Index n = adj.rows();
  require(adj.cols() == n, "normalize_adjacency: matrix must be square");
  Matrix a = adj;
  if (add_self_loops) a.diagonal().array() += 1.0;
  const Vector deg = a.rowwise().sum();
  Vector dinv(n);
  for (Index i = 0; i < n; ++i) dinv(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  return dinv.asDiagonal() * a * dinv.asDiagonal();
}

/// A^k X by k successive multiplications.
template <typename Operator>
Matrix propagate(const Operator& a_hat, const Matrix& x, int k) {
  require(k >= 0, "propagate: k must be non-negative");
  require(a_hat.cols() == x.rows(),
          "propagate: shape mismatch " + shape_str(a_hat.rows(), a_hat.cols()) + " * " +
              shape_str(x.rows(), x.cols()));
  Matrix out = x;
  for (int i = 0; i < k; ++i) out = a_hat * out;
  return out;
}

}  // namespace gcond
