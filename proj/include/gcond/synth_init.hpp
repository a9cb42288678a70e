#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace gcond {

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;                 // M x d
  std::vector<double> sse_history;  // after seeding, then after every Lloyd iteration
  int iterations = 0;

  double sse() const { return sse_history.empty() ? 0.0 : sse_history.back(); }
};

namespace kmeans_detail {

inline double sse_of(const Matrix& x, const std::vector<int>& assign, const Matrix& centroids) {
  double s = 0.0;
  for (Index i = 0; i < x.rows(); ++i) s += (x.row(i) - centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
  return s;
}

inline void assign_nearest(const Matrix& x, const Matrix& centroids, std::vector<int>& assign) {
  for (Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = (x.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assign[static_cast<std::size_t>(i)] = arg;
  }
}

/// Moves the point farthest from its centroid (taken from a cluster of size > 1)
/// into each empty cluster.
inline void repair_empty(const Matrix& x, Matrix& centroids, std::vector<int>& assign) {
  const auto m = centroids.rows();
  while (true) {
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    for (int a : assign) ++counts[static_cast<std::size_t>(a)];
    auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) return;
    double worst = -1.0;
    Index victim = -1;
    for (Index i = 0; i < x.rows(); ++i) {
      const int a = assign[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(a)] <= 1) continue;
      const double d = (x.row(i) - centroids.row(a)).squaredNorm();
      if (d > worst) {
        worst = d;
        victim = i;
      }
    }
    const auto target = static_cast<int>(empty - counts.begin());
    assign[static_cast<std::size_t>(victim)] = target;
    centroids.row(target) = x.row(victim);
  }
}

inline Matrix centroids_of(const Matrix& x, const std::vector<int>& assign, Index m) {
  Matrix c = Matrix::Zero(m, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    c.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  }
  for (Index k = 0; k < m; ++k) c.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
  return c;
}

// One k-means++ seeding followed by Lloyd iterations.
inline KMeansResult lloyd_run(const Matrix& points, int m, std::uint64_t seed, int max_iterations, double tolerance) {
  const Index n = points.rows();
  Rng rng(seed);

  Matrix centroids(m, points.cols());
  centroids.row(0) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int k = 1; k < m; ++k) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double r = rng.uniform01() * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(k) = points.row(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centroids.row(k)).squaredNorm());
  }

  KMeansResult res;
  res.assignments.assign(static_cast<std::size_t>(n), 0);
  assign_nearest(points, centroids, res.assignments);
  repair_empty(points, centroids, res.assignments);
  res.sse_history.push_back(sse_of(points, res.assignments, centroids));

  for (int it = 0; it < max_iterations; ++it) {
    Matrix next = centroids_of(points, res.assignments, m);
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    assign_nearest(points, centroids, res.assignments);
    repair_empty(points, centroids, res.assignments);
    res.sse_history.push_back(sse_of(points, res.assignments, centroids));
    res.iterations = it + 1;
    if (shift < tolerance) break;
  }
  res.centroids = centroids_of(points, res.assignments, m);
  return res;
}

}  // namespace kmeans_detail

/// k-means++ seeding followed by Lloyd iterations, until the largest centroid
/// shift drops below `tolerance` or `max_iterations` is reached. Every cluster
/// ends non-empty. Of `restarts` independently seeded runs the lowest-SSE one is
/// kept (a single run stalls in poor local optima surprisingly often on tiny inputs).
inline KMeansResult kmeans(const Matrix& points, int m, std::uint64_t seed, int max_iterations = 300,
                           double tolerance = 1e-6, int restarts = 10) {
  require(m >= 1, "kmeans: need at least one cluster");
  require(points.rows() >= m,
          "kmeans: " + std::to_string(points.rows()) + " points cannot form " + std::to_string(m) + " clusters");
  require(restarts >= 1, "kmeans: restarts must be >= 1");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult run = kmeans_detail::lloyd_run(points, m, Rng::derive(seed, static_cast<std::uint64_t>(r)),
                                                max_iterations, tolerance);
    if (r == 0 || run.sse() < best.sse()) best = std::move(run);
  }
  return best;
}

/// Synthetic nodes per class. Totals round(ratio * |train|), split in proportion to
/// the training-label histogram by largest remainder, with at least one node for
/// every class that has training nodes.
struct ClassBudget {
  std::vector<int> per_class;
  double ratio = 0.0;

  int total() const { return std::accumulate(per_class.begin(), per_class.end(), 0); }
};

inline std::vector<int> train_class_counts(const GraphDataset& d) {
  std::vector<int> counts(static_cast<std::size_t>(d.num_classes), 0);
  for (int i : d.splits.train) ++counts[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)])];
  return counts;
}

inline ClassBudget make_budget(const GraphDataset& d, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, "budget: ratio must be in (0,1]");
  const auto counts = train_class_counts(d);
  const int n_train = static_cast<int>(d.splits.train.size());
  require(n_train > 0, "budget: dataset has no training nodes");
  const int target = static_cast<int>(std::lround(ratio * n_train));

  ClassBudget b;
  b.ratio = ratio;
  b.per_class.assign(counts.size(), 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double share = static_cast<double>(target) * counts[c] / n_train;
    b.per_class[c] = static_cast<int>(std::floor(share));
    assigned += b.per_class[c];
    remainders.emplace_back(share - std::floor(share), static_cast<int>(c));
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (int k = 0; k < target - assigned; ++k) ++b.per_class[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k)].second)];
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) b.per_class[c] = std::max(b.per_class[c], 1);
  return b;
}

/// Initial synthetic features and labels; rows are grouped by class in class order.
struct SyntheticInit {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> source_nodes;  // original node each row was copied from
};

namespace init_detail {

inline std::vector<int> train_members(const GraphDataset& d, int c) {
  std::vector<int> out;
  for (int i : d.splits.train)
    if (d.labels[static_cast<std::size_t>(i)] == c) out.push_back(i);
  return out;
}

inline void check_budget(const GraphDataset& d, const ClassBudget& b) {
  require(static_cast<int>(b.per_class.size()) == d.num_classes, "budget: class count mismatch");
  const auto counts = train_class_counts(d);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(b.per_class[c] <= counts[c], "budget: class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                             " training nodes but a budget of " + std::to_string(b.per_class[c]));
  }
}

inline SyntheticInit assemble(const GraphDataset& d, const std::vector<int>& sources, const std::vector<int>& labels) {
  SyntheticInit out;
  out.features.resize(static_cast<Index>(sources.size()), d.num_features);
  for (std::size_t r = 0; r < sources.size(); ++r) out.features.row(static_cast<Index>(r)) = d.features.row(sources[r]);
  out.labels = labels;
  out.source_nodes = sources;
  return out;
}

}  // namespace init_detail

/// Per class: k-means the class's training features into M_c clusters and copy one
/// uniformly chosen member of each cluster.
inline SyntheticInit init_features_kmeans(const GraphDataset& d, const ClassBudget& budget, std::uint64_t seed) {
  init_detail::check_budget(d, budget);
  std::vector<int> sources, labels;
  for (int c = 0; c < d.num_classes; ++c) {
    const int m = budget.per_class[static_cast<std::size_t>(c)];
    if (m == 0) continue;
    const auto members = init_detail::train_members(d, c);
    Matrix xc(static_cast<Index>(members.size()), d.num_features);
    for (std::size_t r = 0; r < members.size(); ++r) xc.row(static_cast<Index>(r)) = d.features.row(members[r]);
    const auto km = kmeans(xc, m, Rng::derive(seed, static_cast<std::uint64_t>(2 * c)));
    Rng pick(Rng::derive(seed, static_cast<std::uint64_t>(2 * c + 1)));
    for (int k = 0; k < m; ++k) {
      std::vector<int> cluster;
      for (std::size_t r = 0; r < members.size(); ++r)
        if (km.assignments[r] == k) cluster.push_back(members[r]);
      sources.push_back(cluster[pick.below(cluster.size())]);
      labels.push_back(c);
    }
  }
  return init_detail::assemble(d, sources, labels);
}

/// Baseline: M_c training nodes per class sampled uniformly without replacement.
inline SyntheticInit init_features_random(const GraphDataset& d, const ClassBudget& budget, std::uint64_t seed) {
  init_detail::check_budget(d, budget);
  std::vector<int> sources, labels;
  for (int c = 0; c < d.num_classes; ++c) {
    const int m = budget.per_class[static_cast<std::size_t>(c)];
    if (m == 0) continue;
    const auto members = init_detail::train_members(d, c);
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(c)));
    for (int idx : rng.sample_without_replacement(static_cast<int>(members.size()), m)) {
      sources.push_back(members[static_cast<std::size_t>(idx)]);
      labels.push_back(c);
    }
  }
  return init_detail::assemble(d, sources, labels);
}

}  // namespace gcond
