#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace gcond {

struct ErdosRenyi {
  double p = 0.2;
};
struct BarabasiAlbert {
  int m_edges = 2;
};
struct WattsStrogatz {
  int k_neighbors = 4;
  double p_rewire = 0.2;
};
struct StochasticBlockModel {
  std::vector<int> block_sizes;
  double p_in = 0.3;
  double p_out = 0.02;
};

using GraphModel = std::variant<ErdosRenyi, BarabasiAlbert, WattsStrogatz, StochasticBlockModel>;

struct GeneratorSpec {
  GraphModel model = ErdosRenyi{};
  int num_nodes = 200;  // ignored for SBM, where block sizes define it
  int num_features = 128;
  double feature_bias = 0.0;
  double feature_std = 1.0;
  std::uint64_t seed = 0;
  int num_classes = 4;  // label alphabet for ER/BA/WS; SBM uses one class per block
  double train_fraction = 0.5;
  double val_fraction = 0.2;
};

namespace gen_detail {

// Independent streams so that, e.g., the structure can be held fixed while features vary.
enum Stream : std::uint64_t { kStructure = 0, kFeatures = 1, kLabels = 2, kSplits = 3 };

inline std::vector<std::pair<int, int>> erdos_renyi(int n, double p, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
  return edges;
}

// Each arriving node attaches to m distinct existing nodes chosen with probability
// proportional to degree; the first m nodes are seeds (the first arrival links to all).
inline std::vector<std::pair<int, int>> barabasi_albert(int n, int m, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  std::vector<int> repeated;
  std::vector<int> targets(static_cast<std::size_t>(m));
  std::iota(targets.begin(), targets.end(), 0);
  for (int source = m; source < n; ++source) {
    for (int t : targets) {
      edges.emplace_back(std::min(t, source), std::max(t, source));
      repeated.push_back(t);
      repeated.push_back(source);
    }
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < m) {
      chosen.insert(repeated[rng.below(repeated.size())]);
    }
    targets.assign(chosen.begin(), chosen.end());
  }
  return edges;
}

// Ring lattice with k/2 neighbours per side; each lattice edge (i, i+j) has its far
// endpoint rewired with probability p to a uniform node, avoiding loops and duplicates.
inline std::vector<std::pair<int, int>> watts_strogatz(int n, int k, double p, Rng& rng) {
  std::set<std::pair<int, int>> edges;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= k / 2; ++j) edges.insert(key(i, (i + j) % n));
  for (int j = 1; j <= k / 2; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto e = key(i, (i + j) % n);
      if (!rng.bernoulli(p) || !edges.count(e)) continue;
      int w = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      int guard = 0;
      while ((w == i || edges.count(key(i, w))) && guard++ < 4 * n) {
        w = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      }
      if (w == i || edges.count(key(i, w))) continue;
      edges.erase(e);
      edges.insert(key(i, w));
    }
  }
  return {edges.begin(), edges.end()};
}

inline std::vector<std::pair<int, int>> sbm(const std::vector<int>& blocks, double p_in, double p_out,
                                            Rng& rng) {
  std::vector<int> block_of;
  for (std::size_t b = 0; b < blocks.size(); ++b) block_of.insert(block_of.end(), blocks[b], static_cast<int>(b));
  const int n = static_cast<int>(block_of.size());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(block_of[i] == block_of[j] ? p_in : p_out)) edges.emplace_back(i, j);
  return edges;
}

}  // namespace gen_detail

inline Matrix gaussian_features(int n, int d, double mean, double stddev, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal(mean, stddev);
  return x;
}

/// Per-class shuffled split: round(train_fraction*|c|) train, round(val_fraction*|c|) val,
/// the rest test. Classes with any node get at least one train node.
inline Splits stratified_splits(const std::vector<int>& labels, int num_classes, double train_fraction,
                                double val_fraction, std::uint64_t seed) {
  Rng rng(seed);
  Splits s;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(static_cast<int>(i));
    if (members.empty()) continue;
    rng.shuffle(members);
    const int m = static_cast<int>(members.size());
    const int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * m)), 1, m);
    const int n_val = std::clamp(static_cast<int>(std::lround(val_fraction * m)), 0, m - n_train);
    s.train.insert(s.train.end(), members.begin(), members.begin() + n_train);
    s.val.insert(s.val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    s.test.insert(s.test.end(), members.begin() + n_train + n_val, members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline void validate(const GeneratorSpec& spec) {
  auto prob = [](double p, const char* name) {
    require(p >= 0.0 && p <= 1.0, std::string("generator: ") + name + " must be in [0,1]");
  };
  require(spec.num_features >= 0, "generator: num_features must be non-negative");
  require(spec.feature_std >= 0.0, "generator: feature_std must be non-negative");
  require(spec.train_fraction > 0.0 && spec.val_fraction >= 0.0 &&
              spec.train_fraction + spec.val_fraction <= 1.0,
          "generator: split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StochasticBlockModel>) {
          require(!m.block_sizes.empty(), "generator: SBM needs at least one block");
          int total = 0;
          for (int b : m.block_sizes) {
            require(b >= 1, "generator: SBM block sizes must be positive");
            total += b;
          }
          require(total >= 2, "generator: num_nodes must be >= 2");
          prob(m.p_in, "p_in");
          prob(m.p_out, "p_out");
        } else {
          require(spec.num_nodes >= 2, "generator: num_nodes must be >= 2");
          require(spec.num_classes >= 1, "generator: num_classes must be >= 1");
          if constexpr (std::is_same_v<T, ErdosRenyi>) prob(m.p, "p");
          if constexpr (std::is_same_v<T, BarabasiAlbert>) {
            require(m.m_edges >= 1 && m.m_edges < spec.num_nodes,
                    "generator: infeasible Barabasi-Albert spec, need 1 <= m_edges < num_nodes");
          }
          if constexpr (std::is_same_v<T, WattsStrogatz>) {
            require(m.k_neighbors >= 2 && m.k_neighbors % 2 == 0 && m.k_neighbors < spec.num_nodes,
                    "generator: infeasible Watts-Strogatz spec, need even 2 <= k_neighbors < num_nodes");
            prob(m.p_rewire, "p_rewire");
          }
        }
      },
      spec.model);
}

/// Only the structure of a spec, drawn from its structure stream.
inline SparseMatrix generate_structure(const GeneratorSpec& spec) {
  validate(spec);
  Rng rng(Rng::derive(spec.seed, gen_detail::kStructure));
  const auto edges = std::visit(
      [&](const auto& m) -> std::vector<std::pair<int, int>> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ErdosRenyi>) return gen_detail::erdos_renyi(spec.num_nodes, m.p, rng);
        if constexpr (std::is_same_v<T, BarabasiAlbert>)
          return gen_detail::barabasi_albert(spec.num_nodes, m.m_edges, rng);
        if constexpr (std::is_same_v<T, WattsStrogatz>)
          return gen_detail::watts_strogatz(spec.num_nodes, m.k_neighbors, m.p_rewire, rng);
        if constexpr (std::is_same_v<T, StochasticBlockModel>)
          return gen_detail::sbm(m.block_sizes, m.p_in, m.p_out, rng);
      },
      spec.model);
  int n = spec.num_nodes;
  if (const auto* s = std::get_if<StochasticBlockModel>(&spec.model)) {
    n = std::accumulate(s->block_sizes.begin(), s->block_sizes.end(), 0);
  }
  return adjacency_from_edges(n, edges);
}

inline GraphDataset generate_graph(const GeneratorSpec& spec) {
  GraphDataset g;
  g.adjacency = generate_structure(spec);
  g.num_nodes = static_cast<int>(g.adjacency.rows());
  g.num_features = spec.num_features;
  if (const auto* s = std::get_if<StochasticBlockModel>(&spec.model)) {
    g.num_classes = static_cast<int>(s->block_sizes.size());
    for (std::size_t b = 0; b < s->block_sizes.size(); ++b)
      g.labels.insert(g.labels.end(), s->block_sizes[b], static_cast<int>(b));
  } else {
    g.num_classes = spec.num_classes;
    Rng rng(Rng::derive(spec.seed, gen_detail::kLabels));
    for (int i = 0; i < g.num_nodes; ++i)
      g.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes))));
  }
  g.features = gaussian_features(g.num_nodes, g.num_features, spec.feature_bias, spec.feature_std,
                                 Rng::derive(spec.seed, gen_detail::kFeatures));
  g.splits = stratified_splits(g.labels, g.num_classes, spec.train_fraction, spec.val_fraction,
                               Rng::derive(spec.seed, gen_detail::kSplits));
  validate(g);
  return g;
}

}  // namespace gcond
