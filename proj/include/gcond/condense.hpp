#pragma once

// Gradient-matching condensation.
//
// The synthetic graph holds learnable features X' and the parameters of an MLP
// that generates its adjacency from X'. Each matching step compares, class by
// class, the backbone's loss gradients on the original graph with those on the
// synthetic graph, and moves X' or the adjacency MLP down the gradient of that
// distance. Between matching steps the backbone itself trains on the synthetic
// graph, so gradients are matched along a training trajectory, and the backbone
// is re-initialized periodically.

#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "adam.hpp"
#include "autodiff.hpp"
#include "graph.hpp"
#include "matching.hpp"
#include "models.hpp"
#include "rng.hpp"
#include "synth_init.hpp"

namespace gcond {

enum class InitMethod { KMeans, Random };

inline const char* init_name(InitMethod m) { return m == InitMethod::KMeans ? "kmeans" : "random"; }

inline InitMethod parse_init(const std::string& s) {
  if (s == "kmeans") return InitMethod::KMeans;
  if (s == "random") return InitMethod::Random;
  throw ValidationError("unknown init '" + s + "' (expected kmeans or random)");
}

struct CondenseConfig {
  double ratio = 0.1;
  int outer_epochs = 600;
  int model_reinit_every = 20;
  int match_steps_per_epoch = 10;
  int inner_model_steps = 3;
  double lr_model = 0.01;
  double lr_feat = 0.01;
  double lr_adj = 0.01;
  int feat_steps = 10;
  int adj_steps = 10;
  int adj_hidden = 128;
  InitMethod init = InitMethod::KMeans;
  bool class_weighting = false;  // weight each class's distance by |c| / |train|
  MatchConfig match;
  ModelSpec backbone;  // num_features / num_classes are filled from the dataset
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline void validate(const CondenseConfig& c) {
  require(c.ratio > 0.0 && c.ratio <= 1.0, "condense: ratio must be in (0,1]");
  require(c.outer_epochs >= 0, "condense: outer_epochs must be >= 0");
  require(c.model_reinit_every >= 1 && c.match_steps_per_epoch >= 1 && c.inner_model_steps >= 0 &&
              c.feat_steps >= 0 && c.adj_steps >= 0 && c.feat_steps + c.adj_steps >= 1 && c.adj_hidden >= 1 &&
              c.jobs >= 1,
          "condense: step counts must be >= 1");
  require(c.lr_model > 0.0 && c.lr_feat > 0.0 && c.lr_adj > 0.0, "condense: learning rates must be > 0");
  validate(c.match);
}

// ---- adjacency generator ----------------------------------------------------

/// Parameters of the 3-layer edge MLP. The first layer's weight is split into the
/// halves acting on x_i and x_j of the pair input [x_i ; x_j].
struct AdjacencyGenerator {
  std::vector<Matrix> params;  // w1_left, w1_right, b1, w2, b2, w3, b3

  static AdjacencyGenerator init(int num_features, int hidden, std::uint64_t seed) {
    Rng rng(seed);
    auto glorot = [&](Index in, Index out, Index fan_in) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + out));
      Matrix w(in, out);
      for (Index j = 0; j < out; ++j)
        for (Index i = 0; i < in; ++i) w(i, j) = rng.uniform(-a, a);
      return w;
    };
    AdjacencyGenerator g;
    g.params.push_back(glorot(num_features, hidden, 2 * num_features));
    g.params.push_back(glorot(num_features, hidden, 2 * num_features));
    g.params.push_back(Matrix::Zero(1, hidden));
    g.params.push_back(glorot(hidden, hidden, hidden));
    g.params.push_back(Matrix::Zero(1, hidden));
    g.params.push_back(glorot(hidden, 1, hidden));
    g.params.push_back(Matrix::Zero(1, 1));
    return g;
  }

  static AdjacencyGenerator zeros(int num_features, int hidden) {
    AdjacencyGenerator g = init(num_features, hidden, 0);
    for (auto& p : g.params) p.setZero();
    return g;
  }
};

namespace condense_detail {

/// Row p = i + j*n of the pair matrix picks node i (left) or node j (right).
inline std::pair<Matrix, Matrix> pair_selectors(Index n) {
  Matrix left = Matrix::Zero(n * n, n), right = Matrix::Zero(n * n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      left(i + j * n, i) = 1.0;
      right(i + j * n, j) = 1.0;
    }
  }
  return {std::move(left), std::move(right)};
}

}  // namespace condense_detail

/// A'_ij = sigmoid((e_ij + e_ji) / 2) with e_ij = MLP([x_i ; x_j]); diagonal set to 1.
inline ad::Var build_adjacency(ad::Arena& ar, std::span<const ad::Var> phi, ad::Var x) {
  require(phi.size() == 7, "build_adjacency: expected 7 generator parameters");
  require(phi[0].rows() == x.cols() && phi[1].rows() == x.cols(),
          "build_adjacency: generator input width does not match feature dimension");
  const Index n = x.rows();
  auto [left, right] = condense_detail::pair_selectors(n);
  ad::Var p = ad::matmul(x, phi[0]);
  ad::Var q = ad::matmul(x, phi[1]);
  ad::Var pairs = ad::add(ad::matmul(ar.constant(std::move(left)), p), ad::matmul(ar.constant(std::move(right)), q));
  ad::Var h1 = ad::relu(ad::add_row(pairs, phi[2]));
  ad::Var h2 = ad::relu(ad::add_row(ad::matmul(h1, phi[3]), phi[4]));
  ad::Var e = ad::reshape(ad::add_row(ad::matmul(h2, phi[5]), phi[6]), n, n);
  ad::Var s = ad::sigmoid(ad::scale(0.5, ad::add(e, ad::transpose(e))));
  Matrix off_diagonal = Matrix::Ones(n, n);
  off_diagonal.diagonal().setZero();
  return ad::add(ad::hadamard(s, ar.constant(std::move(off_diagonal))), ar.constant(Matrix::Identity(n, n)));
}

/// D^-1/2 A D^-1/2, differentiable. Zero-degree rows map to zero.
inline ad::Var normalize_dense(ad::Var a) {
  ad::Var dinv = ad::power(ad::row_sums(a), -0.5);
  return ad::hadamard(a, ad::matmul(dinv, ad::transpose(dinv)));
}

inline Matrix adjacency_values(const AdjacencyGenerator& gen, const Matrix& x) {
  ad::Arena ar;
  std::vector<ad::Var> phi;
  for (const auto& p : gen.params) phi.push_back(ar.constant(p));
  return build_adjacency(ar, phi, ar.constant(x)).value();
}

// ---- engine ----------------------------------------------------------------------

struct SyntheticGraph {
  Matrix features;
  AdjacencyGenerator generator;
  std::vector<int> labels;
  int num_classes = 0;
  CondenseConfig config;

  Matrix adjacency() const { return adjacency_values(generator, features); }
};

struct TrajectoryRecord {
  int epoch = 0;
  int step = 0;
  int cls = 0;
  double cos_gap = 0.0;
  double mag_gap = 0.0;
  double l2_gap = 0.0;
  double match_loss = 0.0;
};

using TrajectoryLog = std::vector<TrajectoryRecord>;

struct CondenseResult {
  SyntheticGraph synthetic;
  TrajectoryLog log;
};

namespace condense_detail {

inline std::vector<ad::Var> leaves(ad::Arena& ar, const std::vector<Matrix>& ms, bool requires_grad) {
  std::vector<ad::Var> out;
  for (const auto& m : ms) out.push_back(ar.leaf(m, requires_grad));
  return out;
}

/// Per-class original-graph gradients, optionally computed on several threads.
inline std::vector<GradientSet> original_gradients(const StaticGraph& g, const ModelParams& theta,
                                                   const std::vector<int>& labels,
                                                   const std::vector<std::vector<char>>& masks, int jobs) {
  std::vector<GradientSet> out(masks.size());
  auto work = [&](std::size_t c) {
    if (!masks[c].empty()) out[c] = class_gradient_values(g, theta, labels, masks[c]);
  };
  if (jobs <= 1 || masks.size() <= 1) {
    for (std::size_t c = 0; c < masks.size(); ++c) work(c);
    return out;
  }
  std::vector<std::future<void>> pending;
  for (std::size_t c = 0; c < masks.size(); ++c) {
    pending.push_back(std::async(std::launch::async, work, c));
    if (pending.size() >= static_cast<std::size_t>(jobs)) {
      for (auto& f : pending) f.get();
      pending.clear();
    }
  }
  for (auto& f : pending) f.get();
  return out;
}

inline GradientSet values_of(const std::vector<ad::Var>& vs) {
  GradientSet out;
  for (const auto& v : vs) out.layers.push_back(v.value());
  return out;
}

}  // namespace condense_detail

/// Numeric normalized synthetic adjacency, as a static graph for the backbone.
inline StaticGraph synthetic_static_graph(const ModelSpec& spec, const SyntheticGraph& s) {
  const Matrix a_hat = normalize_adjacency(s.adjacency(), false);
  return StaticGraph::prepare(spec, SparseMatrix(a_hat.sparseView()), s.features);
}

inline CondenseResult condense(const GraphDataset& data, const CondenseConfig& config_in) {
  validate(data);
  CondenseConfig config = config_in;
  config.backbone.num_features = data.num_features;
  config.backbone.num_classes = data.num_classes;
  validate(config);
  validate(config.backbone);

  const ClassBudget budget = make_budget(data, config.ratio);
  const SyntheticInit init = config.init == InitMethod::KMeans
                                 ? init_features_kmeans(data, budget, Rng::derive(config.seed, 1))
                                 : init_features_random(data, budget, Rng::derive(config.seed, 1));

  CondenseResult result;
  SyntheticGraph& syn = result.synthetic;
  syn.features = init.features;
  syn.labels = init.labels;
  syn.num_classes = data.num_classes;
  syn.config = config;
  syn.generator = AdjacencyGenerator::init(data.num_features, config.adj_hidden, Rng::derive(config.seed, 2));

  const ModelSpec& spec = config.backbone;
  const StaticGraph original = StaticGraph::prepare(spec, data);
  const auto train_mask = GraphDataset::mask_of(data.splits.train, data.num_nodes);
  const auto class_counts = train_class_counts(data);
  const int n_classes = data.num_classes;

  // Classes without synthetic nodes (absent from training) are skipped.
  std::vector<std::vector<char>> original_masks(static_cast<std::size_t>(n_classes));
  std::vector<std::vector<char>> synthetic_masks(static_cast<std::size_t>(n_classes));
  std::vector<double> class_weight(static_cast<std::size_t>(n_classes), 1.0);
  for (int c = 0; c < n_classes; ++c) {
    if (budget.per_class[static_cast<std::size_t>(c)] == 0) continue;
    original_masks[static_cast<std::size_t>(c)] = mask_for_class(data.labels, c, train_mask);
    synthetic_masks[static_cast<std::size_t>(c)] = mask_for_class(syn.labels, c);
    if (config.class_weighting) {
      class_weight[static_cast<std::size_t>(c)] =
          static_cast<double>(class_counts[static_cast<std::size_t>(c)]) / static_cast<double>(data.splits.train.size());
    }
  }
  const std::vector<char> all_synthetic(syn.labels.size(), 1);

  Adam feat_opt(config.lr_feat), adj_opt(config.lr_adj), model_opt(config.lr_model);
  ModelParams theta;
  long global_step = 0;
  const int cycle = config.feat_steps + config.adj_steps;

  for (int epoch = 0; epoch < config.outer_epochs; ++epoch) {
    if (epoch % config.model_reinit_every == 0) {
      theta = init_params(spec, Rng::derive(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
      model_opt.reset();
    }
    for (int step = 0; step < config.match_steps_per_epoch; ++step, ++global_step) {
      const bool update_features = (global_step % cycle) < config.feat_steps;
      const auto targets = condense_detail::original_gradients(original, theta, data.labels, original_masks, config.jobs);

      ad::Arena ar;
      ad::Var x = ar.leaf(syn.features, update_features);
      auto phi = condense_detail::leaves(ar, syn.generator.params, !update_features);
      ad::Var a_hat = normalize_dense(build_adjacency(ar, phi, x));
      auto w = weight_leaves(ar, theta);
      const GraphInput input{Propagator::dense(a_hat), x, 0};

      std::optional<ad::Var> total;
      for (int c = 0; c < n_classes; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (synthetic_masks[cu].empty()) continue;
        auto g_syn = class_loss_grad(spec, w, input, syn.labels, synthetic_masks[cu], true);
        ad::Var loss_c = match_loss(ar, g_syn, targets[cu], config.match);
        if (class_weight[cu] != 1.0) loss_c = ad::scale(class_weight[cu], loss_c);
        total = total ? ad::add(*total, loss_c) : loss_c;

        const GradientSet gs = condense_detail::values_of(g_syn);
        result.log.push_back({epoch, step, c, cosine_gap(gs, targets[cu]), magnitude_gap(gs, targets[cu]),
                              l2_gap(gs, targets[cu]), loss_c.scalar()});
      }
      if (!total) throw ValidationError("condense: no class has synthetic nodes");
      if (!std::isfinite(total->scalar())) {
        throw DivergenceError("condense: non-finite matching loss at epoch " + std::to_string(epoch) + " step " +
                              std::to_string(step));
      }

      if (update_features) {
        Matrix g = ad::grad(*total, {x}, false)[0].value();
        feat_opt.step(std::span<Matrix>(&syn.features, 1), std::span<const Matrix>(&g, 1));
      } else {
        auto gs = ad::grad(*total, phi, false);
        std::vector<Matrix> gv;
        for (auto& v : gs) gv.push_back(v.value());
        adj_opt.step(syn.generator.params, gv);
      }
      if (!syn.features.allFinite()) {
        throw DivergenceError("condense: non-finite synthetic features at epoch " + std::to_string(epoch) +
                              " step " + std::to_string(step));
      }

      if (config.inner_model_steps > 0) {
        const StaticGraph synthetic = synthetic_static_graph(spec, syn);
        for (int k = 0; k < config.inner_model_steps; ++k) {
          auto lg = loss_and_gradient(synthetic, theta, syn.labels, all_synthetic);
          model_opt.step(theta.weights, lg.grads.layers);
        }
      }
    }
  }
  return result;
}

/// Thresholds A' into a 0/1 graph (entries >= threshold kept; the diagonal becomes the
/// implicit self-loop) and marks every node as training.
inline GraphDataset finalize(const SyntheticGraph& s, double sparsify_threshold = 0.5) {
  const Matrix a = s.adjacency();
  const auto n = static_cast<int>(a.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a(i, j) >= sparsify_threshold) edges.emplace_back(i, j);
  GraphDataset g;
  g.num_nodes = n;
  g.num_features = static_cast<int>(s.features.cols());
  g.num_classes = s.num_classes;
  g.adjacency = adjacency_from_edges(n, edges);
  g.features = s.features;
  g.labels = s.labels;
  g.splits.train.resize(static_cast<std::size_t>(n));
  std::iota(g.splits.train.begin(), g.splits.train.end(), 0);
  validate(g);
  return g;
}

}  // namespace gcond
