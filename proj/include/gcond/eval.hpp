#pragma once

// Evaluation protocol: train a classifier on a (condensed) graph, select the
// epoch by validation accuracy on the original graph, report test accuracy on
// the original graph.

#include <future>
#include <set>
#include <string>
#include <vector>

#include "adam.hpp"
#include "models.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "synth_init.hpp"

namespace gcond {

struct EvalOptions {
  double lr = 0.01;
  int max_epochs = 600;
  int patience = 50;
};

struct TrainedEvaluator {
  ModelParams params;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<double> train_losses;
};

/// Adam with weight decay on `train_graph`'s training nodes. Early stopping watches
/// accuracy on `reference`'s validation split; without one, the last epoch is kept.
inline TrainedEvaluator train_evaluator(const GraphDataset& train_graph, ModelSpec spec, std::uint64_t seed,
                                        const GraphDataset& reference, const EvalOptions& opt = {}) {
  require(!train_graph.splits.train.empty(), "evaluate: training graph has no training nodes");
  std::set<int> classes;
  for (int i : train_graph.splits.train) classes.insert(train_graph.labels[static_cast<std::size_t>(i)]);
  require(classes.size() >= 2, "evaluate: degenerate label set, training nodes cover fewer than two classes");
  require(train_graph.num_features == reference.num_features,
          "dimension mismatch: training graph has " + std::to_string(train_graph.num_features) +
              " features, reference graph has " + std::to_string(reference.num_features));
  spec.num_features = train_graph.num_features;
  spec.num_classes = std::max(train_graph.num_classes, reference.num_classes);

  const StaticGraph train_static = StaticGraph::prepare(spec, train_graph);
  const StaticGraph ref_static = StaticGraph::prepare(spec, reference);
  const auto train_mask = GraphDataset::mask_of(train_graph.splits.train, train_graph.num_nodes);
  const bool early_stopping = !reference.splits.val.empty();

  TrainedEvaluator out;
  ModelParams theta = init_params(spec, seed);
  Adam adam(opt.lr, 0.9, 0.999, 1e-8, spec.weight_decay);
  out.params = theta;
  out.best_val_accuracy = -1.0;
  int since_best = 0;
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    auto lg = loss_and_gradient(train_static, theta, train_graph.labels, train_mask);
    if (!std::isfinite(lg.loss)) throw DivergenceError("evaluate: non-finite training loss at epoch " + std::to_string(epoch));
    out.train_losses.push_back(lg.loss);
    adam.step(theta.weights, lg.grads.layers);
    out.epochs_run = epoch + 1;
    if (!early_stopping) continue;
    const double val = accuracy(predict_logits(ref_static, theta), reference.labels, reference.splits.val);
    if (val > out.best_val_accuracy) {
      out.best_val_accuracy = val;
      out.best_epoch = epoch;
      out.params = theta;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  if (!early_stopping) {
    out.params = theta;
    out.best_epoch = out.epochs_run - 1;
    out.best_val_accuracy = 0.0;
  }
  return out;
}

inline double test_accuracy(const GraphDataset& original, const ModelSpec& spec_in, const ModelParams& p) {
  ModelSpec spec = spec_in;
  spec.num_features = original.num_features;
  spec.num_classes = static_cast<int>(p.weights.back().cols());
  return accuracy(predict_logits(StaticGraph::prepare(spec, original), p), original.labels, original.splits.test);
}

struct ArchitectureResult {
  std::string arch;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> accuracies;
};

struct EvalReport {
  std::vector<ArchitectureResult> results;
  int n_seeds = 0;
  std::uint64_t base_seed = 0;
};

/// Test accuracy on `original` of models trained on `condensed`, for each spec and
/// n_seeds seeds. Seeds fan out over `jobs` threads; results do not depend on `jobs`.
inline EvalReport evaluate(const GraphDataset& condensed, const GraphDataset& original, const std::vector<ModelSpec>& specs,
                           int n_seeds, std::uint64_t base_seed = 0, int jobs = 1, const EvalOptions& opt = {}) {
  require(n_seeds >= 1, "evaluate: n_seeds must be >= 1");
  require(condensed.num_features == original.num_features,
          "dimension mismatch: condensed graph has " + std::to_string(condensed.num_features) +
              " features, original has " + std::to_string(original.num_features));
  require(!original.splits.test.empty(), "evaluate: original graph has no test nodes");
  EvalReport report;
  report.n_seeds = n_seeds;
  report.base_seed = base_seed;
  for (const auto& spec : specs) {
    ArchitectureResult r;
    r.arch = arch_name(spec.arch);
    r.accuracies.assign(static_cast<std::size_t>(n_seeds), 0.0);
    auto run = [&](int s) {
      const auto seed = Rng::derive(base_seed, static_cast<std::uint64_t>(s));
      const auto trained = train_evaluator(condensed, spec, seed, original, opt);
      r.accuracies[static_cast<std::size_t>(s)] = test_accuracy(original, spec, trained.params);
    };
    if (jobs <= 1) {
      for (int s = 0; s < n_seeds; ++s) run(s);
    } else {
      std::vector<std::future<void>> pending;
      for (int s = 0; s < n_seeds; ++s) {
        pending.push_back(std::async(std::launch::async, run, s));
        if (pending.size() >= static_cast<std::size_t>(jobs)) {
          for (auto& f : pending) f.get();
          pending.clear();
        }
      }
      for (auto& f : pending) f.get();
    }
    r.mean = mean_of(r.accuracies);
    r.stddev = stddev_of(r.accuracies);
    report.results.push_back(std::move(r));
  }
  return report;
}

/// Induced subgraph on a class-stratified random sample of training nodes, sized
/// by the same budget rule as condensation. All sampled nodes are marked train.
inline GraphDataset random_coreset_baseline(const GraphDataset& d, double ratio, std::uint64_t seed) {
  const ClassBudget budget = make_budget(d, ratio);
  const SyntheticInit pick = init_features_random(d, budget, seed);
  const auto& nodes = pick.source_nodes;
  std::vector<int> local(static_cast<std::size_t>(d.num_nodes), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) local[static_cast<std::size_t>(nodes[k])] = static_cast<int>(k);
  std::vector<std::pair<int, int>> edges;
  for (auto [a, b] : edge_list(d.adjacency)) {
    const int la = local[static_cast<std::size_t>(a)], lb = local[static_cast<std::size_t>(b)];
    if (la >= 0 && lb >= 0) edges.emplace_back(std::min(la, lb), std::max(la, lb));
  }
  GraphDataset out;
  out.num_nodes = static_cast<int>(nodes.size());
  out.num_features = d.num_features;
  out.num_classes = d.num_classes;
  out.adjacency = adjacency_from_edges(out.num_nodes, edges);
  out.features = pick.features;
  out.labels = pick.labels;
  out.splits.train.resize(nodes.size());
  std::iota(out.splits.train.begin(), out.splits.train.end(), 0);
  validate(out);
  return out;
}

}  // namespace gcond
