#pragma once

// SGC, GCN and MLP node classifiers on top of the autodiff core. No biases, no
// dropout: the gradients of these models are exactly reproducible.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace gcond {

enum class Arch { SGC, GCN, MLP };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::SGC: return "sgc";
    case Arch::GCN: return "gcn";
    case Arch::MLP: return "mlp";
  }
  return "?";
}

inline Arch parse_arch(const std::string& s) {
  if (s == "sgc") return Arch::SGC;
  if (s == "gcn") return Arch::GCN;
  if (s == "mlp") return Arch::MLP;
  throw ValidationError("unknown architecture '" + s + "' (expected sgc, gcn or mlp)");
}

struct ModelSpec {
  Arch arch = Arch::SGC;
  int k_hops = 2;      // SGC only
  int num_layers = 2;  // GCN/MLP only
  int hidden_units = 64;  // GCN/MLP only; SGC is a single linear map
  int num_features = 0;
  int num_classes = 0;
  double weight_decay = 5e-4;
};

inline void validate(const ModelSpec& s) {
  require(s.num_features >= 1 && s.num_classes >= 1, "model: num_features and num_classes must be >= 1");
  require(s.weight_decay >= 0.0, "model: weight_decay must be non-negative");
  if (s.arch == Arch::SGC) {
    require(s.k_hops >= 0, "model: k_hops must be >= 0");
  } else {
    require(s.num_layers == 2 || s.num_layers == 3, "model: num_layers must be 2 or 3");
    require(s.hidden_units >= 1, "model: hidden_units must be >= 1");
  }
}

/// (in, out) of every weight matrix.
inline std::vector<std::pair<int, int>> layer_shapes(const ModelSpec& s) {
  validate(s);
  if (s.arch == Arch::SGC) return {{s.num_features, s.num_classes}};
  std::vector<std::pair<int, int>> out;
  int in = s.num_features;
  for (int l = 0; l < s.num_layers; ++l) {
    const int o = l + 1 == s.num_layers ? s.num_classes : s.hidden_units;
    out.emplace_back(in, o);
    in = o;
  }
  return out;
}

struct ModelParams {
  std::vector<Matrix> weights;
};

/// Per-layer gradient matrices, same shapes as ModelParams::weights.
struct GradientSet {
  std::vector<Matrix> layers;
};

/// Glorot-uniform: W ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  for (auto [in, out] : layer_shapes(spec)) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-a, a);
    p.weights.push_back(std::move(w));
  }
  return p;
}

/// The propagation operator a model multiplies by: a differentiable dense node,
/// a constant sparse matrix, or nothing (MLP).
class Propagator {
 public:
  Propagator() = default;
  static Propagator dense(ad::Var a) {
    Propagator p;
    p.dense_ = a;
    return p;
  }
  static Propagator sparse(std::shared_ptr<const SparseMatrix> a,
                           std::shared_ptr<const SparseMatrix> a_transpose = nullptr) {
    Propagator p;
    p.sparse_ = std::move(a);
    p.sparse_t_ = a_transpose ? std::move(a_transpose) : std::make_shared<const SparseMatrix>(p.sparse_->transpose());
    return p;
  }

  bool empty() const { return !dense_.valid() && !sparse_; }

  ad::Var apply(ad::Var x) const {
    if (dense_.valid()) return ad::matmul(dense_, x);
    require(sparse_ != nullptr, "model: graph model needs a propagation matrix");
    return ad::sparse_matmul(sparse_, x, sparse_t_);
  }

 private:
  ad::Var dense_;
  std::shared_ptr<const SparseMatrix> sparse_, sparse_t_;
};

/// Model input. `hops_applied` records how many propagations `features` already
/// carries (e.g. a cached A^k X for SGC, or A X for the first GCN layer).
struct GraphInput {
  Propagator adjacency;
  ad::Var features;
  int hops_applied = 0;
};

/// SGC: (A^k X) W. GCN: A relu(... relu(A X W1) ...) WL. MLP: relu chain on X.
inline ad::Var forward(const ModelSpec& spec, std::span<const ad::Var> weights, const GraphInput& in) {
  const auto shapes = layer_shapes(spec);
  require(weights.size() == shapes.size(), "model: expected " + std::to_string(shapes.size()) +
                                               " weight matrices, got " + std::to_string(weights.size()));
  require(in.features.cols() == spec.num_features,
          "shape mismatch: features have " + std::to_string(in.features.cols()) + " columns, model expects " +
              std::to_string(spec.num_features));
  switch (spec.arch) {
    case Arch::SGC: {
      require(in.hops_applied <= spec.k_hops, "model: features propagated more than k_hops times");
      ad::Var x = in.features;
      for (int i = in.hops_applied; i < spec.k_hops; ++i) x = in.adjacency.apply(x);
      return ad::matmul(x, weights[0]);
    }
    case Arch::GCN: {
      require(in.hops_applied <= 1, "model: GCN accepts at most one cached propagation");
      ad::Var h = in.features;
      for (std::size_t l = 0; l < weights.size(); ++l) {
        h = ad::matmul(h, weights[l]);
        if (!(l == 0 && in.hops_applied == 1)) h = in.adjacency.apply(h);
        if (l + 1 < weights.size()) h = ad::relu(h);
      }
      return h;
    }
    case Arch::MLP: {
      require(in.hops_applied == 0, "model: MLP takes raw features");
      ad::Var h = in.features;
      for (std::size_t l = 0; l < weights.size(); ++l) {
        h = ad::matmul(h, weights[l]);
        if (l + 1 < weights.size()) h = ad::relu(h);
      }
      return h;
    }
  }
  throw std::logic_error("unreachable");
}

inline std::vector<ad::Var> weight_leaves(ad::Arena& ar, const ModelParams& p, bool requires_grad = true) {
  std::vector<ad::Var> out;
  for (const auto& w : p.weights) out.push_back(ar.leaf(w, requires_grad));
  return out;
}

inline std::vector<char> mask_for_class(std::span<const int> labels, int c, std::span<const char> within = {}) {
  std::vector<char> m(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    m[i] = (labels[i] == c && (within.empty() || within[i])) ? 1 : 0;
  return m;
}

/// Gradients of the masked mean cross-entropy w.r.t. every weight. With
/// create_graph the result stays differentiable w.r.t. the model input.
inline std::vector<ad::Var> class_loss_grad(const ModelSpec& spec, std::span<const ad::Var> weights,
                                            const GraphInput& in, std::span<const int> labels,
                                            std::span<const char> class_mask, bool create_graph) {
  bool any = false;
  for (char b : class_mask) any = any || b;
  require(any, "class_loss_grad: empty class");
  ad::Var logits = forward(spec, weights, in);
  ad::Var loss = ad::masked_softmax_cross_entropy(logits, labels, class_mask);
  return ad::grad(loss, weights, create_graph);
}

/// A constant graph (e.g. the original dataset) prepared for repeated, non-differentiated
/// model evaluation. Propagations that do not depend on weights are cached.
struct StaticGraph {
  ModelSpec spec;
  std::shared_ptr<const SparseMatrix> a_hat;
  std::shared_ptr<const SparseMatrix> a_hat_t;
  Matrix features;  // carries `hops_applied` propagations
  int hops_applied = 0;

  static StaticGraph prepare(const ModelSpec& spec, const SparseMatrix& normalized_adjacency, const Matrix& x) {
    StaticGraph g;
    g.spec = spec;
    g.a_hat = std::make_shared<const SparseMatrix>(normalized_adjacency);
    g.a_hat_t = std::make_shared<const SparseMatrix>(normalized_adjacency.transpose());
    switch (spec.arch) {
      case Arch::SGC:
        g.features = propagate(*g.a_hat, x, spec.k_hops);
        g.hops_applied = spec.k_hops;
        break;
      case Arch::GCN:
        g.features = (*g.a_hat) * x;
        g.hops_applied = 1;
        break;
      case Arch::MLP:
        g.features = x;
        g.hops_applied = 0;
        break;
    }
    return g;
  }

  /// From a dataset: A_hat = D^-1/2 (A + I) D^-1/2.
  static StaticGraph prepare(const ModelSpec& spec, const GraphDataset& d) {
    return prepare(spec, normalize_adjacency_sparse(d.adjacency, true), d.features);
  }

  GraphInput input(ad::Arena& ar) const {
    return {Propagator::sparse(a_hat, a_hat_t), ar.constant(features), hops_applied};
  }
};

struct LossAndGradient {
  double loss = 0.0;
  GradientSet grads;
};

inline LossAndGradient loss_and_gradient(const StaticGraph& g, const ModelParams& p, std::span<const int> labels,
                                         std::span<const char> mask) {
  ad::Arena ar;
  auto w = weight_leaves(ar, p);
  ad::Var loss = ad::masked_softmax_cross_entropy(forward(g.spec, w, g.input(ar)), labels, mask);
  LossAndGradient out;
  out.loss = loss.scalar();
  for (auto& v : ad::grad(loss, w, false)) out.grads.layers.push_back(v.value());
  return out;
}

inline GradientSet class_gradient_values(const StaticGraph& g, const ModelParams& p, std::span<const int> labels,
                                         std::span<const char> class_mask) {
  return loss_and_gradient(g, p, labels, class_mask).grads;
}

inline Matrix predict_logits(const StaticGraph& g, const ModelParams& p) {
  ad::Arena ar;
  auto w = weight_leaves(ar, p, false);
  return forward(g.spec, w, g.input(ar)).value();
}

inline std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index k;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

/// Fraction of `nodes` whose predicted class equals the label.
inline double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const int> nodes) {
  require(!nodes.empty(), "accuracy: empty node set");
  const auto pred = argmax_rows(logits);
  int correct = 0;
  for (int i : nodes) correct += pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)];
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

}  // namespace gcond
