#pragma once

// Reverse-mode differentiation over dense matrices with a dynamic tape.
//
// Every op evaluates eagerly and appends a node to an Arena. The vector-Jacobian
// product of each op is itself written in terms of arena ops, so a gradient
// produced with create_graph=true is an ordinary node that can be differentiated
// again. That is what lets a loss defined on model gradients be differentiated
// with respect to the model inputs.
//
// The op set is closed (see Op); every member has a first- and second-order rule.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace gcond::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  SparseMatMul,  // constant sparse left operand
  Transpose,
  Add,
  Subtract,
  Scale,
  Hadamard,
  Relu,
  Sigmoid,
  Power,  // elementwise x^p; 0 where x == 0 and p < 0
  Sum,
  RowSums,
  ColSums,
  BroadcastRows,    // 1xn -> mxn
  BroadcastCols,    // mx1 -> mxn
  BroadcastScalar,  // 1x1 -> mxn
  Reshape,          // column-major
  Softmax,          // row-wise
  SoftmaxCrossEntropy,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::SparseMatMul: return "sparse_matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Subtract: return "subtract";
    case Op::Scale: return "scale";
    case Op::Hadamard: return "hadamard";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Power: return "power";
    case Op::Sum: return "sum";
    case Op::RowSums: return "row_sums";
    case Op::ColSums: return "col_sums";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::Reshape: return "reshape";
    case Op::Softmax: return "softmax";
    case Op::SoftmaxCrossEntropy: return "masked_softmax_cross_entropy";
  }
  return "?";
}

/// Targets of a masked mean cross-entropy, pre-scaled by the row weights 1/|mask|.
struct CrossEntropyTargets {
  Matrix weighted_onehot;  // w_i * onehot(y_i)
  Matrix row_weights;      // w_i broadcast across columns
};

struct Node {
  Matrix value;
  Op op = Op::Leaf;
  std::array<NodeId, 2> parents{kNoParent, kNoParent};
  double param = 0.0;
  Index shape0 = 0, shape1 = 0;
  bool requires_grad = false;
  std::shared_ptr<const SparseMatrix> sparse;
  std::shared_ptr<const SparseMatrix> sparse_transpose;
  std::shared_ptr<const CrossEntropyTargets> targets;
};

class Arena;

/// Handle to a node. Cheap to copy; valid while its Arena lives.
class Var {
 public:
  Var() = default;
  Var(Arena* arena, NodeId id) : arena_(arena), id_(id) {}

  const Matrix& value() const;
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Arena* arena() const { return arena_; }
  bool valid() const { return arena_ != nullptr; }

 private:
  Arena* arena_ = nullptr;
  NodeId id_ = kNoParent;
};

/// Append-only store of nodes for one differentiation episode. Single-threaded;
/// use one arena per worker.
class Arena {
 public:
  Arena() = default;
  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  Var leaf(Matrix value, bool requires_grad = true) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<NodeId>(nodes_.size() - 1)};
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

  /// Appends an op node. Nodes built while not recording, or whose parents are all
  /// constants, become constants themselves.
  Var push(Node n) {
    bool rg = false;
    if (recording_) {
      for (NodeId p : n.parents)
        if (p != kNoParent && nodes_[p].requires_grad) rg = true;
    }
    n.requires_grad = rg;
    if (!rg) {
      n.parents = {kNoParent, kNoParent};
      n.targets.reset();
    }
    nodes_.push_back(std::move(n));
    return {this, static_cast<NodeId>(nodes_.size() - 1)};
  }

  class RecordingScope {
   public:
    RecordingScope(Arena& a, bool on) : arena_(a), saved_(a.recording_) { a.recording_ = saved_ && on; }
    ~RecordingScope() { arena_.recording_ = saved_; }
    RecordingScope(const RecordingScope&) = delete;
    RecordingScope& operator=(const RecordingScope&) = delete;

   private:
    Arena& arena_;
    bool saved_;
  };

 private:
  std::deque<Node> nodes_;  // deque: references stay valid across push_back
  bool recording_ = true;
};

inline const Matrix& Var::value() const { return arena_->node(id_).value; }
inline bool Var::requires_grad() const { return arena_->node(id_).requires_grad; }
inline double Var::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar(): node is " + shape_str(rows(), cols()));
  return value()(0, 0);
}

namespace detail {

inline Arena& same_arena(Var a, Var b, const char* op) {
  require(a.valid() && b.valid(), std::string(op) + ": invalid operand");
  require(a.arena() == b.arena(), std::string(op) + ": operands live in different arenas");
  return *a.arena();
}

inline void same_shape(Var a, Var b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string("shape mismatch in ") + op + ": " + shape_str(a.rows(), a.cols()) + " vs " +
              shape_str(b.rows(), b.cols()));
}

inline Node make(Op op, Matrix value, Var a, Var b = {}) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.parents = {a.id(), b.valid() ? b.id() : kNoParent};
  return n;
}

inline double power_guarded(double x, double p) {
  if (x == 0.0 && p < 0.0) return 0.0;
  return std::pow(x, p);
}

inline Matrix row_softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace detail

// ---- forward ops -----------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Arena& ar = detail::same_arena(a, b, "matmul");
  require(a.cols() == b.rows(), "shape mismatch in matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                                    shape_str(b.rows(), b.cols()));
  return ar.push(detail::make(Op::MatMul, a.value() * b.value(), a, b));
}

/// S * b for a constant sparse S. The transpose is cached for the backward pass.
inline Var sparse_matmul(std::shared_ptr<const SparseMatrix> s, Var b,
                         std::shared_ptr<const SparseMatrix> s_transpose = nullptr) {
  require(s != nullptr && b.valid(), "sparse_matmul: invalid operand");
  require(s->cols() == b.rows(), "shape mismatch in sparse_matmul: " + shape_str(s->rows(), s->cols()) +
                                     " * " + shape_str(b.rows(), b.cols()));
  if (!s_transpose) s_transpose = std::make_shared<const SparseMatrix>(s->transpose());
  Node n = detail::make(Op::SparseMatMul, Matrix((*s) * b.value()), b);
  n.sparse = std::move(s);
  n.sparse_transpose = std::move(s_transpose);
  return b.arena()->push(std::move(n));
}

inline Var transpose(Var a) { return a.arena()->push(detail::make(Op::Transpose, a.value().transpose(), a)); }

inline Var add(Var a, Var b) {
  Arena& ar = detail::same_arena(a, b, "add");
  detail::same_shape(a, b, "add");
  return ar.push(detail::make(Op::Add, a.value() + b.value(), a, b));
}

inline Var subtract(Var a, Var b) {
  Arena& ar = detail::same_arena(a, b, "subtract");
  detail::same_shape(a, b, "subtract");
  return ar.push(detail::make(Op::Subtract, a.value() - b.value(), a, b));
}

inline Var scale(double c, Var a) {
  Node n = detail::make(Op::Scale, c * a.value(), a);
  n.param = c;
  return a.arena()->push(std::move(n));
}

inline Var hadamard(Var a, Var b) {
  Arena& ar = detail::same_arena(a, b, "hadamard");
  detail::same_shape(a, b, "hadamard");
  return ar.push(detail::make(Op::Hadamard, a.value().cwiseProduct(b.value()), a, b));
}

inline Var relu(Var a) { return a.arena()->push(detail::make(Op::Relu, a.value().cwiseMax(0.0), a)); }

inline Var sigmoid(Var a) {
  Matrix v = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.arena()->push(detail::make(Op::Sigmoid, std::move(v), a));
}

inline Var power(Var a, double p) {
  Matrix v = a.value().unaryExpr([p](double x) { return detail::power_guarded(x, p); });
  Node n = detail::make(Op::Power, std::move(v), a);
  n.param = p;
  return a.arena()->push(std::move(n));
}

inline Var sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.arena()->push(detail::make(Op::Sum, std::move(v), a));
}

inline Var row_sums(Var a) {
  return a.arena()->push(detail::make(Op::RowSums, Matrix(a.value().rowwise().sum()), a));
}

inline Var col_sums(Var a) {
  return a.arena()->push(detail::make(Op::ColSums, Matrix(a.value().colwise().sum()), a));
}

inline Var broadcast_rows(Var row, Index m) {
  require(row.rows() == 1, "broadcast_rows: operand must be 1xn, got " + shape_str(row.rows(), row.cols()));
  return row.arena()->push(detail::make(Op::BroadcastRows, Matrix(row.value().replicate(m, 1)), row));
}

inline Var broadcast_cols(Var col, Index n) {
  require(col.cols() == 1, "broadcast_cols: operand must be mx1, got " + shape_str(col.rows(), col.cols()));
  return col.arena()->push(detail::make(Op::BroadcastCols, Matrix(col.value().replicate(1, n)), col));
}

inline Var broadcast_scalar(Var s, Index m, Index n) {
  require(s.rows() == 1 && s.cols() == 1, "broadcast_scalar: operand must be 1x1");
  return s.arena()->push(detail::make(Op::BroadcastScalar, Matrix::Constant(m, n, s.value()(0, 0)), s));
}

inline Var reshape(Var a, Index rows, Index cols) {
  require(rows * cols == a.rows() * a.cols(), "reshape: element count mismatch");
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.arena()->push(detail::make(Op::Reshape, std::move(v), a));
}

inline Var softmax(Var logits) {
  return logits.arena()->push(detail::make(Op::Softmax, detail::row_softmax(logits.value()), logits));
}

/// Mean over the masked rows of -log softmax(logits)[label]. Scalar.
inline Var masked_softmax_cross_entropy(Var logits, std::span<const int> labels, std::span<const char> mask) {
  const Index m = logits.rows(), c = logits.cols();
  require(static_cast<Index>(labels.size()) == m && static_cast<Index>(mask.size()) == m,
          "masked_softmax_cross_entropy: labels/mask length must equal the number of rows");
  Index count = 0;
  for (char b : mask) count += b ? 1 : 0;
  require(count > 0, "masked_softmax_cross_entropy: empty mask");
  const double w = 1.0 / static_cast<double>(count);
  auto t = std::make_shared<CrossEntropyTargets>();
  t->weighted_onehot = Matrix::Zero(m, c);
  t->row_weights = Matrix::Zero(m, c);
  double loss = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < c, "masked_softmax_cross_entropy: label out of range");
    const auto row = logits.value().row(i);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += w * (lse - row(y));
    t->weighted_onehot(i, y) = w;
    t->row_weights.row(i).setConstant(w);
  }
  Matrix v(1, 1);
  v(0, 0) = loss;
  Node n = detail::make(Op::SoftmaxCrossEntropy, std::move(v), logits);
  n.targets = std::move(t);
  return logits.arena()->push(std::move(n));
}

// ---- composites --------------------------------------------------------------

/// Euclidean norm of each row (mx1). Subgradient 0 at zero rows.
inline Var row_l2_norms(Var a) { return power(row_sums(hadamard(a, a)), 0.5); }

/// a + broadcast of a 1xn bias row.
inline Var add_row(Var a, Var bias_row) { return add(a, broadcast_rows(bias_row, a.rows())); }

// ---- backward ----------------------------------------------------------------

namespace detail {

/// Adjoint contribution of `node` (handle `self`, adjoint `g`) to its parent `which`.
inline Var vjp(Arena& ar, const Node& node, Var self, Var g, int which) {
  const Var a{&ar, node.parents[0]};
  const Var b{&ar, node.parents[1]};
  switch (node.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      return which == 0 ? matmul(g, transpose(b)) : matmul(transpose(a), g);
    case Op::SparseMatMul:
      return sparse_matmul(node.sparse_transpose, g, node.sparse);
    case Op::Transpose:
      return transpose(g);
    case Op::Add:
      return g;
    case Op::Subtract:
      return which == 0 ? g : scale(-1.0, g);
    case Op::Scale:
      return scale(node.param, g);
    case Op::Hadamard:
      return which == 0 ? hadamard(g, b) : hadamard(g, a);
    case Op::Relu: {
      // step(x) is piecewise constant, so it enters as a constant: second-order
      // paths through relu contribute zero, and the subgradient at 0 is 0.
      Matrix mask = (a.value().array() > 0.0).cast<double>();
      return hadamard(g, ar.constant(std::move(mask)));
    }
    case Op::Sigmoid: {
      Var ones = ar.constant(Matrix::Ones(self.rows(), self.cols()));
      return hadamard(g, hadamard(self, subtract(ones, self)));
    }
    case Op::Power:
      return hadamard(g, scale(node.param, power(a, node.param - 1.0)));
    case Op::Sum:
      return broadcast_scalar(g, a.rows(), a.cols());
    case Op::RowSums:
      return broadcast_cols(g, a.cols());
    case Op::ColSums:
      return broadcast_rows(g, a.rows());
    case Op::BroadcastRows:
      return col_sums(g);
    case Op::BroadcastCols:
      return row_sums(g);
    case Op::BroadcastScalar:
      return sum(g);
    case Op::Reshape:
      return reshape(g, a.rows(), a.cols());
    case Op::Softmax:
      return hadamard(self, subtract(g, broadcast_cols(row_sums(hadamard(g, self)), self.cols())));
    case Op::SoftmaxCrossEntropy: {
      // d/dz = w_i (softmax(z)_i - onehot_i); softmax keeps it differentiable.
      Var weighted = hadamard(softmax(a), ar.constant(node.targets->row_weights));
      Var residual = subtract(weighted, ar.constant(node.targets->weighted_onehot));
      return hadamard(broadcast_scalar(g, a.rows(), a.cols()), residual);
    }
  }
  throw std::logic_error(std::string("vjp: unsupported op ") + op_name(node.op));
}

}  // namespace detail

/// Gradients of a scalar `output` with respect to each node in `wrt`.
///
/// With create_graph=true the returned gradients are differentiable nodes; with
/// create_graph=false they are constants. Both paths perform identical arithmetic.
/// A wrt node that `output` does not depend on gets a zero matrix.
inline std::vector<Var> grad(Var output, std::span<const Var> wrt, bool create_graph) {
  require(output.valid(), "grad: invalid output");
  require(output.rows() == 1 && output.cols() == 1,
          "grad: output must be scalar, got " + shape_str(output.rows(), output.cols()));
  Arena& ar = *output.arena();
  for (const Var& w : wrt) {
    require(w.arena() == &ar, "grad: wrt node from a different arena");
    require(w.requires_grad(), "grad: wrt node does not require grad");
  }

  const NodeId out_id = output.id();
  const std::size_t n = static_cast<std::size_t>(out_id) + 1;

  // Only nodes downstream of some wrt node can carry a useful adjoint.
  std::vector<char> relevant(n, 0);
  NodeId first = out_id;
  for (const Var& w : wrt) {
    if (w.id() <= out_id) {
      relevant[w.id()] = 1;
      first = std::min(first, w.id());
    }
  }
  for (NodeId id = first; id <= out_id; ++id) {
    const Node& nd = ar.node(id);
    if (!nd.requires_grad) continue;
    for (NodeId p : nd.parents)
      if (p != kNoParent && relevant[p]) relevant[id] = 1;
  }

  Arena::RecordingScope scope(ar, create_graph);
  std::vector<std::optional<Var>> adj(n);
  if (relevant[out_id]) adj[out_id] = ar.constant(Matrix::Ones(1, 1));

  for (NodeId id = out_id + 1; id-- > 0;) {
    if (!adj[id]) continue;
    const Node& nd = ar.node(id);
    if (!nd.requires_grad || nd.op == Op::Leaf) continue;
    const Var self{&ar, id};
    const Var g = *adj[id];
    for (int k = 0; k < 2; ++k) {
      const NodeId p = nd.parents[static_cast<std::size_t>(k)];
      if (p == kNoParent || !relevant[p]) continue;
      Var contrib = detail::vjp(ar, nd, self, g, k);
      adj[p] = adj[p] ? add(*adj[p], contrib) : contrib;
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= out_id && adj[w.id()]) {
      out.push_back(*adj[w.id()]);
    } else {
      out.push_back(ar.constant(Matrix::Zero(w.rows(), w.cols())));
    }
  }
  return out;
}

inline std::vector<Var> grad(Var output, std::initializer_list<Var> wrt, bool create_graph) {
  return grad(output, std::span<const Var>(wrt.begin(), wrt.size()), create_graph);
}

/// A scalar function of one matrix, built inside the given arena.
using ScalarFunction = std::function<Var(Arena&, Var)>;

/// Max over entries of |analytic - central difference| / max(1, |central difference|).
/// The analytic gradient comes from grad(); each probe evaluates f in a fresh arena.
inline double finite_diff_check(const ScalarFunction& f, const Matrix& x0, double epsilon) {
  Matrix analytic;
  {
    Arena ar;
    Var x = ar.leaf(x0, true);
    analytic = grad(f(ar, x), {x}, false)[0].value();
  }
  auto eval = [&](const Matrix& x) {
    Arena ar;
    return f(ar, ar.leaf(x, true)).scalar();
  };
  double worst = 0.0;
  Matrix probe = x0;
  for (Index j = 0; j < x0.cols(); ++j) {
    for (Index i = 0; i < x0.rows(); ++i) {
      probe(i, j) = x0(i, j) + epsilon;
      const double up = eval(probe);
      probe(i, j) = x0(i, j) - epsilon;
      const double down = eval(probe);
      probe(i, j) = x0(i, j);
      const double numeric = (up - down) / (2.0 * epsilon);
      worst = std::max(worst, std::abs(analytic(i, j) - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

/// Second-order variant: checks d/dx <grad f(x), direction> through the create_graph path.
inline double finite_diff_check_second_order(const ScalarFunction& f, const Matrix& x0, const Matrix& direction,
                                             double epsilon) {
  ScalarFunction contracted = [&](Arena& ar, Var x) {
    Var g = grad(f(ar, x), {x}, true)[0];
    return sum(hadamard(g, ar.constant(direction)));
  };
  return finite_diff_check(contracted, x0, epsilon);
}

}  // namespace gcond::ad
