#pragma once

// Gradient-matching distances.
//
// A layer's gradient matrix is compared column by column. For a synthetic column
// s and an original column t the per-column distance is
//
//   beta * ||s - t||  +  (1 - beta) * (1 - s.t / (||s|| ||t|| + eps))
//
// (CTRL / Cos+Norm), or either term alone (Norm / Cos). The layer distance is the
// sum over columns and the matching loss is the sum over layers.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "models.hpp"

namespace gcond {

enum class Metric { Cos, Norm, CosPlusNorm, CTRL };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Cos: return "cos";
    case Metric::Norm: return "norm";
    case Metric::CosPlusNorm: return "cos+norm";
    case Metric::CTRL: return "ctrl";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "cos") return Metric::Cos;
  if (s == "norm") return Metric::Norm;
  if (s == "cos+norm" || s == "cosnorm") return Metric::CosPlusNorm;
  if (s == "ctrl") return Metric::CTRL;
  throw ValidationError("unknown metric '" + s + "' (expected cos, norm, cos+norm or ctrl)");
}

struct MatchConfig {
  double beta = 0.3;
  Metric metric = Metric::CTRL;
  // Columns whose original-gradient norm exceeds this are matched on direction only.
  std::optional<double> grad_threshold;
  double cosine_epsilon = 1e-12;
};

inline void validate(const MatchConfig& c) {
  require(c.beta >= 0.0 && c.beta <= 1.0, "match: beta must be in [0,1]");
  require(!c.grad_threshold || *c.grad_threshold >= 0.0, "match: grad_threshold must be non-negative");
  require(c.cosine_epsilon >= 0.0, "match: cosine_epsilon must be non-negative");
}

namespace match_detail {

struct Weights {
  double euclid;
  double cosine;
};

inline Weights metric_weights(const MatchConfig& c) {
  switch (c.metric) {
    case Metric::Cos: return {0.0, 1.0};
    case Metric::Norm: return {1.0, 0.0};
    case Metric::CosPlusNorm:
    case Metric::CTRL: return {c.beta, 1.0 - c.beta};
  }
  return {0.0, 0.0};
}

}  // namespace match_detail

/// Sum over columns of the per-column distance between g_s (differentiable) and g_t.
inline ad::Var layer_distance(ad::Arena& ar, ad::Var g_s, const Matrix& g_t, const MatchConfig& cfg) {
  validate(cfg);
  require(g_s.rows() == g_t.rows() && g_s.cols() == g_t.cols(),
          "shape mismatch in layer_distance: " + shape_str(g_s.rows(), g_s.cols()) + " vs " +
              shape_str(g_t.rows(), g_t.cols()));
  const Index cols = g_t.cols();
  const Vector target_norms = g_t.colwise().norm().transpose();
  const auto base = match_detail::metric_weights(cfg);

  Matrix euclid_w(cols, 1), cosine_w(cols, 1);
  for (Index i = 0; i < cols; ++i) {
    const bool direction_only = cfg.grad_threshold && target_norms(i) > *cfg.grad_threshold;
    euclid_w(i, 0) = direction_only ? 0.0 : base.euclid;
    cosine_w(i, 0) = direction_only ? 1.0 : base.cosine;
  }

  // Work on transposes so that gradient columns become rows.
  ad::Var s = ad::transpose(g_s);
  ad::Var t = ar.constant(g_t.transpose());
  std::optional<ad::Var> total;
  auto accumulate = [&](ad::Var term) { total = total ? ad::add(*total, term) : term; };

  if (!euclid_w.isZero(0.0)) {
    ad::Var g1 = ad::row_l2_norms(ad::subtract(s, t));
    accumulate(ad::hadamard(ar.constant(euclid_w), g1));
  }
  if (!cosine_w.isZero(0.0)) {
    ad::Var dots = ad::row_sums(ad::hadamard(s, t));
    ad::Var denom = ad::add(ad::hadamard(ad::row_l2_norms(s), ar.constant(Matrix(target_norms))),
                            ar.constant(Matrix::Constant(cols, 1, cfg.cosine_epsilon)));
    ad::Var cosine = ad::hadamard(dots, ad::power(denom, -1.0));
    ad::Var g2 = ad::subtract(ar.constant(Matrix::Ones(cols, 1)), cosine);
    accumulate(ad::hadamard(ar.constant(cosine_w), g2));
  }
  if (!total) return ar.constant(Matrix::Zero(1, 1));
  return ad::sum(*total);
}

/// Distance between two vectors (given as d x 1 columns).
inline ad::Var column_distance(ad::Arena& ar, ad::Var u_s, const Vector& u_t, const MatchConfig& cfg) {
  require(u_s.cols() == 1 && u_s.rows() == u_t.size() && u_t.size() >= 1,
          "column_distance: vectors must be equal-length columns");
  return layer_distance(ar, u_s, Matrix(u_t), cfg);
}

/// Sum over layers of layer_distance. `synthetic` must be differentiable gradients;
/// `original` is constant.
inline ad::Var match_loss(ad::Arena& ar, std::span<const ad::Var> synthetic, const GradientSet& original,
                          const MatchConfig& cfg) {
  require(synthetic.size() == original.layers.size() && !synthetic.empty(),
          "match_loss: gradient sets have different layer counts");
  ad::Var total = layer_distance(ar, synthetic[0], original.layers[0], cfg);
  for (std::size_t l = 1; l < synthetic.size(); ++l) {
    total = ad::add(total, layer_distance(ar, synthetic[l], original.layers[l], cfg));
  }
  return total;
}

// ---- diagnostics (plain numbers, nothing differentiated) --------------------

inline void check_same_structure(const GradientSet& a, const GradientSet& b) {
  require(a.layers.size() == b.layers.size(), "gradient sets have different layer counts");
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    require(a.layers[l].rows() == b.layers[l].rows() && a.layers[l].cols() == b.layers[l].cols(),
            "gradient sets differ in shape at layer " + std::to_string(l));
  }
}

/// Sum over layers of | ||G_s||_F - ||G_t||_F |.
inline double magnitude_gap(const GradientSet& s, const GradientSet& t) {
  check_same_structure(s, t);
  double out = 0.0;
  for (std::size_t l = 0; l < s.layers.size(); ++l) out += std::abs(s.layers[l].norm() - t.layers[l].norm());
  return out;
}

/// Mean over all columns of all layers of the cosine distance 1 - cos.
inline double cosine_gap(const GradientSet& s, const GradientSet& t, double eps = 1e-12) {
  check_same_structure(s, t);
  double total = 0.0;
  Index count = 0;
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    for (Index j = 0; j < s.layers[l].cols(); ++j) {
      const auto a = s.layers[l].col(j);
      const auto b = t.layers[l].col(j);
      total += 1.0 - a.dot(b) / (a.norm() * b.norm() + eps);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

/// Frobenius norm of the stacked difference G_s - G_t.
inline double l2_gap(const GradientSet& s, const GradientSet& t) {
  check_same_structure(s, t);
  double sq = 0.0;
  for (std::size_t l = 0; l < s.layers.size(); ++l) sq += (s.layers[l] - t.layers[l]).squaredNorm();
  return std::sqrt(sq);
}

}  // namespace gcond
