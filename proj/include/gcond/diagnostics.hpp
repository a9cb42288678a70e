#pragma once

// Error decomposition along two training trajectories that start from the same
// parameters: theta_hat trained on the synthetic graph and theta_star trained on
// the original graph, both with plain gradient descent theta <- theta - eta * grad.
//
//   eps_t     = theta_hat_t - theta_star_t                     (accumulated error)
//   delta_t+1 = grad L_S(theta_hat_t) - grad L_T(theta_hat_t)   (matching error)
//   I_t       = grad L_T(theta_star_t + eps_t) - grad L_T(theta_star_t)  (initialization error)
//
// and eps_t+1 = eps_t - eta * (delta_t+1 + I_t) holds exactly. Momentum or Adam
// would break this identity, so only plain descent is offered here.

#include <map>
#include <vector>

#include "condense.hpp"
#include "models.hpp"
#include "stats.hpp"

namespace gcond {

struct ErrorStage {
  int stage = 0;  // t + 1
  double eps_norm = 0.0;
  double delta_norm = 0.0;
  double init_norm = 0.0;
  double identity_residual = 0.0;
};

struct ErrorDecomposition {
  std::vector<ErrorStage> stages;
};

namespace diag_detail {

inline std::vector<Matrix> axpy(const std::vector<Matrix>& a, double s, const std::vector<Matrix>& b) {
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < a.size(); ++k) out.push_back(a[k] + s * b[k]);
  return out;
}

inline double flat_norm(const std::vector<Matrix>& ms) {
  double sq = 0.0;
  for (const auto& m : ms) sq += m.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace diag_detail

inline ErrorDecomposition error_decomposition(const GraphDataset& original, const GraphDataset& synthetic,
                                              ModelSpec spec, int stages, double step_size, std::uint64_t seed) {
  using namespace diag_detail;
  require(stages >= 1, "diagnose: stages must be >= 1");
  require(step_size > 0.0, "diagnose: step size must be > 0");
  require(original.num_features == synthetic.num_features && original.num_classes == synthetic.num_classes,
          "diagnose: original and synthetic graphs disagree on feature or class count");
  spec.num_features = original.num_features;
  spec.num_classes = original.num_classes;

  const StaticGraph g_t = StaticGraph::prepare(spec, original);
  const StaticGraph g_s = StaticGraph::prepare(spec, synthetic);
  const auto mask_t = GraphDataset::mask_of(original.splits.train, original.num_nodes);
  const auto mask_s = GraphDataset::mask_of(synthetic.splits.train, synthetic.num_nodes);
  auto grad_t = [&](const std::vector<Matrix>& w) {
    return loss_and_gradient(g_t, ModelParams{w}, original.labels, mask_t).grads.layers;
  };
  auto grad_s = [&](const std::vector<Matrix>& w) {
    return loss_and_gradient(g_s, ModelParams{w}, synthetic.labels, mask_s).grads.layers;
  };

  std::vector<Matrix> theta_hat = init_params(spec, seed).weights;
  std::vector<Matrix> theta_star = theta_hat;
  std::vector<Matrix> eps = axpy(theta_hat, -1.0, theta_star);

  ErrorDecomposition out;
  for (int t = 0; t < stages; ++t) {
    const auto gs_hat = grad_s(theta_hat);
    const auto gt_hat = grad_t(theta_hat);
    const auto gt_star = grad_t(theta_star);
    const auto gt_shifted = grad_t(axpy(theta_star, 1.0, eps));
    const auto delta = axpy(gs_hat, -1.0, gt_hat);
    const auto init_err = axpy(gt_shifted, -1.0, gt_star);

    theta_hat = axpy(theta_hat, -step_size, gs_hat);
    theta_star = axpy(theta_star, -step_size, gt_star);
    const auto eps_next = axpy(theta_hat, -1.0, theta_star);
    const auto predicted = axpy(eps, -step_size, axpy(delta, 1.0, init_err));

    ErrorStage s;
    s.stage = t + 1;
    s.eps_norm = flat_norm(eps_next);
    s.delta_norm = flat_norm(delta);
    s.init_norm = flat_norm(init_err);
    s.identity_residual = flat_norm(axpy(eps_next, -1.0, predicted));
    if (!std::isfinite(s.eps_norm) || !std::isfinite(s.delta_norm) || !std::isfinite(s.init_norm)) {
      throw DivergenceError("diagnose: non-finite parameters at stage " + std::to_string(s.stage));
    }
    out.stages.push_back(s);
    eps = eps_next;
  }
  return out;
}

struct GapSummary {
  std::vector<int> epochs;
  std::vector<double> cos_gap, mag_gap, l2_gap;  // per-epoch means
  double cos_ratio = 1.0, mag_ratio = 1.0, l2_ratio = 1.0;  // final / initial epoch
};

inline GapSummary trajectory_report(const TrajectoryLog& log) {
  require(!log.empty(), "trajectory_report: empty log");
  struct Acc {
    double cos = 0, mag = 0, l2 = 0;
    int n = 0;
  };
  std::map<int, Acc> by_epoch;
  for (const auto& r : log) {
    auto& a = by_epoch[r.epoch];
    a.cos += r.cos_gap;
    a.mag += r.mag_gap;
    a.l2 += r.l2_gap;
    ++a.n;
  }
  GapSummary s;
  for (const auto& [e, a] : by_epoch) {
    s.epochs.push_back(e);
    s.cos_gap.push_back(a.cos / a.n);
    s.mag_gap.push_back(a.mag / a.n);
    s.l2_gap.push_back(a.l2 / a.n);
  }
  auto ratio = [](const std::vector<double>& v) { return v.front() == 0.0 ? (v.back() == 0.0 ? 1.0 : INFINITY) : v.back() / v.front(); };
  s.cos_ratio = ratio(s.cos_gap);
  s.mag_ratio = ratio(s.mag_gap);
  s.l2_ratio = ratio(s.l2_gap);
  return s;
}

}  // namespace gcond
