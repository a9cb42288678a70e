#pragma once

#include <span>
#include <vector>

#include "common.hpp"

namespace gcond {

/// Adam with optional L2 weight decay folded into the gradient.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void step(std::span<Matrix> params, std::span<const Matrix> grads) {
    require(params.size() == grads.size(), "Adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(Matrix::Zero(p.rows(), p.cols()));
      }
    }
    require(m_.size() == params.size(), "Adam: parameter count changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix g = grads[k];
      if (weight_decay_ != 0.0) g += weight_decay_ * params[k];
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
      params[k].array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
  }

  void reset() {
    m_.clear();
    v_.clear();
    t_ = 0;
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::vector<Matrix> m_, v_;
  int t_ = 0;
};

}  // namespace gcond
