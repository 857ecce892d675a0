#pragma once

#include <vector>

#include "tankguard/common.hpp"

namespace tankguard {

// Adam with bias correction. Moments are stored per parameter so an optimizer
// instance is pinned to one network's flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr > 0.0, "adam: learning rate must be positive");
  }

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    require(params.size() == m_.size() && grads.size() == m_.size(),
            "adam: parameter/gradient size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
  }

  long steps() const { return t_; }
  double lr() const { return lr_; }

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

}  // namespace tankguard
