#pragma once

#include <cmath>

#include "advbench/core/parameters.hpp"

namespace advbench {

/// SGD with heavy-ball momentum: v <- mu v + g; theta <- theta - lr v.
template <class T>
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum = 0.9) : lr_(learning_rate), mu_(momentum) {}

  void step(Parameters<T>& params, const Parameters<T>& grads) {
    if (velocity_.num_blocks() == 0) velocity_ = params.zeros_like();
    const T lr = static_cast<T>(lr_), mu = static_cast<T>(mu_);
    for (std::size_t b = 0; b < params.num_blocks(); ++b) {
      auto& p = params.block(b);
      auto& v = velocity_.block(b);
      const auto& g = grads.block(b);
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = mu * v[i] + g[i];
        p[i] -= lr * v[i];
      }
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, mu_;
  Parameters<T> velocity_;
};

template <class T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(Parameters<T>& params, const Parameters<T>& grads) {
    if (m_.num_blocks() == 0) {
      m_ = params.zeros_like();
      v_ = params.zeros_like();
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t b = 0; b < params.num_blocks(); ++b) {
      auto& p = params.block(b);
      auto& m = m_.block(b);
      auto& v = v_.block(b);
      const auto& g = grads.block(b);
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = static_cast<T>(b1_ * m[i] + (1.0 - b1_) * g[i]);
        v[i] = static_cast<T>(b2_ * v[i] + (1.0 - b2_) * g[i] * g[i]);
        p[i] -= static_cast<T>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  Parameters<T> m_, v_;
};

}  // namespace advbench
