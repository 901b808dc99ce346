#pragma once

#include <cmath>
#include <vector>

#include "irst/autograd.hpp"

namespace irst {

// Adam with optional L2 regularization folded into the gradient.
// Frozen parameters are simply not handed to the optimizer.
class Adam {
 public:
  explicit Adam(std::vector<ag::Var> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps),
        wd_(weight_decay) {
    for (auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, t_);
    double bc2 = 1.0 - std::pow(b2_, t_);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      auto& p = params_[pi];
      auto& g = p.grad();
      auto& w = p.val().data;
      for (size_t i = 0; i < w.size(); ++i) {
        double gi = g[i] + wd_ * w[i];
        m_[pi][i] = b1_ * m_[pi][i] + (1.0 - b1_) * gi;
        v_[pi][i] = b2_ * v_[pi][i] + (1.0 - b2_) * gi * gi;
        double mhat = m_[pi][i] / bc1;
        double vhat = v_[pi][i] / bc2;
        w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  double lr() const { return lr_; }

 private:
  std::vector<ag::Var> params_;
  double lr_, b1_, b2_, eps_, wd_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace irst
