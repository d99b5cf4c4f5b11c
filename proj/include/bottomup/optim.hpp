#pragma once

#include <vector>

#include "bottomup/params.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

/// Adam with bias correction. Moments are allocated on the first step and
/// follow the ParamSet order.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// grads[i] belongs to params.entries()[i].
  void step(ParamSet& params, const std::vector<Tensor>& grads);

  double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace bottomup
