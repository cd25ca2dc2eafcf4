#pragma once

#include <vector>

#include "vague/autodiff.hpp"

namespace vague::nn {

// Adam with bias correction. Operates in place on the tracked parameters'
// values using whatever is in their gradient buffers.
class Adam {
  public:
    explicit Adam(std::vector<Var> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

  private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

} // namespace vague::nn
