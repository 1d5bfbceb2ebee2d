#pragma once

#include <cstddef>
#include <vector>

#include "ckl/tensor.hpp"

namespace ckl::optim {

using ad::Tensor;

/// Plain gradient descent: p <- p - lr * g.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) const;

 private:
  double lr_;
};

/// Adam with bias correction. Moment buffers are sized on the first step.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Elementwise a += s * b.
void axpy(Tensor& a, double s, const Tensor& b);
/// True when every gradient entry is finite.
bool all_finite(const std::vector<Tensor>& grads);

}  // namespace ckl::optim
