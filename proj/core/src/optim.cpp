#include "ckl/optim.hpp"

#include <cmath>

#include "ckl/error.hpp"

namespace ckl::optim {

void axpy(Tensor& a, double s, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("axpy: " + a.shape_string() + " vs " + b.shape_string());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

bool all_finite(const std::vector<Tensor>& grads) {
  for (const Tensor& g : grads)
    if (!g.all_finite()) return false;
  return true;
}

void Sgd::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) const {
  if (params.size() != grads.size()) throw ShapeError("sgd: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) axpy(*params[i], -lr_, grads[i]);
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ShapeError("adam: " + p.shape_string() + " vs " + g.shape_string());
    for (std::size_t k = 0; k < p.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      p[k] -= lr_ * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + eps_);
    }
  }
}

}  // namespace ckl::optim
