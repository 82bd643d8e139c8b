// SPDX-License-Identifier: Apache-2.0
#include "mvgb/train/adam.hpp"

#include <cmath>

namespace mvgb::train {

void Adam::step(std::span<ad::Parameter *const> params, double lr) {
  for (const ad::Parameter *p : params) {
    if (!p->trainable)
      continue;
    if (p->grad.shape() != p->value.shape())
      throw std::invalid_argument("adam: gradient shape mismatch for '" + p->name + "'");
    for (double g : p->grad.values())
      if (!std::isfinite(g))
        throw NonFiniteGradient(p->name);
  }

  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ad::Parameter *p : params) {
    if (!p->trainable)
      continue;
    auto [it, fresh] = state_.try_emplace(p->name);
    Moments &s = it->second;
    if (fresh) {
      s.m = ad::Tensor::zeros_like(p->value);
      s.v = ad::Tensor::zeros_like(p->value);
    }
    double *w = p->value.data();
    const double *g = p->grad.data();
    double *m = s.m.data();
    double *v = s.v.data();
    for (std::size_t i = 0, n = p->value.size(); i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

} // namespace mvgb::train
