// SPDX-License-Identifier: Apache-2.0
/**
 * @file   adam.hpp
 * @brief  Adam with bias correction.
 */
#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "mvgb/ad/tape.hpp"

namespace mvgb::train {

/// Non-finite loss or gradient during training.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NonFiniteGradient : public DivergenceError {
public:
  explicit NonFiniteGradient(const std::string &param)
      : DivergenceError("non-finite gradient in parameter '" + param + "'"), param_(param) {}
  const std::string &parameter() const { return param_; }

private:
  std::string param_;
};

class Adam {
public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update of every trainable parameter from Parameter::grad. All
  /// gradients are checked before anything is written.
  void step(std::span<ad::Parameter *const> params, double lr);

  std::size_t steps() const { return t_; }

private:
  struct Moments {
    ad::Tensor m;
    ad::Tensor v;
  };
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

} // namespace mvgb::train
