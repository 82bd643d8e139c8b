// SPDX-License-Identifier: Apache-2.0
/**
 * @file   layers.hpp
 * @brief  CRNN building blocks on top of the autodiff tape.
 *
 * All layers carry a leading batch axis: images are (B, T, F, C), sequences
 * (B, T, D), vectors (B, D).
 */
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mvgb/ad/ops.hpp"

namespace mvgb::nn {

using ad::Parameter;
using ad::Rng;
using ad::Tape;
using ad::Var;

/// Per-sample output shapes recorded during a forward pass, in layer order.
using ShapeTrace = std::vector<std::pair<std::string, ad::Shape>>;

struct ForwardContext {
  Tape &tape;
  bool train = false;
  Rng *rng = nullptr;         // required when train is set and dropout > 0
  ShapeTrace *trace = nullptr;

  void record(const std::string &layer, Var v) const;
};

/// Glorot-uniform tensor with the given fan-in/fan-out.
ad::Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng &rng);

class Dense {
public:
  Dense() = default;
  Dense(const std::string &name, std::size_t in, std::size_t out, Rng &rng);

  Var forward(const ForwardContext &ctx, Var x);
  void parameters(std::vector<Parameter *> &out);
  std::size_t out_features() const { return weight_.value.dim(1); }

private:
  Parameter weight_;
  Parameter bias_;
};

struct ConvBlockSpec {
  ad::Extent2 kernel{3, 3};
  ad::Extent2 stride{1, 1};
  std::size_t filters = 1;
  ad::Padding padding = ad::Padding::same;
  bool pool = true;
  ad::Extent2 pool_kernel{1, 2};
  ad::Extent2 pool_stride{1, 2};
  std::string conv_name = "conv";
  std::string pool_name = "pool";

  void validate() const;
};

/// conv -> batchnorm -> ReLU -> maxpool -> dropout.
class ConvBlock {
public:
  ConvBlock() = default;
  ConvBlock(const std::string &name, std::size_t in_channels, ConvBlockSpec spec, Rng &rng);

  Var forward(const ForwardContext &ctx, Var x, double dropout_rate);
  void parameters(std::vector<Parameter *> &out);
  const ConvBlockSpec &spec() const { return spec_; }

private:
  ConvBlockSpec spec_;
  Parameter kernel_;
  Parameter gamma_;
  Parameter beta_;
  Parameter running_mean_;
  Parameter running_var_;
};

/// Single-direction GRU, gates ordered [update | reset | candidate]:
///   z = sigma(x Wz + h Uz + bz)
///   r = sigma(x Wr + h Ur + br)
///   n = tanh(x Wn + (r * h) Un + bn)
///   h' = (1 - z) * n + z * h
class Gru {
public:
  Gru() = default;
  Gru(const std::string &name, std::size_t input_dim, std::size_t hidden, Rng &rng);

  /// (B, T, D) -> (B, T, H). When `reverse` is set the sequence is consumed
  /// from the last step and outputs are written back at their own time index.
  Var forward(const ForwardContext &ctx, Var x, bool reverse);
  void parameters(std::vector<Parameter *> &out);
  std::size_t hidden() const { return hidden_; }

private:
  std::size_t hidden_ = 0;
  Parameter input_weight_;     // (D, 3H)
  Parameter recurrent_weight_; // (H, 3H)
  Parameter bias_;             // (3H)
};

class BiGru {
public:
  BiGru() = default;
  BiGru(const std::string &name, std::size_t input_dim, std::size_t hidden, Rng &rng);

  /// (B, T, D) -> (B, T, 2H), forward and backward states concatenated.
  Var forward(const ForwardContext &ctx, Var x, double dropout_rate);
  void parameters(std::vector<Parameter *> &out);
  std::size_t output_dim() const { return 2 * forward_.hidden(); }

private:
  Gru forward_;
  Gru backward_;
};

/// Additive temporal attention:
///   e_t = v^T tanh(W h_t + b),  alpha = softmax(e),  out = sum_t alpha_t h_t
class AttentionPool {
public:
  AttentionPool() = default;
  AttentionPool(const std::string &name, std::size_t input_dim, std::size_t attention_dim, Rng &rng);

  /// (B, T, D) -> (B, D).
  Var forward(const ForwardContext &ctx, Var h);
  /// Attention weights alpha, (B, T).
  Var weights(const ForwardContext &ctx, Var h);
  void parameters(std::vector<Parameter *> &out);

private:
  Parameter weight_;  // (D, A)
  Parameter bias_;    // (A)
  Parameter context_; // (A, 1)
};

/// dense -> ReLU -> dropout for each hidden width, then a dense output layer
/// producing logits.
class FcStack {
public:
  FcStack() = default;
  FcStack(const std::string &name, std::size_t in, const std::vector<std::size_t> &widths,
          std::size_t n_classes, Rng &rng);

  Var forward(const ForwardContext &ctx, Var x, double dropout_rate);
  void parameters(std::vector<Parameter *> &out);

private:
  std::vector<Dense> hidden_;
  Dense output_;
};

std::size_t parameter_count(const std::vector<Parameter *> &params);

} // namespace mvgb::nn
