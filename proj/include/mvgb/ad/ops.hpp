// SPDX-License-Identifier: Apache-2.0
/**
 * @file   ops.hpp
 * @brief  Differentiable primitives recorded on a Tape.
 *
 * Layout conventions: images are NHWC, i.e. (batch, time, freq, channel);
 * convolution kernels are (kh, kw, in_channels, out_channels).
 */
#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mvgb/ad/tape.hpp"

namespace mvgb::ad {

using Rng = std::mt19937_64;

enum class Padding { same, valid };

struct Extent2 {
  std::size_t rows = 1; // time
  std::size_t cols = 1; // frequency
};

/// Output extent of a strided window. VALID: floor((in - k) / s) + 1,
/// SAME: ceil(in / s). Throws ShapeError on underflow or zero stride.
std::size_t window_output(std::size_t in, std::size_t kernel, std::size_t stride, Padding pad,
                          const char *op);

// Elementwise. The right operand may broadcast when its shape is a suffix of
// the left operand's shape (bias rows, scalars).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);

/// (..., K) x (K, N) -> (..., N), or batched (B, M, K) x (B, K, N) -> (B, M, N).
Var matmul(Var a, Var b);

Var conv2d(Var x, Var kernel, Extent2 stride, Padding pad);
Var maxpool2d(Var x, Extent2 kernel, Extent2 stride, Padding pad = Padding::valid);

Var sum(Var x);
Var mean(Var x);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var stack(std::span<const Var> parts, std::size_t axis);
Var reshape(Var x, Shape shape);
/// Swap the two trailing axes.
Var transpose(Var x);

Var softmax(Var x);

/// Mean over rows of -sum_c y_c log softmax(z)_c. Labels are one-hot (or any
/// nonnegative rows) with the logits' shape (M, C).
Var softmax_cross_entropy(Var logits, const Tensor &labels);

/// Inverted dropout: scales kept units by 1/(1 - rate) at train time and is
/// the identity otherwise.
Var dropout(Var x, double rate, bool train, Rng &rng);

/// Normalizes over every axis except the last (channel) axis. In train mode
/// batch statistics are used and the running estimates are updated with
/// running = momentum * running + (1 - momentum) * batch.
Var batchnorm(Var x, Var gamma, Var beta, Tensor &running_mean, Tensor &running_var, bool train,
              double momentum = 0.9, double eps = 1e-5);

// Non-recorded helpers.
Tensor softmax_rows(const Tensor &logits);

} // namespace mvgb::ad
