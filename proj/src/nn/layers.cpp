// SPDX-License-Identifier: Apache-2.0
#include "mvgb/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mvgb::nn {

using ad::Shape;
using ad::Tensor;

void ForwardContext::record(const std::string &layer, Var v) const {
  if (!trace)
    return;
  const Shape &s = v.shape();
  trace->emplace_back(layer, Shape(s.begin() + 1, s.end()));
}

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (double &v : t.values())
    v = dist(rng);
  return t;
}

namespace {

Var apply_dropout(const ForwardContext &ctx, Var x, double rate) {
  if (!ctx.train || rate <= 0.0)
    return x;
  if (!ctx.rng)
    throw std::logic_error("dropout at train time needs an rng");
  return ad::dropout(x, rate, true, *ctx.rng);
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(const std::string &name, std::size_t in, std::size_t out, Rng &rng)
    : weight_(name + ".weight", glorot({in, out}, in, out, rng)),
      bias_(name + ".bias", Tensor({out}, 0.0)) {}

Var Dense::forward(const ForwardContext &ctx, Var x) {
  return ad::add(ad::matmul(x, ctx.tape.watch(weight_)), ctx.tape.watch(bias_));
}

void Dense::parameters(std::vector<Parameter *> &out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- ConvBlock

void ConvBlockSpec::validate() const {
  if (kernel.rows == 0 || kernel.cols == 0 || stride.rows == 0 || stride.cols == 0 || filters == 0)
    throw std::invalid_argument(conv_name + ": kernel, stride and filters must be positive");
  if (pool && (pool_kernel.rows == 0 || pool_kernel.cols == 0 || pool_stride.rows == 0 ||
               pool_stride.cols == 0))
    throw std::invalid_argument(pool_name + ": pool kernel and stride must be positive");
}

ConvBlock::ConvBlock(const std::string &name, std::size_t in_channels, ConvBlockSpec spec, Rng &rng)
    : spec_(std::move(spec)) {
  spec_.validate();
  const std::size_t area = spec_.kernel.rows * spec_.kernel.cols;
  kernel_ = Parameter(name + ".kernel",
                      glorot({spec_.kernel.rows, spec_.kernel.cols, in_channels, spec_.filters},
                             area * in_channels, area * spec_.filters, rng));
  gamma_ = Parameter(name + ".bn.gamma", Tensor({spec_.filters}, 1.0));
  beta_ = Parameter(name + ".bn.beta", Tensor({spec_.filters}, 0.0));
  running_mean_ = Parameter(name + ".bn.running_mean", Tensor({spec_.filters}, 0.0), false);
  running_var_ = Parameter(name + ".bn.running_var", Tensor({spec_.filters}, 1.0), false);
}

Var ConvBlock::forward(const ForwardContext &ctx, Var x, double dropout_rate) {
  Var y = ad::conv2d(x, ctx.tape.watch(kernel_), spec_.stride, spec_.padding);
  ctx.record(spec_.conv_name, y);
  y = ad::batchnorm(y, ctx.tape.watch(gamma_), ctx.tape.watch(beta_), running_mean_.value,
                    running_var_.value, ctx.train);
  y = ad::relu(y);
  if (spec_.pool) {
    y = ad::maxpool2d(y, spec_.pool_kernel, spec_.pool_stride);
    ctx.record(spec_.pool_name, y);
  }
  return apply_dropout(ctx, y, dropout_rate);
}

void ConvBlock::parameters(std::vector<Parameter *> &out) {
  out.push_back(&kernel_);
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---------------------------------------------------------------- GRU

Gru::Gru(const std::string &name, std::size_t input_dim, std::size_t hidden, Rng &rng)
    : hidden_(hidden) {
  if (input_dim == 0 || hidden == 0)
    throw std::invalid_argument(name + ": GRU dimensions must be positive");
  // Each gate block is initialised on its own fan.
  Tensor wx({input_dim, 3 * hidden});
  Tensor uh({hidden, 3 * hidden});
  for (std::size_t g = 0; g < 3; ++g) {
    const Tensor a = glorot({input_dim, hidden}, input_dim, hidden, rng);
    const Tensor b = glorot({hidden, hidden}, hidden, hidden, rng);
    for (std::size_t i = 0; i < input_dim; ++i)
      for (std::size_t j = 0; j < hidden; ++j)
        wx[i * 3 * hidden + g * hidden + j] = a[i * hidden + j];
    for (std::size_t i = 0; i < hidden; ++i)
      for (std::size_t j = 0; j < hidden; ++j)
        uh[i * 3 * hidden + g * hidden + j] = b[i * hidden + j];
  }
  input_weight_ = Parameter(name + ".input_weight", std::move(wx));
  recurrent_weight_ = Parameter(name + ".recurrent_weight", std::move(uh));
  bias_ = Parameter(name + ".bias", Tensor({3 * hidden}, 0.0));
}

Var Gru::forward(const ForwardContext &ctx, Var x, bool reverse) {
  const Shape xs = x.shape();
  if (xs.size() != 3)
    throw ad::ShapeError("gru: expected (batch, time, features), got " + ad::to_string(xs));
  const std::size_t batch = xs[0], steps = xs[1], h3 = 3 * hidden_;
  Tape &tape = ctx.tape;

  Var projected = ad::add(ad::matmul(x, tape.watch(input_weight_)), tape.watch(bias_));
  Var u = tape.watch(recurrent_weight_);
  Var u_zr = ad::slice(u, 1, 0, 2 * hidden_);
  Var u_n = ad::slice(u, 1, 2 * hidden_, hidden_);

  Var h = tape.constant(Tensor({batch, hidden_}, 0.0));
  std::vector<Var> outputs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    Var xt = ad::reshape(ad::slice(projected, 1, t, 1), {batch, h3});
    Var zr = ad::sigmoid(ad::add(ad::slice(xt, 1, 0, 2 * hidden_), ad::matmul(h, u_zr)));
    Var z = ad::slice(zr, 1, 0, hidden_);
    Var r = ad::slice(zr, 1, hidden_, hidden_);
    Var n = ad::tanh(
        ad::add(ad::slice(xt, 1, 2 * hidden_, hidden_), ad::matmul(ad::mul(r, h), u_n)));
    h = ad::add(n, ad::mul(z, ad::sub(h, n)));
    outputs[t] = h;
  }
  return ad::stack(outputs, 1);
}

void Gru::parameters(std::vector<Parameter *> &out) {
  out.push_back(&input_weight_);
  out.push_back(&recurrent_weight_);
  out.push_back(&bias_);
}

BiGru::BiGru(const std::string &name, std::size_t input_dim, std::size_t hidden, Rng &rng)
    : forward_(name + ".fw", input_dim, hidden, rng), backward_(name + ".bw", input_dim, hidden, rng) {}

Var BiGru::forward(const ForwardContext &ctx, Var x, double dropout_rate) {
  Var y = ad::concat({forward_.forward(ctx, x, false), backward_.forward(ctx, x, true)});
  return apply_dropout(ctx, y, dropout_rate);
}

void BiGru::parameters(std::vector<Parameter *> &out) {
  forward_.parameters(out);
  backward_.parameters(out);
}

// ---------------------------------------------------------------- attention

AttentionPool::AttentionPool(const std::string &name, std::size_t input_dim,
                             std::size_t attention_dim, Rng &rng)
    : weight_(name + ".weight", glorot({input_dim, attention_dim}, input_dim, attention_dim, rng)),
      bias_(name + ".bias", Tensor({attention_dim}, 0.0)),
      context_(name + ".context", glorot({attention_dim, 1}, attention_dim, 1, rng)) {}

Var AttentionPool::weights(const ForwardContext &ctx, Var h) {
  const Shape hs = h.shape();
  if (hs.size() != 3)
    throw ad::ShapeError("attention: expected (batch, time, features), got " + ad::to_string(hs));
  Tape &tape = ctx.tape;
  Var e = ad::tanh(ad::add(ad::matmul(h, tape.watch(weight_)), tape.watch(bias_)));
  Var scores = ad::reshape(ad::matmul(e, tape.watch(context_)), {hs[0], hs[1]});
  return ad::softmax(scores);
}

Var AttentionPool::forward(const ForwardContext &ctx, Var h) {
  const Shape hs = h.shape();
  Var alpha = ad::reshape(weights(ctx, h), {hs[0], 1, hs[1]});
  return ad::reshape(ad::matmul(alpha, h), {hs[0], hs[2]});
}

void AttentionPool::parameters(std::vector<Parameter *> &out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
  out.push_back(&context_);
}

// ---------------------------------------------------------------- FC stack

FcStack::FcStack(const std::string &name, std::size_t in, const std::vector<std::size_t> &widths,
                 std::size_t n_classes, Rng &rng) {
  if (n_classes == 0)
    throw std::invalid_argument(name + ": n_classes must be positive");
  std::size_t width = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    hidden_.emplace_back(name + ".fc" + std::to_string(i + 1), width, widths[i], rng);
    width = widths[i];
  }
  output_ = Dense(name + ".fc" + std::to_string(widths.size() + 1), width, n_classes, rng);
}

Var FcStack::forward(const ForwardContext &ctx, Var x, double dropout_rate) {
  std::size_t i = 0;
  for (Dense &layer : hidden_) {
    x = apply_dropout(ctx, ad::relu(layer.forward(ctx, x)), dropout_rate);
    ctx.record("fc" + std::to_string(++i), x);
  }
  x = output_.forward(ctx, x);
  ctx.record("fc" + std::to_string(++i), x);
  return x;
}

void FcStack::parameters(std::vector<Parameter *> &out) {
  for (Dense &d : hidden_)
    d.parameters(out);
  output_.parameters(out);
}

std::size_t parameter_count(const std::vector<Parameter *> &params) {
  std::size_t n = 0;
  for (const Parameter *p : params)
    if (p->trainable)
      n += p->value.size();
  return n;
}

} // namespace mvgb::nn
