// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tape.hpp
 * @brief  Define-by-run reverse-mode differentiation tape.
 *
 * A Tape is rebuilt for every minibatch. Each recorded op appends a node
 * holding its forward value and a closure that maps the output gradient to
 * input gradients. Node ids are append order, so every node's inputs have
 * smaller ids and a single reverse sweep is a valid topological order.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvgb/ad/tensor.hpp"

namespace mvgb::ad {

using NodeId = std::uint32_t;

/// Trainable (or buffered) named tensor owned by a layer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), trainable(train) {}

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
public:
  Var() = default;

  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }
  NodeId id() const noexcept { return id_; }
  Tape &tape() const noexcept { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

private:
  Var(Tape *tape, NodeId id) : tape_(tape), id_(id) {}
  Tape *tape_ = nullptr;
  NodeId id_ = 0;
  friend class Tape;
};

/// Gradient accumulators for a node's inputs; nullptr where the input does
/// not require a gradient. Backward closures add into these.
using GradSlots = std::span<Tensor *const>;
using BackwardFn = std::function<void(const Tensor &grad_out, GradSlots grad_in)>;

class Gradients {
public:
  Gradients() = default;

  /// Gradient of the loss w.r.t. v; zeros when v is unreachable from the loss.
  Tensor of(Var v) const;
  bool reached(Var v) const { return v.id() < grads_.size() && !grads_[v.id()].empty(); }

private:
  std::vector<Tensor> grads_;
  const Tape *tape_ = nullptr;
  friend class Tape;
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf bound to a parameter. Repeated calls return the same node. With
  /// gradients disabled the parameter is recorded as a constant.
  Var watch(Parameter &param);

  /// Append an op node. The backward closure is dropped when no input
  /// requires a gradient.
  Var record(const char *op, std::span<const Var> inputs, Tensor value, BackwardFn backward);
  Var record(const char *op, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward) {
    return record(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(value),
                  std::move(backward));
  }

  /// Reverse sweep from a scalar loss. Each node is visited once, highest id
  /// first.
  Gradients backward(Var loss) const;

  /// Add the gradients of every watched parameter into Parameter::grad.
  void accumulate_parameter_grads(const Gradients &grads) const;

  const Tensor &value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  const char *op_name(Var v) const { return nodes_.at(v.id()).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

private:
  struct Node {
    const char *op;
    std::vector<NodeId> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter *param = nullptr;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter *, NodeId> watched_;
  bool grad_enabled_ = true;
};

} // namespace mvgb::ad
