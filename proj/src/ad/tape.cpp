// SPDX-License-Identifier: Apache-2.0
#include "mvgb/ad/tape.hpp"

#include <array>

namespace mvgb::ad {

const Tensor &Var::value() const { return tape_->value(*this); }

Tensor Gradients::of(Var v) const {
  if (reached(v))
    return grads_[v.id()];
  return Tensor::zeros_like(tape_->value(v));
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size())
    throw std::invalid_argument("tape: variable recorded on a different tape");
}

Var Tape::constant(Tensor value) { return push(Node{"constant", {}, std::move(value), {}, false}); }

Var Tape::variable(Tensor value) { return push(Node{"variable", {}, std::move(value), {}, true}); }

Var Tape::watch(Parameter &param) {
  if (auto it = watched_.find(&param); it != watched_.end())
    return Var(this, it->second);
  bool grad = grad_enabled_ && param.trainable;
  Var v = push(Node{"parameter", {}, param.value, {}, grad, grad ? &param : nullptr});
  watched_.emplace(&param, v.id());
  return v;
}

Var Tape::record(const char *op, std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  Node node{op, {}, std::move(value), {}, false};
  node.inputs.reserve(inputs.size());
  for (const Var &in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad)
    node.backward = std::move(backward);
  return push(std::move(node));
}

Gradients Tape::backward(Var loss) const {
  check_owned(loss);
  const Node &root = nodes_[loss.id()];
  if (root.value.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(root.value.shape()));

  Gradients out;
  out.tape_ = this;
  out.grads_.resize(loss.id() + 1);
  out.grads_[loss.id()] = Tensor(root.value.shape(), 1.0);

  std::vector<Tensor *> slots;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    const Node &node = nodes_[id];
    if (out.grads_[id].empty() || !node.backward)
      continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      NodeId in = node.inputs[i];
      if (!nodes_[in].requires_grad)
        continue;
      Tensor &g = out.grads_[in];
      if (g.empty())
        g = Tensor::zeros_like(nodes_[in].value);
      slots[i] = &g;
    }
    node.backward(out.grads_[id], GradSlots(slots));
  }
  return out;
}

void Tape::accumulate_parameter_grads(const Gradients &grads) const {
  for (std::size_t id = 0; id < nodes_.size() && id < grads.grads_.size(); ++id) {
    const Node &node = nodes_[id];
    if (node.param && !grads.grads_[id].empty())
      node.param->grad += grads.grads_[id];
  }
}

} // namespace mvgb::ad
