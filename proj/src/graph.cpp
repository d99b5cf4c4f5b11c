#include "bottomup/graph.hpp"

#include <algorithm>

namespace bottomup {

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("value() on an unbound Var");
  return graph_->value(id_);
}

bool Var::requires_grad() const { return graph_ && graph_->requires_grad(id_); }

const Tensor& Gradients::of(const Var& v) const {
  if (v.id() < grads_.size() && !grads_[v.id()].empty()) return grads_[v.id()];
  if (v.id() >= shapes_.size()) throw ContractError("Gradients::of: Var does not belong to this graph");
  if (zeros_.size() != shapes_.size()) zeros_.resize(shapes_.size());
  auto& z = zeros_[v.id()];
  if (z.empty()) z = Tensor(shapes_[v.id()]);
  return z;
}

void Graph::check_owned(const Var& v) const {
  if (&v.graph() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var used with a graph that does not own it");
  }
}

Var Graph::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(const Var& output) const {
  check_owned(output);
  const auto& out = nodes_[output.id()].value;
  if (!out.is_scalar()) {
    throw ContractError("backward() needs a scalar output, got shape " + shape_to_string(out.shape()));
  }

  Gradients g;
  g.grads_.resize(nodes_.size());
  g.shapes_.reserve(nodes_.size());
  for (const auto& n : nodes_) g.shapes_.push_back(n.value.shape());
  if (!nodes_[output.id()].requires_grad) return g;

  g.grads_[output.id()] = Tensor::filled(out.shape(), 1.0);
  std::vector<Tensor*> slots;
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (g.grads_[id].empty() || !node.requires_grad) continue;
    ++g.visited_;
    if (!node.backward) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (g.grads_[in].empty()) g.grads_[in] = Tensor(nodes_[in].value.shape());
      slots[k] = &g.grads_[in];
    }
    node.backward(g.grads_[id], node.value, slots);
  }
  return g;
}

}  // namespace bottomup
