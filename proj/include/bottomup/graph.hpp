#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "bottomup/tensor.hpp"

namespace bottomup {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph& graph() const { return *graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient slots handed to a backward closure, one per recorded input.
/// A slot is null when that input does not require a gradient; otherwise it
/// points to an accumulator that the closure must add into (never assign).
using GradSlots = std::span<Tensor* const>;
using BackwardFn =
    std::function<void(const Tensor& upstream, const Tensor& output, GradSlots input_grads)>;

class Gradients {
 public:
  /// d(output)/d(v). Zeros when v does not influence the output.
  const Tensor& of(const Var& v) const;
  std::size_t nodes_visited() const noexcept { return visited_; }

 private:
  friend class Graph;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
  mutable std::vector<Tensor> zeros_;
  std::size_t visited_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so operands
/// always precede their consumers and a reverse sweep is a valid
/// topological traversal. Single-threaded by contract.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Accumulates d(output)/d(node) for every node; `output` must hold a
  /// single value.
  Gradients backward(const Var& output) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::span<const std::size_t> inputs_of(std::size_t id) const { return nodes_.at(id).inputs; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(const Var& v) const;

  std::deque<Node> nodes_;
};

}  // namespace bottomup
