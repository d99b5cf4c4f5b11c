#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "bottomup/graph.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

// Multiply-accumulate counter incremented by the instrumented kernels
// (matmul, column attention, weight application, the quadratic reference).
// Thread-local so concurrent runs do not interfere.
namespace mac_counter {
void reset() noexcept;
std::uint64_t get() noexcept;
void add(std::uint64_t n) noexcept;
}  // namespace mac_counter

// Plain kernels on tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax(const Tensor& x);
/// Independent softmax down each column of an H x W matrix.
Tensor softmax_columns(const Tensor& x);
void softmax_columns_inplace(Tensor& x);

// Differentiable operations. Every result lives on the operands' graph.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x[M x N] + bias[N] broadcast over rows.
Var add_bias(const Var& x, const Var& bias);
Var matmul(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var sum(const Var& x);
Var softmax(const Var& x);
Var softmax_columns(const Var& x);
Var reshape(const Var& x, Shape shape);
/// Concatenate two rank-3 maps along the channel axis.
Var concat_channels(const Var& a, const Var& b);
/// Rows `rows` of an M x N matrix, in the given order (repeats allowed).
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
/// Per-pixel affine channel mix: x[H x W x Cin] * w[Cin x Cout] + b[Cout].
Var pointwise_linear(const Var& x, const Var& w, const Var& b);

/// Focal-style binary loss summed over every element, p = sigmoid(logit):
/// -t (1-p)^2 log(p) - (1-t) p^2 log(1-p). Targets may be soft.
Var focal_loss(const Var& logits, const Tensor& targets);
/// Sum of |x - target|.
Var l1_loss(const Var& x, const Tensor& target);

}  // namespace bottomup
