#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "bottomup/feature_map.hpp"
#include "bottomup/graph.hpp"
#include "bottomup/params.hpp"
#include "bottomup/posenc.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup::cca {

/// 1x1 conv -> ReLU -> 1x1 conv applied to (features + position encoding).
struct KeyEncoder {
  Tensor w1, b1, w2, b2;  // w: C x C, b: C

  /// Fan-in scaled uniform weights, zero biases.
  static KeyEncoder init(std::size_t channels, std::mt19937_64& rng);
};

/// One learnable query per feature-map column, W x C.
struct ColumnQueries {
  Tensor q;

  /// i.i.d. normal entries with standard deviation 0.02.
  static ColumnQueries init(std::size_t width, std::size_t channels, std::mt19937_64& rng);
  std::size_t width() const { return q.dim(0); }
  std::size_t channels() const { return q.dim(1); }
};

// Plain kernels.

/// logits[i][j] = <keys[i][j][:], queries[j][:]>.
Tensor column_logits(const Tensor& keys, const Tensor& queries);
/// Per-column softmax of the column logits: an H x W map whose columns each
/// sum to one.
Tensor column_attention(const Tensor& keys, const Tensor& queries);
/// out[i][j][c] = weights[i][j] * features[i][j][c].
Tensor apply_weights(const Tensor& features, const Tensor& weights);
/// Same kernels writing into caller-owned buffers. `out` is reallocated
/// only when its shape does not match.
void column_attention(const Tensor& keys, const Tensor& queries, Tensor& out);
void apply_weights(const Tensor& features, const Tensor& weights, Tensor& out);
/// Single query, one softmax over all H*W pixels.
Tensor global_attention(const Tensor& keys, const Tensor& query);

// Differentiable forms.

Var encode_keys(const Var& features, const PositionalEncoding& pe, const Var& w1, const Var& b1, const Var& w2,
                const Var& b2);
Var column_attention(const Var& keys, const Var& queries);
Var apply_weights(const Var& features, const Var& weights);
Var global_attention(const Var& keys, const Var& query);

/// Multiply-accumulates of column_attention + apply_weights on an
/// H x W x C map: H*W*C for the logits and H*W*C for the re-weighting.
/// Softmax exponentials are not MACs and are excluded.
std::uint64_t cca_cost_model(std::size_t height, std::size_t width, std::size_t channels);

/// MACs of full pixel-to-pixel attention over the same map:
/// (H*W)^2 * C for the logits and (H*W)^2 * C for the value aggregation.
std::uint64_t global_cost_model(std::size_t height, std::size_t width, std::size_t channels);

/// Naive quadratic self-attention: every pixel attends to every pixel.
/// Used only as the complexity reference; instrumented like the CCA kernels.
Tensor full_self_attention(const Tensor& keys, const Tensor& values);

}  // namespace bottomup::cca
