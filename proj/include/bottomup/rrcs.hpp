#pragma once

#include <cstddef>
#include <random>

#include "bottomup/feature_map.hpp"
#include "bottomup/graph.hpp"
#include "bottomup/params.hpp"
#include "bottomup/posenc.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

enum class ScanDirection { BottomUp, UpBottom };

/// 1x1 channel mix applied to the normalized scan before the residual add.
struct Projection {
  Tensor w;  // C x C
  Tensor b;  // C

  static Projection zeros(std::size_t channels);
  static Projection identity(std::size_t channels);
  /// Fan-in uniform weights multiplied by `gain`, zero bias.
  static Projection init(std::size_t channels, std::mt19937_64& rng, double gain = 1.0);
};

/// Running sum over rows. Row 0 is the bottom row; BottomUp accumulates
/// upward from it, UpBottom accumulates downward from the top row.
Tensor vertical_cumsum(const Tensor& map, ScanDirection dir = ScanDirection::BottomUp);
FeatureMap vertical_cumsum(const FeatureMap& map, ScanDirection dir = ScanDirection::BottomUp);
/// Divides each row by its 1-based position along the scan direction.
Tensor normalize_rows(const Tensor& scanned, ScanDirection dir = ScanDirection::BottomUp);
FeatureMap normalize_rows(const FeatureMap& scanned, ScanDirection dir = ScanDirection::BottomUp);
/// features + scan * w + b, pixelwise.
Tensor fuse(const Tensor& features, const Tensor& scan, const Projection& phi);
FeatureMap fuse(const FeatureMap& features, const FeatureMap& scan, const Projection& phi);

Var vertical_cumsum(const Var& map, ScanDirection dir = ScanDirection::BottomUp);
Var normalize_rows(const Var& scanned, ScanDirection dir = ScanDirection::BottomUp);
Var fuse(const Var& features, const Var& scan, const Var& phi_w, const Var& phi_b);

enum class AttentionMode { Column, Global, None };

/// Which parts of the block are active. The default is the full block.
struct BlockConfig {
  AttentionMode attention = AttentionMode::Column;
  bool scan = true;
  ScanDirection direction = ScanDirection::BottomUp;
};

/// Adds the block's parameters under the "block." prefix:
/// key encoder (w1, b1, w2, b2), queries (W x C, or C for global mode),
/// and the projection (phi_w, phi_b). Attention parameters are skipped
/// when the mode is None.
void init_block_params(ParamSet& params, const BlockConfig& cfg, std::size_t width, std::size_t channels,
                       std::mt19937_64& rng, double phi_gain);

/// Attention map for the configured mode (H x W), or all ones for None.
Tensor block_attention(const Tensor& features, const ParamSet& params, const PositionalEncoding& pe,
                       const BlockConfig& cfg);
/// Everything after the attention weights: re-weight, scan, normalize, fuse.
/// With the weights held fixed this is what the causality property is about.
Tensor block_with_weights(const Tensor& features, const Tensor& weights, const ParamSet& params,
                          const BlockConfig& cfg);
/// Normalized scan of the re-weighted features, before the projection.
Tensor scan_with_weights(const Tensor& features, const Tensor& weights, ScanDirection dir);

Tensor yolobu_block(const Tensor& features, const ParamSet& params, const PositionalEncoding& pe,
                    const BlockConfig& cfg = {});
Var yolobu_block(const Var& features, const BoundParams& params, const PositionalEncoding& pe,
                 const BlockConfig& cfg = {});

}  // namespace bottomup
