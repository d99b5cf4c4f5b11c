#include "bottomup/rrcs.hpp"

#include <cmath>

#include "bottomup/cca.hpp"
#include "bottomup/ops.hpp"

namespace bottomup {

Projection Projection::zeros(std::size_t channels) { return {Tensor({channels, channels}), Tensor({channels})}; }

Projection Projection::identity(std::size_t channels) {
  Projection p = zeros(channels);
  for (std::size_t c = 0; c < channels; ++c) p.w.at(c, c) = 1.0;
  return p;
}

Projection Projection::init(std::size_t channels, std::mt19937_64& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(channels));
  std::uniform_real_distribution<double> u(-bound, bound);
  Projection p = zeros(channels);
  for (auto& v : p.w.data()) v = u(rng);
  return p;
}

namespace {

// Storage row holding scan position k (0-based) for the given direction.
inline std::size_t scan_row(std::size_t k, std::size_t h, ScanDirection dir) {
  return dir == ScanDirection::BottomUp ? k : h - 1 - k;
}

void scan_into(const Tensor& in, Tensor& out, ScanDirection dir) {
  const auto h = in.dim(0), wc = in.dim(1) * in.dim(2);
  for (std::size_t col = 0; col < wc; ++col) {
    double acc = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t idx = scan_row(k, h, dir) * wc + col;
      acc += in[idx];
      out[idx] = acc;
    }
  }
}

// Transpose of the scan: each input row collects the upstream of every
// output row at or after it along the scan.
void scan_transpose_acc(const Tensor& up, Tensor& grad, ScanDirection dir) {
  const auto h = up.dim(0), wc = up.dim(1) * up.dim(2);
  for (std::size_t col = 0; col < wc; ++col) {
    double acc = 0.0;
    for (std::size_t k = h; k-- > 0;) {
      const std::size_t idx = scan_row(k, h, dir) * wc + col;
      acc += up[idx];
      grad[idx] += acc;
    }
  }
}

void normalize_into(const Tensor& in, Tensor& out, ScanDirection dir, bool accumulate) {
  const auto h = in.dim(0), wc = in.dim(1) * in.dim(2);
  for (std::size_t k = 0; k < h; ++k) {
    const std::size_t row = scan_row(k, h, dir);
    const double n = static_cast<double>(k + 1);
    for (std::size_t col = 0; col < wc; ++col) {
      const double v = in[row * wc + col] / n;
      if (accumulate)
        out[row * wc + col] += v;
      else
        out[row * wc + col] = v;
    }
  }
}

}  // namespace

Tensor vertical_cumsum(const Tensor& map, ScanDirection dir) {
  require_feature_map(map, "vertical_cumsum");
  Tensor out(map.shape());
  scan_into(map, out, dir);
  return out;
}

FeatureMap vertical_cumsum(const FeatureMap& map, ScanDirection dir) {
  return FeatureMap(vertical_cumsum(map.tensor(), dir));
}

Tensor normalize_rows(const Tensor& scanned, ScanDirection dir) {
  require_feature_map(scanned, "normalize_rows");
  Tensor out(scanned.shape());
  normalize_into(scanned, out, dir, false);
  return out;
}

FeatureMap normalize_rows(const FeatureMap& scanned, ScanDirection dir) {
  return FeatureMap(normalize_rows(scanned.tensor(), dir));
}

Tensor fuse(const Tensor& features, const Tensor& scan, const Projection& phi) {
  Graph g;
  return fuse(g.constant(features), g.constant(scan), g.constant(phi.w), g.constant(phi.b)).value();
}

FeatureMap fuse(const FeatureMap& features, const FeatureMap& scan, const Projection& phi) {
  return FeatureMap(fuse(features.tensor(), scan.tensor(), phi));
}

Var vertical_cumsum(const Var& map, ScanDirection dir) {
  return map.graph().record(vertical_cumsum(map.value(), dir), {map},
                            [dir](const Tensor& up, const Tensor&, GradSlots g) { scan_transpose_acc(up, *g[0], dir); });
}

Var normalize_rows(const Var& scanned, ScanDirection dir) {
  return scanned.graph().record(normalize_rows(scanned.value(), dir), {scanned},
                                [dir](const Tensor& up, const Tensor&, GradSlots g) {
                                  normalize_into(up, *g[0], dir, true);
                                });
}

Var fuse(const Var& features, const Var& scan, const Var& phi_w, const Var& phi_b) {
  require_same_shape(features.value(), scan.value(), "fuse");
  return add(features, pointwise_linear(scan, phi_w, phi_b));
}

void init_block_params(ParamSet& params, const BlockConfig& cfg, std::size_t width, std::size_t channels,
                       std::mt19937_64& rng, double phi_gain) {
  if (cfg.attention != AttentionMode::None) {
    auto enc = cca::KeyEncoder::init(channels, rng);
    params.add("block.w1", std::move(enc.w1));
    params.add("block.b1", std::move(enc.b1));
    params.add("block.w2", std::move(enc.w2));
    params.add("block.b2", std::move(enc.b2));
    if (cfg.attention == AttentionMode::Column) {
      params.add("block.queries", cca::ColumnQueries::init(width, channels, rng).q);
    } else {
      params.add("block.query", cca::ColumnQueries::init(1, channels, rng).q.reshaped({channels}));
    }
  }
  auto phi = Projection::init(channels, rng, phi_gain);
  params.add("block.phi_w", std::move(phi.w));
  params.add("block.phi_b", std::move(phi.b));
}

namespace {

Var attention_var(const Var& features, const BoundParams& p, const PositionalEncoding& pe, AttentionMode mode) {
  Var keys = cca::encode_keys(features, pe, p["block.w1"], p["block.b1"], p["block.w2"], p["block.b2"]);
  return mode == AttentionMode::Column ? cca::column_attention(keys, p["block.queries"])
                                       : cca::global_attention(keys, p["block.query"]);
}

Var after_weights(const Var& features, const Var* weights, const BoundParams& p, const BlockConfig& cfg) {
  Var fc = weights ? cca::apply_weights(features, *weights) : features;
  Var s = cfg.scan ? normalize_rows(vertical_cumsum(fc, cfg.direction), cfg.direction) : fc;
  return fuse(features, s, p["block.phi_w"], p["block.phi_b"]);
}

}  // namespace

Tensor block_attention(const Tensor& features, const ParamSet& params, const PositionalEncoding& pe,
                       const BlockConfig& cfg) {
  require_feature_map(features, "block_attention");
  if (cfg.attention == AttentionMode::None) return Tensor::filled({features.dim(0), features.dim(1)}, 1.0);
  Graph g;
  BoundParams p(g, params, false);
  return attention_var(g.constant(features), p, pe, cfg.attention).value();
}

Tensor scan_with_weights(const Tensor& features, const Tensor& weights, ScanDirection dir) {
  return normalize_rows(vertical_cumsum(cca::apply_weights(features, weights), dir), dir);
}

Tensor block_with_weights(const Tensor& features, const Tensor& weights, const ParamSet& params,
                          const BlockConfig& cfg) {
  Graph g;
  BoundParams p(g, params, false);
  Var w = g.constant(weights);
  return after_weights(g.constant(features), &w, p, cfg).value();
}

Tensor yolobu_block(const Tensor& features, const ParamSet& params, const PositionalEncoding& pe,
                    const BlockConfig& cfg) {
  Graph g;
  BoundParams p(g, params, false);
  return yolobu_block(g.constant(features), p, pe, cfg).value();
}

Var yolobu_block(const Var& features, const BoundParams& params, const PositionalEncoding& pe,
                 const BlockConfig& cfg) {
  require_feature_map(features.value(), "yolobu_block");
  if (cfg.attention == AttentionMode::None) return after_weights(features, nullptr, params, cfg);
  Var w = attention_var(features, params, pe, cfg.attention);
  return after_weights(features, &w, params, cfg);
}

}  // namespace bottomup
