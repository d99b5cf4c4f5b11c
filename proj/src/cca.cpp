#include "bottomup/cca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bottomup/ops.hpp"

namespace bottomup::cca {

KeyEncoder KeyEncoder::init(std::size_t channels, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto weights = [&] {
    Tensor w({channels, channels});
    for (auto& v : w.data()) v = u(rng);
    return w;
  };
  KeyEncoder enc;
  enc.w1 = weights();
  enc.b1 = Tensor({channels});
  enc.w2 = weights();
  enc.b2 = Tensor({channels});
  return enc;
}

ColumnQueries ColumnQueries::init(std::size_t width, std::size_t channels, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.02);
  ColumnQueries q{Tensor({width, channels})};
  for (auto& v : q.q.data()) v = n(rng);
  return q;
}

namespace {

void require_keys_queries(const Tensor& keys, const Tensor& queries) {
  require_feature_map(keys, "column_attention");
  require_rank(queries, 2, "column_attention");
  if (queries.dim(0) != keys.dim(1) || queries.dim(1) != keys.dim(2)) {
    throw DimensionError("column_attention: keys " + shape_to_string(keys.shape()) + " need W x C queries, got " +
                         shape_to_string(queries.shape()));
  }
}

void require_weights(const Tensor& features, const Tensor& weights) {
  require_feature_map(features, "apply_weights");
  require_rank(weights, 2, "apply_weights");
  if (weights.dim(0) != features.dim(0) || weights.dim(1) != features.dim(1)) {
    throw DimensionError("apply_weights: weights " + shape_to_string(weights.shape()) + " vs map " +
                         shape_to_string(features.shape()));
  }
}

void logits_into(const Tensor& keys, const Tensor& queries, Tensor& logits) {
  require_keys_queries(keys, queries);
  const auto h = keys.dim(0), w = keys.dim(1), c = keys.dim(2);
  if (logits.shape() != Shape{h, w}) logits = Tensor({h, w});
  const double* k = keys.data().data();
  const double* q = queries.data().data();
  double* out = logits.data().data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double* kp = k + (i * w + j) * c;
      const double* qp = q + j * c;
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) s += kp[ch] * qp[ch];
      out[i * w + j] = s;
    }
  }
  mac_counter::add(static_cast<std::uint64_t>(h) * w * c);
}

}  // namespace

Tensor column_logits(const Tensor& keys, const Tensor& queries) {
  Tensor logits;
  logits_into(keys, queries, logits);
  return logits;
}

Tensor column_attention(const Tensor& keys, const Tensor& queries) {
  Tensor out;
  column_attention(keys, queries, out);
  return out;
}

void column_attention(const Tensor& keys, const Tensor& queries, Tensor& out) {
  logits_into(keys, queries, out);
  softmax_columns_inplace(out);
}

Tensor apply_weights(const Tensor& features, const Tensor& weights) {
  Tensor out;
  apply_weights(features, weights, out);
  return out;
}

void apply_weights(const Tensor& features, const Tensor& weights, Tensor& out) {
  require_weights(features, weights);
  const auto h = features.dim(0), w = features.dim(1), c = features.dim(2);
  if (out.shape() != features.shape()) out = Tensor(features.shape());
  const double* f = features.data().data();
  double* o = out.data().data();
  for (std::size_t p = 0; p < h * w; ++p) {
    const double wt = weights[p];
    for (std::size_t ch = 0; ch < c; ++ch) o[p * c + ch] = wt * f[p * c + ch];
  }
  mac_counter::add(static_cast<std::uint64_t>(h) * w * c);
}

Tensor global_attention(const Tensor& keys, const Tensor& query) {
  require_feature_map(keys, "global_attention");
  const auto h = keys.dim(0), w = keys.dim(1), c = keys.dim(2);
  if (query.size() != c) {
    throw DimensionError("global_attention: query " + shape_to_string(query.shape()) + " vs keys " +
                         shape_to_string(keys.shape()));
  }
  Tensor logits({h * w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) s += keys[p * c + ch] * query[ch];
    logits[p] = s;
  }
  mac_counter::add(static_cast<std::uint64_t>(h) * w * c);
  return softmax(logits).reshaped({h, w});
}

Var encode_keys(const Var& features, const PositionalEncoding& pe, const Var& w1, const Var& b1, const Var& w2,
                const Var& b2) {
  Var x = add_encoding(features, pe);
  return pointwise_linear(relu(pointwise_linear(x, w1, b1)), w2, b2);
}

Var column_attention(const Var& keys, const Var& queries) {
  const Tensor& kv = keys.value();
  const Tensor& qv = queries.value();
  Var logits = keys.graph().record(column_logits(kv, qv), {keys, queries},
                                   [&kv, &qv](const Tensor& up, const Tensor&, GradSlots g) {
                                     const auto h = kv.dim(0), w = kv.dim(1), c = kv.dim(2);
                                     for (std::size_t i = 0; i < h; ++i) {
                                       for (std::size_t j = 0; j < w; ++j) {
                                         const double u = up.at(i, j);
                                         if (g[0])
                                           for (std::size_t ch = 0; ch < c; ++ch) g[0]->at(i, j, ch) += u * qv.at(j, ch);
                                         if (g[1])
                                           for (std::size_t ch = 0; ch < c; ++ch) g[1]->at(j, ch) += u * kv.at(i, j, ch);
                                       }
                                     }
                                   });
  return softmax_columns(logits);
}

Var apply_weights(const Var& features, const Var& weights) {
  const Tensor& fv = features.value();
  const Tensor& wv = weights.value();
  return features.graph().record(apply_weights(fv, wv), {features, weights},
                                 [&fv, &wv](const Tensor& up, const Tensor&, GradSlots g) {
                                   const auto pixels = fv.dim(0) * fv.dim(1), c = fv.dim(2);
                                   for (std::size_t p = 0; p < pixels; ++p) {
                                     double acc = 0.0;
                                     for (std::size_t ch = 0; ch < c; ++ch) {
                                       if (g[0]) (*g[0])[p * c + ch] += wv[p] * up[p * c + ch];
                                       acc += fv[p * c + ch] * up[p * c + ch];
                                     }
                                     if (g[1]) (*g[1])[p] += acc;
                                   }
                                 });
}

Var global_attention(const Var& keys, const Var& query) {
  require_feature_map(keys.value(), "global_attention");
  const auto h = keys.value().dim(0), w = keys.value().dim(1), c = keys.value().dim(2);
  if (query.value().size() != c) {
    throw DimensionError("global_attention: query " + shape_to_string(query.shape()) + " vs keys " +
                         shape_to_string(keys.shape()));
  }
  Var flat = reshape(keys, {h * w, c});
  Var logits = reshape(matmul(flat, reshape(query, {c, 1})), {h * w});
  return reshape(softmax(logits), {h, w});
}

std::uint64_t cca_cost_model(std::size_t height, std::size_t width, std::size_t channels) {
  return 2ull * height * width * channels;
}

std::uint64_t global_cost_model(std::size_t height, std::size_t width, std::size_t channels) {
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  return 2ull * n * n * channels;
}

Tensor full_self_attention(const Tensor& keys, const Tensor& values) {
  require_feature_map(keys, "full_self_attention");
  require_same_shape(keys, values, "full_self_attention");
  const auto n = keys.dim(0) * keys.dim(1), c = keys.dim(2);
  constexpr std::size_t kBlock = 4;    // pixels sharing one pass over the keys
  constexpr std::size_t kChunk = 256;  // logit columns kept hot per pass

  // Channel-major copy of the keys so the logit loop streams over pixels.
  std::vector<double> kt(n * c);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) kt[ch * n + p] = keys[p * c + ch];

  Tensor out(keys.shape());
  const double* k = keys.data().data();
  const double* v = values.data().data();
  double* o = out.data().data();
  std::vector<double> logits(kBlock * n);
  for (std::size_t p0 = 0; p0 < n; p0 += kBlock) {
    const std::size_t np = std::min(kBlock, n - p0);
    std::fill(logits.begin(), logits.end(), 0.0);
    for (std::size_t q0 = 0; q0 < n; q0 += kChunk) {
      const std::size_t nq = std::min(kChunk, n - q0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* row = kt.data() + ch * n + q0;
        for (std::size_t pp = 0; pp < np; ++pp) {
          const double kp = k[(p0 + pp) * c + ch];
          double* lg = logits.data() + pp * n + q0;
          for (std::size_t q = 0; q < nq; ++q) lg[q] += kp * row[q];
        }
      }
    }
    for (std::size_t pp = 0; pp < np; ++pp) {
      double* lg = logits.data() + pp * n;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < n; ++q) mx = std::max(mx, lg[q]);
      double z = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        lg[q] = std::exp(lg[q] - mx);
        z += lg[q];
      }
      for (std::size_t q = 0; q < n; ++q) lg[q] /= z;
    }
    for (std::size_t q = 0; q < n; ++q) {
      const double* vq = v + q * c;
      for (std::size_t pp = 0; pp < np; ++pp) {
        const double wq = logits[pp * n + q];
        double* op = o + (p0 + pp) * c;
        for (std::size_t ch = 0; ch < c; ++ch) op[ch] += wq * vq[ch];
      }
    }
  }
  mac_counter::add(2ull * n * n * c);
  return out;
}

}  // namespace bottomup::cca
