#include "bottomup/posenc.hpp"

#include <cmath>

namespace bottomup {

FeatureMap::FeatureMap(Tensor data) : data_(std::move(data)) { require_feature_map(data_, "FeatureMap"); }

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels)
    : data_(Shape{height, width, channels}) {}

void require_feature_map(const Tensor& t, const char* op) {
  if (t.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected an H x W x C map, got " + shape_to_string(t.shape()));
  }
}

PositionalEncoding PositionalEncoding::build(std::size_t height, std::size_t channels) {
  if (height == 0) throw ContractError("positional encoding needs at least one row");
  if (channels == 0 || channels % 2 != 0) {
    throw ContractError("positional encoding needs an even channel count, got " + std::to_string(channels));
  }
  Tensor table({height, channels});
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t k = 0; k < channels / 2; ++k) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(channels));
      const double angle = static_cast<double>(i) / freq;
      table.at(i, 2 * k) = std::sin(angle);
      table.at(i, 2 * k + 1) = std::cos(angle);
    }
  }
  return PositionalEncoding(std::move(table));
}

namespace {

void require_match(const Tensor& features, const PositionalEncoding& pe) {
  require_feature_map(features, "add_encoding");
  if (features.dim(0) != pe.height() || features.dim(2) != pe.channels()) {
    throw DimensionError("add_encoding: map " + shape_to_string(features.shape()) + " vs encoding " +
                         shape_to_string(pe.table().shape()));
  }
}

}  // namespace

Tensor add_encoding(const Tensor& features, const PositionalEncoding& pe) {
  require_match(features, pe);
  Tensor out = features;
  const auto h = out.dim(0), w = out.dim(1), c = out.dim(2);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t k = 0; k < c; ++k) out.at(i, j, k) += pe.at(i, k);
  return out;
}

FeatureMap add_encoding(const FeatureMap& features, const PositionalEncoding& pe) {
  return FeatureMap(add_encoding(features.tensor(), pe));
}

Var add_encoding(const Var& features, const PositionalEncoding& pe) {
  return features.graph().record(add_encoding(features.value(), pe), {features},
                                 [](const Tensor& up, const Tensor&, GradSlots g) {
                                   auto d = g[0]->data();
                                   for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i];
                                 });
}

}  // namespace bottomup
