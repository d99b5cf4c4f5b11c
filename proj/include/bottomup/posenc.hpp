#pragma once

#include <cstddef>

#include "bottomup/feature_map.hpp"
#include "bottomup/graph.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

/// Fixed sine-cosine encoding of row position, shared by every column.
///
///   table[i][2k]   = sin(i / 10000^(2k/C))
///   table[i][2k+1] = cos(i / 10000^(2k/C))
///
/// with i counted from the bottom image row.
class PositionalEncoding {
 public:
  /// Throws ContractError for odd `channels` or zero `height`.
  static PositionalEncoding build(std::size_t height, std::size_t channels);

  std::size_t height() const noexcept { return table_.dim(0); }
  std::size_t channels() const noexcept { return table_.dim(1); }
  double at(std::size_t row, std::size_t ch) const { return table_.at(row, ch); }
  const Tensor& table() const noexcept { return table_; }

 private:
  explicit PositionalEncoding(Tensor table) : table_(std::move(table)) {}
  Tensor table_;
};

/// out[i][j][c] = features[i][j][c] + table[i][c] for every column j.
Tensor add_encoding(const Tensor& features, const PositionalEncoding& pe);
FeatureMap add_encoding(const FeatureMap& features, const PositionalEncoding& pe);
Var add_encoding(const Var& features, const PositionalEncoding& pe);

}  // namespace bottomup
