#pragma once

#include <cstddef>

#include "bottomup/tensor.hpp"

namespace bottomup {

/// Row 0 of every feature map is the bottom image row; row indices grow
/// upward. Image-space code that thinks top-down must flip explicitly.
enum class RowOrigin { Bottom };

/// H x W x C map with the bottom-origin row convention attached.
class FeatureMap {
 public:
  static constexpr RowOrigin row_origin = RowOrigin::Bottom;

  FeatureMap() = default;
  explicit FeatureMap(Tensor data);
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels);

  std::size_t height() const noexcept { return data_.dim(0); }
  std::size_t width() const noexcept { return data_.dim(1); }
  std::size_t channels() const noexcept { return data_.dim(2); }

  double at(std::size_t row, std::size_t col, std::size_t ch) const { return data_.at(row, col, ch); }
  double& at(std::size_t row, std::size_t col, std::size_t ch) { return data_.at(row, col, ch); }

  const Tensor& tensor() const noexcept { return data_; }
  Tensor& tensor() noexcept { return data_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  Tensor data_;
};

/// Throws DimensionError unless `t` is rank 3.
void require_feature_map(const Tensor& t, const char* op);

}  // namespace bottomup
