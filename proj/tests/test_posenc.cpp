#include <cmath>

#include "bottomup/posenc.hpp"
#include "doctest.h"

using namespace bottomup;

TEST_CASE("encoding table matches the sine-cosine formula") {
  const std::size_t h = 17, c = 8;
  const auto pe = PositionalEncoding::build(h, c);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t k = 0; k < c / 2; ++k) {
      const double denom = std::pow(10000.0, 2.0 * static_cast<double>(k) / static_cast<double>(c));
      CHECK(pe.at(i, 2 * k) == doctest::Approx(std::sin(static_cast<double>(i) / denom)).epsilon(1e-15));
      CHECK(pe.at(i, 2 * k + 1) == doctest::Approx(std::cos(static_cast<double>(i) / denom)).epsilon(1e-15));
    }
  }
}

TEST_CASE("row zero is the bottom row") {
  const auto pe = PositionalEncoding::build(4, 2);
  CHECK(pe.at(0, 0) == 0.0);
  CHECK(pe.at(0, 1) == 1.0);
  CHECK(pe.at(3, 0) == doctest::Approx(std::sin(3.0)));
}

TEST_CASE("encoding rejects odd channels and zero height") {
  CHECK_THROWS_AS(PositionalEncoding::build(4, 3), ContractError);
  CHECK_THROWS_AS(PositionalEncoding::build(0, 4), ContractError);
}

TEST_CASE("add_encoding broadcasts over columns") {
  const auto pe = PositionalEncoding::build(3, 4);
  Tensor f({3, 5, 4});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.01 * static_cast<double>(i);
  const Tensor out = add_encoding(f, pe);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t ch = 0; ch < 4; ++ch) CHECK(out.at(i, j, ch) == f.at(i, j, ch) + pe.at(i, ch));
  CHECK_THROWS_AS(add_encoding(Tensor({4, 5, 4}), pe), DimensionError);
  CHECK_THROWS_AS(add_encoding(Tensor({3, 5, 6}), pe), DimensionError);
}
