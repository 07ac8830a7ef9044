#pragma once

#include <cstddef>

#include "lunet/tensor.hpp"

namespace lunet {

// Trainable tensor plus its ADAM moments. Moments stay shape-aligned with the
// value so that structured removal can slice all three together.
struct Parameter {
  Tensor value;
  Tensor first_moment;
  Tensor second_moment;

  explicit Parameter(Tensor v = {});
  void erase_index(std::size_t axis, std::size_t index);
  void reset_moments();
  std::size_t numel() const { return value.numel(); }
};

}  // namespace lunet
