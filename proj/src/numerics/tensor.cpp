#include "lunet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "lunet/error.hpp"

namespace lunet {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("tensor extent must be positive: " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw ShapeError("tensor extent must be positive: " + shape_string(shape_));
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on)
    grad_.assign(data_.size(), 0.0);
  else
    grad_.clear();
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void erase_slice(std::vector<double>& buffer, const Shape& shape, std::size_t axis, std::size_t index) {
  if (axis >= shape.size() || index >= shape[axis])
    throw ShapeError("erase index " + std::to_string(index) + " on axis " + std::to_string(axis) +
                     " out of range for " + shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t extent = shape[axis];
  std::size_t write = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < extent; ++a) {
      if (a == index) continue;
      const std::size_t read = (o * extent + a) * inner;
      std::copy_n(buffer.begin() + static_cast<std::ptrdiff_t>(read), inner,
                  buffer.begin() + static_cast<std::ptrdiff_t>(write));
      write += inner;
    }
  }
  buffer.resize(write);
}

void Tensor::erase_index(std::size_t axis, std::size_t index) {
  if (axis < shape_.size() && shape_[axis] == 1)
    throw ShapeError("cannot erase the only slice of axis " + std::to_string(axis));
  erase_slice(data_, shape_, axis, index);
  if (!grad_.empty()) erase_slice(grad_, shape_, axis, index);
  --shape_[axis];
}

Tensor Tensor::channels(std::size_t begin, std::size_t end) const {
  if (rank() < 2 || begin >= end || end > shape_[1])
    throw ShapeError("channel range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(shape_));
  Shape out_shape = shape_;
  out_shape[1] = end - begin;
  const std::size_t inner = shape_numel(shape_) / (shape_[0] * shape_[1]);
  std::vector<double> out;
  out.reserve(shape_numel(out_shape));
  for (std::size_t b = 0; b < shape_[0]; ++b) {
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>((b * shape_[1] + begin) * inner);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>((end - begin) * inner));
  }
  return Tensor(std::move(out_shape), std::move(out));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lunet
