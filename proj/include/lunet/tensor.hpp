#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lunet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles with an optional same-shape gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool requires_grad() const { return requires_grad_; }
  // Enabling allocates a zeroed gradient; disabling drops it.
  void set_requires_grad(bool on);
  bool has_grad() const { return !grad_.empty(); }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }
  void zero_grad();

  // Removes slice `index` along `axis` from data and grad.
  void erase_index(std::size_t axis, std::size_t index);

  // Copy of slice [begin, end) along axis 1 for rank >= 2 tensors.
  Tensor channels(std::size_t begin, std::size_t end) const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// Erases slice `index` along `axis` of a flat row-major buffer with `shape`.
void erase_slice(std::vector<double>& buffer, const Shape& shape, std::size_t axis,
                 std::size_t index);

}  // namespace lunet
