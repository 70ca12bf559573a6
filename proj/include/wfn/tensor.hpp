#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wfn {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major f32 tensor of rank 1 to 3 with an optional gradient
/// accumulator of identical shape.
///
/// Two-dimensional views treat every leading dimension as rows and the last
/// dimension as columns, so a [batch, seq, d] tensor is a (batch*seq) x d
/// matrix for all kernels.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Allocates a zeroed gradient on first use.
  std::span<float> grad();
  std::span<const float> grad() const noexcept { return grad_; }
  void zero_grad();
  void drop_grad() noexcept;

  std::string shape_string() const { return shape_to_string(shape_); }

  /// Same shape and bit-identical values; gradients are ignored.
  bool same_values(const Tensor& other) const noexcept;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
};

/// Row-major boolean matrix; true means "may attend".
struct BoolMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<unsigned char> cells;

  BoolMatrix() = default;
  BoolMatrix(std::size_t r, std::size_t c, bool fill)
      : rows(r), cols(c), cells(r * c, fill ? 1 : 0) {}
  bool operator()(std::size_t r, std::size_t c) const { return cells[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { cells[r * cols + c] = v ? 1 : 0; }
  bool operator==(const BoolMatrix&) const = default;
};

}  // namespace wfn
