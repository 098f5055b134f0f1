#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace certfl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Throws NumericError if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

// Dense row-major array of doubles. Construction validates that the shape
// matches the data length and that every value is finite.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Number of entries along the leading axis and the slice at index i.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace certfl
