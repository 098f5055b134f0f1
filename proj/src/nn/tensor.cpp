#include "certfl/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "certfl/error.hpp"

namespace certfl {

std::size_t shape_size(const Shape& shape) {
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

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw InputError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
  require_finite(data_, "tensor");
}

std::span<const double> Tensor::row(std::size_t i) const {
  if (shape_.empty() || i >= shape_[0]) throw InputError("tensor row index out of range");
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const double>(data_).subspan(i * stride, stride);
}

std::span<double> Tensor::row(std::size_t i) {
  if (shape_.empty() || i >= shape_[0]) throw InputError("tensor row index out of range");
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<double>(data_).subspan(i * stride, stride);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw InputError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

}  // namespace certfl
