#include "certfl/data/dataset.hpp"

#include "certfl/error.hpp"

namespace certfl::data {

LabeledDataset::LabeledDataset(Tensor images, std::vector<std::size_t> labels, std::size_t num_classes,
                               std::string name)
    : images_(std::move(images)), labels_(std::move(labels)), num_classes_(num_classes), name_(std::move(name)) {
  if (images_.rank() < 2) throw InputError("dataset images need a leading sample axis");
  if (images_.rows() != labels_.size()) {
    throw InputError("dataset has " + std::to_string(images_.rows()) + " samples but " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (num_classes_ < 2) throw InputError("dataset needs at least two classes");
  for (std::size_t y : labels_) {
    if (y >= num_classes_) throw InputError("dataset label " + std::to_string(y) + " out of range");
  }
  for (double v : images_.data()) {
    if (v < 0.0 || v > 1.0) throw InputError("dataset pixel outside [0, 1]");
  }
}

Shape LabeledDataset::sample_shape() const { return Shape(images_.shape().begin() + 1, images_.shape().end()); }

std::size_t LabeledDataset::sample_size() const { return shape_size(sample_shape()); }

LabeledDataset LabeledDataset::slice(std::size_t begin, std::size_t end, std::string name) const {
  if (begin > end || end > size()) throw InputError("dataset slice out of range");
  std::vector<std::size_t> idx;
  idx.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
  return select(idx, std::move(name));
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices, std::string name) const {
  const std::size_t stride = sample_size();
  std::vector<double> data;
  data.reserve(indices.size() * stride);
  std::vector<std::size_t> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto row = input(i);
    data.insert(data.end(), row.begin(), row.end());
    labels.push_back(labels_[i]);
  }
  Shape shape = images_.shape();
  shape[0] = indices.size();
  LabeledDataset out;
  out.images_ = Tensor(std::move(shape), std::move(data));
  out.labels_ = std::move(labels);
  out.num_classes_ = num_classes_;
  out.name_ = std::move(name);
  return out;
}

LabeledDataset LabeledDataset::relabeled(std::vector<std::size_t> labels) const {
  return LabeledDataset(images_, std::move(labels), num_classes_, name_);
}

LabeledDataset from_rows(const Shape& sample_shape, const std::vector<std::vector<double>>& rows,
                         std::vector<std::size_t> labels, std::size_t num_classes, std::string name) {
  const std::size_t stride = shape_size(sample_shape);
  std::vector<double> data;
  data.reserve(rows.size() * stride);
  for (const auto& r : rows) {
    if (r.size() != stride) throw InputError("row length does not match sample shape");
    data.insert(data.end(), r.begin(), r.end());
  }
  Shape shape{rows.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return LabeledDataset(Tensor(std::move(shape), std::move(data)), std::move(labels), num_classes,
                        std::move(name));
}

}  // namespace certfl::data
