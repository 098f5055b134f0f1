#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "certfl/tensor.hpp"

namespace certfl::data {

// N labeled samples stored as an [N, sample_shape...] tensor with pixel
// values in [0, 1].
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Tensor images, std::vector<std::size_t> labels, std::size_t num_classes, std::string name);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t num_classes() const { return num_classes_; }
  const std::string& name() const { return name_; }
  const Tensor& images() const { return images_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  Shape sample_shape() const;
  std::size_t sample_size() const;

  std::span<const double> input(std::size_t i) const { return images_.row(i); }
  std::size_t label(std::size_t i) const { return labels_.at(i); }

  // Half-open index range [begin, end).
  LabeledDataset slice(std::size_t begin, std::size_t end, std::string name) const;
  LabeledDataset select(std::span<const std::size_t> indices, std::string name) const;
  LabeledDataset relabeled(std::vector<std::size_t> labels) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  Tensor images_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_ = 0;
  std::string name_;
};

// Builds a dataset from explicit rows; used by attacks that synthesize inputs.
LabeledDataset from_rows(const Shape& sample_shape, const std::vector<std::vector<double>>& rows,
                         std::vector<std::size_t> labels, std::size_t num_classes, std::string name);

}  // namespace certfl::data
