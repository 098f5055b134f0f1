#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "certfl/nn/layer.hpp"
#include "certfl/tensor.hpp"

namespace certfl::nn {

// An ordered stack of layers mapping an input of input_shape to num_classes
// logits. Layer shapes are validated to compose at construction and are
// fixed afterwards; only parameter values may change.
class Model {
 public:
  Model() = default;
  Model(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  std::size_t input_size() const { return input_size_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t param_count() const { return param_count_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Index of the first flat parameter owned by layer i.
  std::size_t param_offset(std::size_t layer_index) const { return offsets_.at(layer_index); }
  // Index of the last layer that carries parameters.
  std::size_t last_param_layer() const;

  // Logits for a single flattened input.
  std::vector<double> logits(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const;

  // x is either input_shape or [batch, input_shape...]; returns [num_classes]
  // or [batch, num_classes] respectively.
  Tensor forward(const Tensor& x) const;

  // Activations after every layer; entry 0 is the input itself.
  std::vector<std::vector<double>> trace(std::span<const double> x) const;

  // Mutable access to one layer's parameters (shape-preserving).
  std::span<double> layer_weights(std::size_t i) { return weights_of(layers_.at(i)); }
  std::span<double> layer_bias(std::size_t i) { return bias_of(layers_.at(i)); }

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t input_size_ = 0;
  std::size_t num_classes_ = 0;
  std::size_t param_count_ = 0;
};

// Flat parameter view. Order: layers in sequence; within a layer the weights
// (Dense: out x in row-major, Conv2D: out_c x in_c x kh x kw row-major) then
// the bias.
std::vector<double> flatten_params(const Model& model);
Model load_params(Model model, std::span<const double> params);

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)) and zero biases.
// Each layer draws from its own stream derived from seed and its index.
void init_params(Model& model, std::uint64_t seed);

std::size_t argmax(std::span<const double> values);

}  // namespace certfl::nn
