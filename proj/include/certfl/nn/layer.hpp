#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace certfl::nn {

// Fully connected layer. weight is out_features x in_features, row-major.
struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out);
  Dense(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b);

  friend bool operator==(const Dense&, const Dense&) = default;
};

// Valid (unpadded) 2-D convolution over a CHW input. The kernel is stored as
// out_channels x in_channels x kernel_height x kernel_width, row-major. The
// input spatial extent is fixed at construction so the layer knows its own
// output shape.
struct Conv2D {
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_height = 0;
  std::size_t kernel_width = 0;
  std::size_t stride_height = 1;
  std::size_t stride_width = 1;
  std::vector<double> kernel;
  std::vector<double> bias;

  Conv2D() = default;
  Conv2D(std::size_t in_c, std::size_t in_h, std::size_t in_w, std::size_t out_c, std::size_t k_h,
         std::size_t k_w, std::size_t s_h, std::size_t s_w);

  std::size_t out_height() const { return (in_height - kernel_height) / stride_height + 1; }
  std::size_t out_width() const { return (in_width - kernel_width) / stride_width + 1; }
  std::size_t input_size() const { return in_channels * in_height * in_width; }
  std::size_t output_size() const { return out_channels * out_height() * out_width(); }

  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

struct ReLU {
  std::size_t size = 0;
  friend bool operator==(const ReLU&, const ReLU&) = default;
};

using Layer = std::variant<Dense, Conv2D, ReLU>;

std::size_t input_size(const Layer& layer);
std::size_t output_size(const Layer& layer);
std::size_t param_count(const Layer& layer);
std::string_view kind_name(const Layer& layer);

// Weight (or kernel) entries followed by bias; empty for ReLU.
std::span<const double> weights_of(const Layer& layer);
std::span<const double> bias_of(const Layer& layer);
std::span<double> weights_of(Layer& layer);
std::span<double> bias_of(Layer& layer);

// Linear part of an affine layer (no bias): out = A in.
void linear_forward(const Dense& layer, std::span<const double> in, std::span<double> out);
void linear_forward(const Conv2D& layer, std::span<const double> in, std::span<double> out);

// Transposed linear part: grad_in = A^T grad_out (overwrites grad_in).
void linear_transpose(const Dense& layer, std::span<const double> grad_out, std::span<double> grad_in);
void linear_transpose(const Conv2D& layer, std::span<const double> grad_out, std::span<double> grad_in);

// grad_weight += grad_out * in^T, laid out like the layer's weights.
void accumulate_weight_grad(const Dense& layer, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight);
void accumulate_weight_grad(const Conv2D& layer, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weight);

// The dense matrix equivalent to a convolution (bias copied per output pixel).
Dense unroll(const Conv2D& layer);

}  // namespace certfl::nn
