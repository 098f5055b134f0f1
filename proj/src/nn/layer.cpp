#include "certfl/nn/layer.hpp"

#include <algorithm>

#include "certfl/error.hpp"

namespace certfl::nn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

void check_span(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InputError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                     std::to_string(got));
  }
}

}  // namespace

Dense::Dense(std::size_t in, std::size_t out)
    : in_features(in), out_features(out), weight(in * out, 0.0), bias(out, 0.0) {
  if (in == 0 || out == 0) throw InputError("dense layer needs non-zero extents");
}

Dense::Dense(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b)
    : in_features(in), out_features(out), weight(std::move(w)), bias(std::move(b)) {
  if (in == 0 || out == 0) throw InputError("dense layer needs non-zero extents");
  check_span(weight.size(), in * out, "dense weight");
  check_span(bias.size(), out, "dense bias");
}

Conv2D::Conv2D(std::size_t in_c, std::size_t in_h, std::size_t in_w, std::size_t out_c, std::size_t k_h,
               std::size_t k_w, std::size_t s_h, std::size_t s_w)
    : in_channels(in_c),
      in_height(in_h),
      in_width(in_w),
      out_channels(out_c),
      kernel_height(k_h),
      kernel_width(k_w),
      stride_height(s_h),
      stride_width(s_w) {
  if (in_c == 0 || out_c == 0 || k_h == 0 || k_w == 0) throw InputError("conv2d needs non-zero extents");
  if (s_h < 1 || s_w < 1) throw InputError("conv2d stride components must be >= 1");
  if (k_h > in_h || k_w > in_w) throw InputError("conv2d kernel larger than its input");
  kernel.assign(out_c * in_c * k_h * k_w, 0.0);
  bias.assign(out_c, 0.0);
}

std::size_t input_size(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense& d) { return d.in_features; },
                               [](const Conv2D& c) { return c.input_size(); },
                               [](const ReLU& r) { return r.size; }},
                    layer);
}

std::size_t output_size(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense& d) { return d.out_features; },
                               [](const Conv2D& c) { return c.output_size(); },
                               [](const ReLU& r) { return r.size; }},
                    layer);
}

std::size_t param_count(const Layer& layer) {
  return weights_of(layer).size() + bias_of(layer).size();
}

std::string_view kind_name(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense&) { return std::string_view("dense"); },
                               [](const Conv2D&) { return std::string_view("conv2d"); },
                               [](const ReLU&) { return std::string_view("relu"); }},
                    layer);
}

std::span<const double> weights_of(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense& d) { return std::span<const double>(d.weight); },
                               [](const Conv2D& c) { return std::span<const double>(c.kernel); },
                               [](const ReLU&) { return std::span<const double>(); }},
                    layer);
}

std::span<const double> bias_of(const Layer& layer) {
  return std::visit(Overloaded{[](const Dense& d) { return std::span<const double>(d.bias); },
                               [](const Conv2D& c) { return std::span<const double>(c.bias); },
                               [](const ReLU&) { return std::span<const double>(); }},
                    layer);
}

std::span<double> weights_of(Layer& layer) {
  return std::visit(Overloaded{[](Dense& d) { return std::span<double>(d.weight); },
                               [](Conv2D& c) { return std::span<double>(c.kernel); },
                               [](ReLU&) { return std::span<double>(); }},
                    layer);
}

std::span<double> bias_of(Layer& layer) {
  return std::visit(Overloaded{[](Dense& d) { return std::span<double>(d.bias); },
                               [](Conv2D& c) { return std::span<double>(c.bias); },
                               [](ReLU&) { return std::span<double>(); }},
                    layer);
}

void linear_forward(const Dense& layer, std::span<const double> in, std::span<double> out) {
  check_span(in.size(), layer.in_features, "dense input");
  check_span(out.size(), layer.out_features, "dense output");
  const double* w = layer.weight.data();
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    const double* row = w + o * layer.in_features;
    double acc = 0.0;
    for (std::size_t i = 0; i < layer.in_features; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

void linear_forward(const Conv2D& c, std::span<const double> in, std::span<double> out) {
  check_span(in.size(), c.input_size(), "conv2d input");
  check_span(out.size(), c.output_size(), "conv2d output");
  const std::size_t oh = c.out_height(), ow = c.out_width();
  const std::size_t plane = c.in_height * c.in_width;
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          const double* k = c.kernel.data() + ((o * c.in_channels + ch) * c.kernel_height) * c.kernel_width;
          const double* src = in.data() + ch * plane;
          for (std::size_t ky = 0; ky < c.kernel_height; ++ky) {
            const double* src_row = src + (y * c.stride_height + ky) * c.in_width + x * c.stride_width;
            const double* k_row = k + ky * c.kernel_width;
            for (std::size_t kx = 0; kx < c.kernel_width; ++kx) acc += k_row[kx] * src_row[kx];
          }
        }
        out[(o * oh + y) * ow + x] = acc;
      }
    }
  }
}

void linear_transpose(const Dense& layer, std::span<const double> grad_out, std::span<double> grad_in) {
  check_span(grad_out.size(), layer.out_features, "dense output gradient");
  check_span(grad_in.size(), layer.in_features, "dense input gradient");
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  const double* w = layer.weight.data();
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    const double* row = w + o * layer.in_features;
    for (std::size_t i = 0; i < layer.in_features; ++i) grad_in[i] += row[i] * g;
  }
}

void linear_transpose(const Conv2D& c, std::span<const double> grad_out, std::span<double> grad_in) {
  check_span(grad_out.size(), c.output_size(), "conv2d output gradient");
  check_span(grad_in.size(), c.input_size(), "conv2d input gradient");
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  const std::size_t oh = c.out_height(), ow = c.out_width();
  const std::size_t plane = c.in_height * c.in_width;
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double g = grad_out[(o * oh + y) * ow + x];
        if (g == 0.0) continue;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          const double* k = c.kernel.data() + ((o * c.in_channels + ch) * c.kernel_height) * c.kernel_width;
          double* dst = grad_in.data() + ch * plane;
          for (std::size_t ky = 0; ky < c.kernel_height; ++ky) {
            double* dst_row = dst + (y * c.stride_height + ky) * c.in_width + x * c.stride_width;
            const double* k_row = k + ky * c.kernel_width;
            for (std::size_t kx = 0; kx < c.kernel_width; ++kx) dst_row[kx] += k_row[kx] * g;
          }
        }
      }
    }
  }
}

void accumulate_weight_grad(const Dense& layer, std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_weight) {
  check_span(in.size(), layer.in_features, "dense input");
  check_span(grad_out.size(), layer.out_features, "dense output gradient");
  check_span(grad_weight.size(), layer.weight.size(), "dense weight gradient");
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    double* row = grad_weight.data() + o * layer.in_features;
    for (std::size_t i = 0; i < layer.in_features; ++i) row[i] += g * in[i];
  }
}

void accumulate_weight_grad(const Conv2D& c, std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_weight) {
  check_span(in.size(), c.input_size(), "conv2d input");
  check_span(grad_out.size(), c.output_size(), "conv2d output gradient");
  check_span(grad_weight.size(), c.kernel.size(), "conv2d kernel gradient");
  const std::size_t oh = c.out_height(), ow = c.out_width();
  const std::size_t plane = c.in_height * c.in_width;
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double g = grad_out[(o * oh + y) * ow + x];
        if (g == 0.0) continue;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          double* k = grad_weight.data() + ((o * c.in_channels + ch) * c.kernel_height) * c.kernel_width;
          const double* src = in.data() + ch * plane;
          for (std::size_t ky = 0; ky < c.kernel_height; ++ky) {
            const double* src_row = src + (y * c.stride_height + ky) * c.in_width + x * c.stride_width;
            double* k_row = k + ky * c.kernel_width;
            for (std::size_t kx = 0; kx < c.kernel_width; ++kx) k_row[kx] += g * src_row[kx];
          }
        }
      }
    }
  }
}

Dense unroll(const Conv2D& c) {
  const std::size_t oh = c.out_height(), ow = c.out_width();
  Dense d(c.input_size(), c.output_size());
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t row = (o * oh + y) * ow + x;
        d.bias[row] = c.bias[o];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t ky = 0; ky < c.kernel_height; ++ky) {
            for (std::size_t kx = 0; kx < c.kernel_width; ++kx) {
              const std::size_t col =
                  (ch * c.in_height + y * c.stride_height + ky) * c.in_width + x * c.stride_width + kx;
              d.weight[row * d.in_features + col] =
                  c.kernel[((o * c.in_channels + ch) * c.kernel_height + ky) * c.kernel_width + kx];
            }
          }
        }
      }
    }
  }
  return d;
}

}  // namespace certfl::nn
