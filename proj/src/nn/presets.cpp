#include "certfl/nn/presets.hpp"

#include "certfl/error.hpp"

namespace certfl::nn {

namespace {

struct ConvSpec {
  std::size_t channels, kernel, stride;
};

std::vector<Layer> conv_stack(const Shape& input_shape, std::span<const ConvSpec> convs,
                              std::span<const std::size_t> dense, std::size_t classes) {
  if (input_shape.size() != 3) throw InputError("convolutional presets need a [C, H, W] input shape");
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  std::vector<Layer> layers;
  for (const auto& spec : convs) {
    if (spec.kernel > h || spec.kernel > w) {
      throw InputError("input " + shape_string(input_shape) + " is too small for this preset");
    }
    Conv2D conv(c, h, w, spec.channels, spec.kernel, spec.kernel, spec.stride, spec.stride);
    c = spec.channels;
    h = conv.out_height();
    w = conv.out_width();
    const std::size_t out = conv.output_size();
    layers.emplace_back(std::move(conv));
    layers.emplace_back(ReLU{out});
  }
  std::size_t width = c * h * w;
  for (std::size_t units : dense) {
    layers.emplace_back(Dense(width, units));
    layers.emplace_back(ReLU{units});
    width = units;
  }
  layers.emplace_back(Dense(width, classes));
  return layers;
}

}  // namespace

Model make_preset(std::string_view name, const Shape& input_shape, std::size_t num_classes,
                  const PresetOptions& options) {
  std::vector<Layer> layers;
  if (name == "mnist_conv") {
    const ConvSpec convs[] = {{16, 4, 2}, {32, 4, 2}};
    const std::size_t dense[] = {1000};
    layers = conv_stack(input_shape, convs, dense, num_classes);
  } else if (name == "cifar_conv") {
    const ConvSpec convs[] = {{32, 3, 1}, {64, 4, 2}, {64, 3, 1}, {128, 4, 2}};
    const std::size_t dense[] = {512, 512};
    layers = conv_stack(input_shape, convs, dense, num_classes);
  } else if (name == "desk_mlp") {
    std::size_t width = shape_size(input_shape);
    for (std::size_t units : options.hidden) {
      layers.emplace_back(Dense(width, units));
      layers.emplace_back(ReLU{units});
      width = units;
    }
    layers.emplace_back(Dense(width, num_classes));
  } else {
    throw ConfigError("unknown architecture preset '" + std::string(name) + "'");
  }
  Model model(input_shape, std::move(layers));
  init_params(model, options.seed);
  return model;
}

std::vector<std::string> preset_names() { return {"mnist_conv", "cifar_conv", "desk_mlp"}; }

}  // namespace certfl::nn
