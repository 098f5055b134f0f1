#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "certfl/nn/model.hpp"

namespace certfl::nn {

// Architecture presets, selectable by name:
//
//   mnist_conv  Conv(2,2) 16x4x4 -> ReLU -> Conv(2,2) 32x4x4 -> ReLU
//                -> FC 1000 -> ReLU -> FC classes
//   cifar_conv  Conv(1,1) 32x3x3 -> ReLU -> Conv(2,2) 64x4x4 -> ReLU
//                -> Conv(1,1) 64x3x3 -> ReLU -> Conv(2,2) 128x4x4 -> ReLU
//                -> FC 512 -> ReLU -> FC 512 -> ReLU -> FC classes
//   desk_mlp     FC h1 -> ReLU -> ... -> FC classes (hidden widths
//                configurable, default 32, 32)
//
// Parameters are Glorot-initialized from seed.
struct PresetOptions {
  std::vector<std::size_t> hidden = {32, 32};
  std::uint64_t seed = 0;
};

Model make_preset(std::string_view name, const Shape& input_shape, std::size_t num_classes,
                  const PresetOptions& options = {});

std::vector<std::string> preset_names();

}  // namespace certfl::nn
