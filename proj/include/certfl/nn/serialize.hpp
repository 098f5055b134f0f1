#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "certfl/nn/model.hpp"

namespace certfl::nn {

// Binary model container, all integers and doubles little-endian:
//
//   "CFLMODEL"                 8-byte magic
//   u32 version (= 1)
//   u32 rank, then rank x u64  input shape
//   u32 layer count
//   per layer: u8 kind (0 dense, 1 conv2d, 2 relu) followed by
//     dense : u64 in, u64 out, in*out f64 weights, out f64 bias
//     conv2d: u64 in_c, in_h, in_w, out_c, k_h, k_w, s_h, s_w,
//             kernel f64 values, out_c f64 bias
//     relu  : u64 size
//
// Doubles are stored as their raw IEEE-754 bit patterns, so a save/load
// round trip is bitwise exact.
std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(const std::vector<std::uint8_t>& bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Lower-case hex SHA-256 of the serialized container.
std::string model_hash(const Model& model);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace certfl::nn
