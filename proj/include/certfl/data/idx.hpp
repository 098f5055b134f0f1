#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "certfl/data/dataset.hpp"

namespace certfl::data {

// MNIST IDX files: images carry magic 0x00000803 followed by big-endian u32
// count, rows, cols; labels carry 0x00000801 and a u32 count. Pixel bytes are
// scaled by 1/255.
LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::size_t num_classes = 10);

// Parses in-memory IDX byte streams.
LabeledDataset parse_idx(const std::vector<std::uint8_t>& image_bytes, const std::vector<std::uint8_t>& label_bytes,
                         std::size_t num_classes = 10, std::string name = "idx");

// Inverse of parse_idx for [N, 1, H, W] datasets whose pixels are multiples
// of 1/255.
std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& data);
std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& data);

}  // namespace certfl::data
