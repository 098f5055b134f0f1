#include "certfl/data/idx.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "certfl/error.hpp"

namespace certfl::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const char* file,
                        const char* field) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(std::string(file) + ": truncated while reading " + field);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledDataset parse_idx(const std::vector<std::uint8_t>& image_bytes, const std::vector<std::uint8_t>& label_bytes,
                         std::size_t num_classes, std::string name) {
  const auto image_magic = read_be32(image_bytes, 0, "images", "magic");
  if (image_magic != kImageMagic) throw FormatError("images: bad magic number");
  const std::uint32_t count = read_be32(image_bytes, 4, "images", "image count");
  const std::uint32_t rows = read_be32(image_bytes, 8, "images", "row count");
  const std::uint32_t cols = read_be32(image_bytes, 12, "images", "column count");
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (image_bytes.size() != 16 + static_cast<std::size_t>(count) * pixels) {
    throw FormatError("images: pixel data length does not match the image count");
  }

  const auto label_magic = read_be32(label_bytes, 0, "labels", "magic");
  if (label_magic != kLabelMagic) throw FormatError("labels: bad magic number");
  const std::uint32_t label_count = read_be32(label_bytes, 4, "labels", "label count");
  if (label_bytes.size() != 8 + static_cast<std::size_t>(label_count)) {
    throw FormatError("labels: label data length does not match the label count");
  }
  if (label_count != count) {
    throw FormatError("label count (" + std::to_string(label_count) + ") does not match image count (" +
                      std::to_string(count) + ")");
  }

  std::vector<double> data(static_cast<std::size_t>(count) * pixels);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = static_cast<double>(image_bytes[16 + k]) / 255.0;
  std::vector<std::size_t> labels(count);
  for (std::size_t k = 0; k < count; ++k) {
    labels[k] = label_bytes[8 + k];
    if (labels[k] >= num_classes) throw FormatError("labels: label value out of range");
  }
  return LabeledDataset(Tensor({count, 1, rows, cols}, std::move(data)), std::move(labels), num_classes,
                        std::move(name));
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::size_t num_classes) {
  return parse_idx(read_file(images_path), read_file(labels_path), num_classes, images_path.filename().string());
}

std::vector<std::uint8_t> encode_idx_images(const LabeledDataset& data) {
  const Shape shape = data.sample_shape();
  if (shape.size() != 3 || shape[0] != 1) throw InputError("IDX images must be single-channel [1, H, W]");
  std::vector<std::uint8_t> out;
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  put_be32(out, static_cast<std::uint32_t>(shape[1]));
  put_be32(out, static_cast<std::uint32_t>(shape[2]));
  for (double v : data.images().data()) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const LabeledDataset& data) {
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  for (std::size_t y : data.labels()) out.push_back(static_cast<std::uint8_t>(y));
  return out;
}

}  // namespace certfl::data
