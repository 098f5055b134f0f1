#include "certfl/nn/serialize.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "certfl/error.hpp"

namespace certfl::nn {

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'F', 'L', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    for (double d : v) put(d);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  template <class T>
  T get(const char* field) {
    if (pos_ + sizeof(T) > in_.size()) throw FormatError(std::string("model file truncated reading ") + field);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t get_size(const char* field) {
    const auto v = get<std::uint64_t>(field);
    if (v > (std::uint64_t{1} << 40)) throw FormatError(std::string("model file field out of range: ") + field);
    return static_cast<std::size_t>(v);
  }
  void get_doubles(std::span<double> v, const char* field) {
    for (double& d : v) d = get<double>(field);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Model& model) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(static_cast<std::uint32_t>(model.input_shape().size()));
  for (std::size_t d : model.input_shape()) w.put(static_cast<std::uint64_t>(d));
  w.put(static_cast<std::uint32_t>(model.layers().size()));
  for (const Layer& layer : model.layers()) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      w.put(std::uint8_t{0});
      w.put(static_cast<std::uint64_t>(d->in_features));
      w.put(static_cast<std::uint64_t>(d->out_features));
      w.put_doubles(d->weight);
      w.put_doubles(d->bias);
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      w.put(std::uint8_t{1});
      for (std::size_t v : {c->in_channels, c->in_height, c->in_width, c->out_channels, c->kernel_height,
                            c->kernel_width, c->stride_height, c->stride_width}) {
        w.put(static_cast<std::uint64_t>(v));
      }
      w.put_doubles(c->kernel);
      w.put_doubles(c->bias);
    } else {
      w.put(std::uint8_t{2});
      w.put(static_cast<std::uint64_t>(std::get<ReLU>(layer).size));
    }
  }
  return w.take();
}

Model deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.get<char>("magic") != c) throw FormatError("not a model file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) throw FormatError("unsupported model file version " + std::to_string(version));
  const auto rank = r.get<std::uint32_t>("input rank");
  if (rank == 0 || rank > 8) throw FormatError("model file input rank out of range");
  Shape shape(rank);
  for (auto& d : shape) d = r.get_size("input shape");
  const auto count = r.get<std::uint32_t>("layer count");
  std::vector<Layer> layers;
  try {
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto kind = r.get<std::uint8_t>("layer kind");
      if (kind == 0) {
        const std::size_t in = r.get_size("dense in");
        const std::size_t out = r.get_size("dense out");
        Dense d(in, out);
        r.get_doubles(d.weight, "dense weight");
        r.get_doubles(d.bias, "dense bias");
        layers.emplace_back(std::move(d));
      } else if (kind == 1) {
        std::size_t f[8];
        for (auto& v : f) v = r.get_size("conv2d geometry");
        Conv2D c(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]);
        r.get_doubles(c.kernel, "conv2d kernel");
        r.get_doubles(c.bias, "conv2d bias");
        layers.emplace_back(std::move(c));
      } else if (kind == 2) {
        layers.emplace_back(ReLU{r.get_size("relu size")});
      } else {
        throw FormatError("unknown layer kind " + std::to_string(kind));
      }
    }
    if (!r.done()) throw FormatError("trailing bytes after model container");
    return Model(std::move(shape), std::move(layers));
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid model container: ") + e.what());
  } catch (const NumericError& e) {
    throw FormatError(std::string("invalid model container: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string model_hash(const Model& model) { return sha256_hex(serialize(model)); }

}  // namespace certfl::nn
