#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "certfl/data/idx.hpp"
#include "certfl/data/splits.hpp"
#include "certfl/data/synth.hpp"
#include "certfl/error.hpp"
#include "certfl/nn/train.hpp"
#include "helpers.hpp"

using namespace certfl;
using namespace certfl::data;

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> image_bytes(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                      const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x00000803);
  put_u32(b, n);
  put_u32(b, rows);
  put_u32(b, cols);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<std::uint8_t> label_bytes(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x00000801);
  put_u32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

std::string error_of(const std::vector<std::uint8_t>& img, const std::vector<std::uint8_t>& lab) {
  try {
    parse_idx(img, lab);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

LabeledDataset indexed(std::size_t n) {
  std::vector<double> v(n);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<double>(i) / static_cast<double>(n);
    labels[i] = i % 10;
  }
  return LabeledDataset(Tensor({n, 1}, v), labels, 10, "indexed");
}

}  // namespace

TEST_CASE("idx pair of two 4x4 images") {
  std::vector<std::uint8_t> px(32);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 8);
  px[0] = 0;
  px[31] = 255;
  const auto d = parse_idx(image_bytes(2, 4, 4, px), label_bytes({3, 7}));
  CHECK(d.size() == 2);
  CHECK(d.sample_shape() == Shape{1, 4, 4});
  CHECK(d.label(0) == 3);
  CHECK(d.label(1) == 7);
  CHECK(d.input(0)[0] == 0.0);
  CHECK(d.input(1)[15] == 1.0);
  CHECK(d.input(0)[5] == 40.0 / 255.0);
  CHECK(encode_idx_images(d) == image_bytes(2, 4, 4, px));
  CHECK(encode_idx_labels(d) == label_bytes({3, 7}));
}

TEST_CASE("idx re-serialization is bit exact on random data") {
  Rng rng(5);
  std::uniform_int_distribution<int> byte(0, 255), lab(0, 9);
  std::vector<std::uint8_t> px(50 * 28 * 28), labels(50);
  for (auto& p : px) p = static_cast<std::uint8_t>(byte(rng));
  for (auto& l : labels) l = static_cast<std::uint8_t>(lab(rng));
  const auto img = image_bytes(50, 28, 28, px), lb = label_bytes(labels);
  const auto d = parse_idx(img, lb);
  CHECK(encode_idx_images(d) == img);
  CHECK(encode_idx_labels(d) == lb);
}

TEST_CASE("idx files on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "certfl_idx_test";
  std::filesystem::create_directories(dir);
  const auto img = image_bytes(1, 2, 2, {0, 51, 102, 255});
  const auto lab = label_bytes({1});
  std::ofstream(dir / "img", std::ios::binary).write(reinterpret_cast<const char*>(img.data()), img.size());
  std::ofstream(dir / "lab", std::ios::binary).write(reinterpret_cast<const char*>(lab.data()), lab.size());
  const auto d = load_idx(dir / "img", dir / "lab");
  CHECK(d.input(0)[1] == 0.2);
  CHECK_THROWS_AS(load_idx(dir / "missing", dir / "lab"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("idx errors name the offending field") {
  const std::vector<std::uint8_t> px(32, 0);
  CHECK(error_of(image_bytes(2, 4, 4, px), label_bytes({1, 2, 3})).find("count") != std::string::npos);

  auto bad = image_bytes(2, 4, 4, px);
  bad[3] = 0x01;
  CHECK(error_of(bad, label_bytes({1, 2})).find("magic") != std::string::npos);

  auto bad_lab = label_bytes({1, 2});
  bad_lab[3] = 0x03;
  CHECK(error_of(image_bytes(2, 4, 4, px), bad_lab).find("magic") != std::string::npos);

  auto truncated = image_bytes(2, 4, 4, px);
  truncated.pop_back();
  CHECK(error_of(truncated, label_bytes({1, 2})).find("pixel data") != std::string::npos);

  CHECK(error_of({0, 0, 8}, label_bytes({1})).find("truncated") != std::string::npos);
  CHECK(error_of(image_bytes(1, 2, 2, {0, 0, 0, 0}), label_bytes({12})).find("label") != std::string::npos);
}

TEST_CASE("synthetic datasets") {
  SynthSpec s;
  s.classes = 2;
  s.per_class = 1;
  CHECK(synth_dataset(s).size() == 2);

  s = {};
  s.seed = 4;
  const auto a = synth_dataset(s);
  CHECK(a == synth_dataset(s));
  CHECK(a.size() == 1000);
  CHECK(a.sample_shape() == Shape{1, 8, 8});
  for (double v : a.images().data()) CHECK((v >= 0.0 && v <= 1.0));
  s.seed = 5;
  CHECK(!(a == synth_dataset(s)));

  s.shape = {12};
  CHECK(synth_dataset(s).sample_shape() == Shape{12});

  s = {};
  s.per_class = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.shape = {2, 3};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("well separated synthetic classes are linearly separable") {
  SynthSpec s;
  s.separation = 0.8;
  s.noise = 0.05;
  s.per_class = 50;
  s.seed = 1;
  const auto d = synth_dataset(s);
  nn::Model m({1, 8, 8}, {nn::Dense(64, 10)});
  nn::init_params(m, 1);
  nn::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.1;
  m = nn::train(m, d, cfg);
  CHECK(nn::accuracy(m, d) >= 0.99);
}

TEST_CASE("splits follow the head of the training order") {
  const auto d = indexed(60000);
  const auto s = make_splits(d, 1000, 5000);
  CHECK(s.cert_set.size() == 1000);
  CHECK(s.validation_set.size() == 5000);
  CHECK(s.client_pool.size() == 54000);
  CHECK(s.cert_set.input(0)[0] == d.input(0)[0]);
  CHECK(s.validation_set.input(0)[0] == d.input(1000)[0]);
  CHECK(s.client_pool.input(0)[0] == d.input(6000)[0]);
  CHECK(s.ranges.pool_end == 60000);

  CHECK_THROWS_AS(make_splits(d, 0, 5000), ConfigError);
  CHECK(make_splits(d, 0, 5000, true).cert_set.empty());
  CHECK_THROWS_AS(make_splits(d, 30000, 30000), ConfigError);
  CHECK_THROWS_AS(make_splits(indexed(10), 5, 6), ConfigError);
}

TEST_CASE("splits are disjoint and cover the data") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<std::size_t> n_d(3, 300);
    const std::size_t n = n_d(rng);
    const std::size_t c = std::uniform_int_distribution<std::size_t>(1, n - 2)(rng);
    const std::size_t v = std::uniform_int_distribution<std::size_t>(0, n - c - 1)(rng);
    const auto d = indexed(n);
    const auto s = make_splits(d, c, v);
    std::multiset<double> seen;
    for (const auto* part : {&s.cert_set, &s.validation_set, &s.client_pool})
      for (std::size_t i = 0; i < part->size(); ++i) seen.insert(part->input(i)[0]);
    CHECK(seen.size() == n);
    CHECK(std::set<double>(seen.begin(), seen.end()).size() == n);
    CHECK(s.ranges.cert_end == s.ranges.val_begin);
    CHECK(s.ranges.val_end == s.ranges.pool_begin);
  }
}

TEST_CASE("dataset construction rejects invalid contents") {
  CHECK_THROWS_AS(LabeledDataset(Tensor({2, 1}, {0.5, 0.5}), {0, 3}, 3, "x"), InputError);
  CHECK_THROWS_AS(LabeledDataset(Tensor({2, 1}, {0.5, 1.5}), {0, 1}, 3, "x"), InputError);
  CHECK_THROWS_AS(LabeledDataset(Tensor({2, 1}, {0.5, 0.5}), {0}, 3, "x"), InputError);
}
