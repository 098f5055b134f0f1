#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "certfl/data/dataset.hpp"
#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/nn/presets.hpp"
#include "certfl/nn/serialize.hpp"
#include "certfl/nn/train.hpp"
#include "certfl/parallel.hpp"
#include "helpers.hpp"

using namespace certfl;
using namespace certfl::nn;
using certfl::testing::dense_model;
using certfl::testing::max_abs_diff;
using certfl::testing::uniform_vec;

namespace {

Model conv_model(std::size_t h, std::size_t k, std::size_t s, std::uint64_t seed) {
  Conv2D c(2, h, h, 3, k, k, s, s);
  const std::size_t out = c.output_size();
  Model m({2, h, h}, {c, ReLU{out}, Dense(out, 4)});
  init_params(m, seed);
  return m;
}

// Dense matrix of a convolution built one basis vector at a time.
std::vector<double> brute_force_matrix(const Conv2D& c) {
  std::vector<double> m(c.output_size() * c.input_size());
  std::vector<double> e(c.input_size()), out(c.output_size());
  for (std::size_t j = 0; j < c.input_size(); ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    linear_forward(c, e, out);
    for (std::size_t i = 0; i < c.output_size(); ++i) m[i * c.input_size() + j] = out[i];
  }
  return m;
}

double loss_at(const Model& m, std::span<const double> x, const Target& t, double temperature) {
  BackwardOptions o;
  o.temperature = temperature;
  o.param_grads = false;
  o.input_grad = false;
  return backward(m, x, t, o).loss;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

void check_gradients(const Model& m, std::span<const double> x, const Target& t, double temperature) {
  BackwardOptions o;
  o.temperature = temperature;
  const Gradients g = backward(m, x, t, o);
  const double h = 1e-5;
  auto p = flatten_params(m);
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double keep = p[k];
    p[k] = keep + h;
    const double up = loss_at(load_params(m, p), x, t, temperature);
    p[k] = keep - h;
    const double down = loss_at(load_params(m, p), x, t, temperature);
    p[k] = keep;
    worst = std::max(worst, rel_err(g.params[k], (up - down) / (2 * h)));
  }
  std::vector<double> xv(x.begin(), x.end());
  for (std::size_t k = 0; k < xv.size(); ++k) {
    const double keep = xv[k];
    xv[k] = keep + h;
    const double up = loss_at(m, xv, t, temperature);
    xv[k] = keep - h;
    const double down = loss_at(m, xv, t, temperature);
    xv[k] = keep;
    worst = std::max(worst, rel_err(g.input[k], (up - down) / (2 * h)));
  }
  CHECK(worst <= 1e-4);
}

data::LabeledDataset blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.08);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % 2;
    const double c = y ? 0.75 : 0.25;
    rows.push_back({std::clamp(c + noise(rng), 0.0, 1.0), std::clamp(c + noise(rng), 0.0, 1.0)});
    labels.push_back(y);
  }
  return data::from_rows({2}, rows, labels, 2, "blobs");
}

}  // namespace

TEST_CASE("dense forward on the two-neuron example") {
  Model m({2}, {Dense(2, 2, {2, 1, 1, -1}, {0, 0})});
  const auto z = m.logits(std::vector<double>{0.5, 0.5});
  CHECK(z[0] == 1.5);
  CHECK(z[1] == 0.0);
}

TEST_CASE("identity dense layer returns its input") {
  Model m({3}, {Dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0})});
  const std::vector<double> x{0.3, -2.0, 7.5};
  CHECK(m.logits(x) == x);
}

TEST_CASE("forward rejects a shape mismatch") {
  Model m({2}, {Dense(2, 2)});
  CHECK_THROWS_AS(m.forward(Tensor({3}, {1, 2, 3})), InputError);
  CHECK_THROWS_AS(m.logits(std::vector<double>{1, 2, 3}), InputError);
}

TEST_CASE("batched forward matches per-sample logits") {
  const Model m = dense_model({4, 6, 3}, 5);
  Rng rng(1);
  const auto x = uniform_vec(rng, 8, 0, 1);
  const Tensor out = m.forward(Tensor({2, 4}, x));
  CHECK(out.shape() == Shape{2, 3});
  for (std::size_t b = 0; b < 2; ++b) {
    const auto z = m.logits(std::span<const double>(x).subspan(b * 4, 4));
    for (std::size_t k = 0; k < 3; ++k) CHECK(out[b * 3 + k] == z[k]);
  }
}

TEST_CASE("conv2d equals its brute-force unrolled matrix") {
  Rng rng(3);
  SUBCASE("3x3 input, 2x2 kernel, stride 1") {
    Conv2D c(1, 3, 3, 1, 2, 2, 1, 1);
    c.kernel = uniform_vec(rng, 4, -1, 1);
    c.bias = {0.0};
    const auto mat = brute_force_matrix(c);
    const auto x = uniform_vec(rng, 9, 0, 1);
    std::vector<double> conv(4), dense(4, 0.0);
    linear_forward(c, x, conv);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 9; ++j) dense[i] += mat[i * 9 + j] * x[j];
    CHECK(max_abs_diff(conv, dense) <= 1e-12);
  }
  for (std::size_t k : {1, 2, 3}) {
    for (std::size_t s : {1, 2}) {
      Conv2D c(2, 7, 7, 3, k, k, s, s);
      c.kernel = uniform_vec(rng, c.kernel.size(), -1, 1);
      c.bias = uniform_vec(rng, 3, -1, 1);
      const Dense d = unroll(c);
      CHECK(d.weight == brute_force_matrix(c));
      Model mc({2, 7, 7}, {c});
      Model md({2 * 49}, {d});
      for (int t = 0; t < 5; ++t) {
        const auto x = uniform_vec(rng, 98, 0, 1);
        CHECK(max_abs_diff(mc.logits(x), md.logits(x)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("conv2d output extents are valid-padding") {
  Conv2D c(1, 28, 28, 16, 4, 4, 2, 2);
  CHECK(c.out_height() == 13);
  CHECK(c.out_width() == 13);
  CHECK_THROWS_AS(Conv2D(1, 3, 3, 1, 2, 2, 0, 1), InputError);
}

TEST_CASE("softmax_t values") {
  auto p = softmax_t(std::vector<double>{0, 0}, 1.0);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  p = softmax_t(std::vector<double>{10, 0}, 100.0);
  const double e = std::exp(0.1);
  CHECK(p[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(p[0] == doctest::Approx(0.525).epsilon(1e-3));
  CHECK(p[1] == doctest::Approx(0.475).epsilon(1e-3));

  p = softmax_t(std::vector<double>{10, 0}, 0.01);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);

  CHECK_THROWS_AS(softmax_t(std::vector<double>{NAN, 0}, 1.0), NumericError);
  CHECK_THROWS_AS(softmax_t(std::vector<double>{1, 0}, 0.0), InputError);
}

TEST_CASE("softmax_t rows sum to one and keep the argmax") {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const auto z = uniform_vec(rng, 7, -50, 50);
    for (double T : {0.05, 1.0, 25.0, 100.0}) {
      const auto p = softmax_t(z, T);
      double s = 0.0;
      for (double v : p) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-12);
      CHECK(argmax(p) == argmax(z));
    }
  }
  const Tensor batch = softmax_t(Tensor({2, 2}, {0, 0, 10, 0}), 1.0);
  CHECK(batch[0] == doctest::Approx(0.5));
  CHECK(batch[2] + batch[3] == doctest::Approx(1.0));
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(17);
  SUBCASE("dense, hard labels") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Model m = dense_model({5, 8, 4}, 100 + s);
      check_gradients(m, uniform_vec(rng, 5, 0, 1), HardLabel{s % 4}, 1.0);
    }
  }
  SUBCASE("three layers at a temperature") {
    const Model m = dense_model({4, 8, 6, 3}, 7);
    check_gradients(m, uniform_vec(rng, 4, 0, 1), HardLabel{2}, 3.0);
  }
  SUBCASE("soft labels") {
    const Model m = dense_model({3, 6, 3}, 8);
    check_gradients(m, uniform_vec(rng, 3, 0, 1), SoftLabel{{0.2, 0.5, 0.3}}, 2.0);
  }
  SUBCASE("convolution") {
    const Model m = conv_model(5, 2, 1, 4);
    check_gradients(m, uniform_vec(rng, m.input_size(), 0, 1), HardLabel{1}, 1.0);
    const Model m2 = conv_model(6, 3, 2, 5);
    check_gradients(m2, uniform_vec(rng, m2.input_size(), 0, 1), HardLabel{3}, 1.0);
  }
}

TEST_CASE("input gradient of a dense-only model is W^T (softmax - onehot)") {
  Rng rng(2);
  Model m({3}, {Dense(3, 4, uniform_vec(rng, 12, -1, 1), uniform_vec(rng, 4, -1, 1))});
  const auto x = uniform_vec(rng, 3, 0, 1);
  const auto g = backward(m, x, HardLabel{1});
  auto p = softmax_t(m.logits(x), 1.0);
  p[1] -= 1.0;
  const auto& w = std::get<Dense>(m.layers()[0]).weight;
  for (std::size_t j = 0; j < 3; ++j) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 4; ++i) expect += w[i * 3 + j] * p[i];
    CHECK(g.input[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("saturated correct prediction has near-zero gradients") {
  Model m({2}, {Dense(2, 2, {60, 0, -60, 0}, {0, 0})});
  const auto g = backward(m, std::vector<double>{1.0, 0.5}, HardLabel{0});
  for (double v : g.params) CHECK(std::abs(v) < 1e-40);
  CHECK(g.loss < 1e-40);
}

TEST_CASE("fp32 masking rounds vanishing gradients to zero") {
  Model m({2}, {Dense(2, 2, {200, 0, -200, 0}, {0, 0})});
  BackwardOptions o;
  o.param_grads = false;
  const auto exact = backward(m, std::vector<double>{0.6, 0.5}, HardLabel{0}, o);
  o.fp32_masking = true;
  const auto masked = backward(m, std::vector<double>{0.6, 0.5}, HardLabel{0}, o);
  CHECK(std::abs(exact.input[0]) > 0.0);
  CHECK(masked.input[0] == 0.0);
}

TEST_CASE("flatten and load round-trip") {
  const Model m = dense_model({2, 2}, 1);
  CHECK(flatten_params(m).size() == 6);
  CHECK(m.param_count() == 6);

  Rng rng(4);
  const Model big = conv_model(6, 3, 1, 2);
  const auto v = uniform_vec(rng, big.param_count(), -3, 3);
  CHECK(flatten_params(load_params(big, v)) == v);
  CHECK(load_params(big, flatten_params(big)) == big);
  CHECK_THROWS_AS(load_params(big, std::vector<double>(big.param_count() + 1)), InputError);
}

TEST_CASE("each flat coordinate maps to exactly one parameter") {
  const Model m = conv_model(4, 2, 1, 3);
  const auto base = flatten_params(m);
  for (std::size_t k = 0; k < base.size(); ++k) {
    auto p = base;
    p[k] += 1.0;
    const Model changed = load_params(m, p);
    std::size_t diffs = 0;
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
      const auto a = weights_of(m.layers()[l]), b = weights_of(changed.layers()[l]);
      const auto c = bias_of(m.layers()[l]), d = bias_of(changed.layers()[l]);
      for (std::size_t i = 0; i < a.size(); ++i) diffs += a[i] != b[i];
      for (std::size_t i = 0; i < c.size(); ++i) diffs += c[i] != d[i];
    }
    CHECK(diffs == 1);
  }
}

TEST_CASE("model construction rejects shapes that do not compose") {
  CHECK_THROWS_AS(Model({3}, {Dense(3, 4), ReLU{5}}), InputError);
  CHECK_THROWS_AS(Model({3}, {Dense(2, 4)}), InputError);
  CHECK_THROWS_AS(Model({3}, {}), InputError);
}

TEST_CASE("glorot init bounds and zero bias") {
  Model m({10}, {Dense(10, 20)});
  init_params(m, 42);
  const double lim = std::sqrt(6.0 / 30.0);
  for (double w : std::get<Dense>(m.layers()[0]).weight) CHECK(std::abs(w) <= lim);
  for (double b : std::get<Dense>(m.layers()[0]).bias) CHECK(b == 0.0);
}

TEST_CASE("training separable blobs") {
  const auto data = blobs(200, 5);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 16;
  cfg.rng_seed = 3;
  const Model m0 = dense_model({2, 8, 2}, 1);
  const Model m = train(m0, data, cfg);
  CHECK(accuracy(m, data) >= 0.95);

  CHECK(flatten_params(train(m0, data, cfg)) == flatten_params(m));

  TrainConfig zero = cfg;
  zero.epochs = 0;
  CHECK(train(m0, data, zero) == m0);

  CHECK_THROWS_AS(train(m0, data::LabeledDataset{}, cfg), ConfigError);
}

TEST_CASE("training result does not depend on the thread cap") {
  const auto data = blobs(64, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.rng_seed = 11;
  const Model m0 = dense_model({2, 8, 2}, 2);
  set_max_threads(1);
  const auto a = flatten_params(train(m0, data, cfg));
  set_max_threads(4);
  const auto b = flatten_params(train(m0, data, cfg));
  set_max_threads(1);
  CHECK(a == b);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("temperature training scales the last layer step by T^2") {
  const auto data = blobs(32, 7);
  const Model m0 = dense_model({2, 4, 2}, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.rng_seed = 1;
  cfg.temperature = 10.0;
  const auto before = flatten_params(m0);
  const auto after = flatten_params(train(m0, data, cfg));
  // With V = W / T trained at T = 1 the hidden layers see identical updates.
  Model scaled = m0;
  for (double& w : scaled.layer_weights(scaled.last_param_layer())) w /= 10.0;
  for (double& b : scaled.layer_bias(scaled.last_param_layer())) b /= 10.0;
  TrainConfig plain = cfg;
  plain.temperature = 1.0;
  const auto ref = flatten_params(train(scaled, data, plain));
  const std::size_t hidden = m0.param_offset(m0.last_param_layer());
  for (std::size_t k = 0; k < hidden; ++k) CHECK(after[k] == doctest::Approx(ref[k]).epsilon(1e-9));
  for (std::size_t k = hidden; k < after.size(); ++k) CHECK(after[k] == doctest::Approx(10.0 * ref[k]).epsilon(1e-9));
  CHECK(before != after);
}

TEST_CASE("model container round-trips bitwise") {
  for (const char* name : {"desk_mlp", "mnist_conv", "cifar_conv"}) {
    const Shape in = std::string(name) == "cifar_conv" ? Shape{3, 32, 32} : Shape{1, 28, 28};
    PresetOptions o;
    o.seed = 9;
    const Model m = make_preset(name, in, 10, o);
    const auto bytes = serialize(m);
    CHECK(deserialize(bytes) == m);
    CHECK(serialize(deserialize(bytes)) == bytes);
  }
  const Model m = conv_model(5, 2, 1, 1);
  const auto path = std::filesystem::temp_directory_path() / "certfl_nn_test.cfl";
  save_model(m, path);
  CHECK(load_model(path) == m);
  CHECK(model_hash(load_model(path)) == model_hash(m));
  CHECK(model_hash(m).size() == 64);
  std::filesystem::remove(path);

  auto bytes = serialize(m);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
  bytes = serialize(m);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
}

TEST_CASE("sha256 of a known string") {
  const std::string abc = "abc";
  CHECK(sha256_hex({abc.begin(), abc.end()}) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("presets") {
  const Model mnist = make_preset("mnist_conv", {1, 28, 28}, 10);
  CHECK(mnist.layers().size() == 7);
  CHECK(mnist.num_classes() == 10);
  const Model cifar = make_preset("cifar_conv", {3, 32, 32}, 10);
  CHECK(cifar.layers().size() == 13);
  PresetOptions o;
  o.hidden = {16};
  CHECK(make_preset("desk_mlp", {1, 8, 8}, 3, o).param_count() == 64 * 16 + 16 + 16 * 3 + 3);
  CHECK_THROWS_AS(make_preset("resnet", {1, 8, 8}, 3), ConfigError);
}
