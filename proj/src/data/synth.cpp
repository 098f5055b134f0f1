#include "certfl/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "certfl/error.hpp"
#include "certfl/random.hpp"

namespace certfl::data {

void SynthSpec::validate() const {
  if (classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
  if (shape.empty() || shape_size(shape) == 0) throw ConfigError("synth: shape must be non-empty");
  if (shape.size() != 1 && shape.size() != 3) throw ConfigError("synth: shape must be [features] or [C, H, W]");
  if (!(separation >= 0.0 && separation <= 1.0)) throw ConfigError("synth: separation must be in [0, 1]");
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("synth: flip_prob must be in [0, 1]");
}

LabeledDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const std::size_t dim = shape_size(spec.shape);

  std::vector<std::vector<double>> protos(spec.classes, std::vector<double>(dim));
  Rng proto_rng(derive_seed(spec.prototype_seed, {0x70726f74}));
  std::bernoulli_distribution coin(0.5);
  for (auto& p : protos) {
    for (double& v : p) v = 0.5 + (coin(proto_rng) ? 0.5 : -0.5) * spec.separation;
  }

  const std::size_t n = spec.classes * spec.per_class;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {0x73616d70}));
  std::shuffle(order.begin(), order.end(), rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> data(n * dim);
  std::vector<std::size_t> labels(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cls = order[k] % spec.classes;
    labels[k] = cls;
    double* row = data.data() + k * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      double v = protos[cls][j];
      if (spec.flip_prob > 0.0 && unit(rng) < spec.flip_prob) v = 1.0 - v;
      if (spec.noise > 0.0) v += spec.noise * gauss(rng);
      row[j] = std::clamp(v, 0.0, 1.0);
    }
  }
  Shape shape{n};
  shape.insert(shape.end(), spec.shape.begin(), spec.shape.end());
  return LabeledDataset(Tensor(std::move(shape), std::move(data)), std::move(labels), spec.classes, spec.name);
}

}  // namespace certfl::data
