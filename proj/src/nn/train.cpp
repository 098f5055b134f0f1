#include "certfl/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"

namespace certfl::nn {

namespace {
constexpr std::size_t kChunk = 8;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be > 0");
}

void scale_last_layer(const Model& model, std::vector<double>& flat_grad, double factor) {
  const std::size_t last = model.last_param_layer();
  const std::size_t begin = model.param_offset(last);
  const std::size_t end = begin + param_count(model.layers()[last]);
  for (std::size_t k = begin; k < end; ++k) flat_grad[k] *= factor;
}

Model sgd(Model model, std::size_t n, const TrainConfig& cfg, const ExampleGradientFn& grad) {
  cfg.validate();
  if (n == 0) throw ConfigError("training set is empty");
  if (cfg.epochs == 0) return model;

  const std::size_t p = model.param_count();
  std::vector<double> params = flatten_params(model);
  std::vector<std::size_t> order(n);
  std::vector<double> step(p);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.rng_seed, {0x5348, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::size_t count = stop - start;
      const std::size_t chunks = (count + kChunk - 1) / kChunk;
      std::vector<std::vector<double>> partial(chunks);
      parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> acc(p, 0.0);
        const std::size_t lo = start + c * kChunk;
        const std::size_t hi = std::min(stop, lo + kChunk);
        for (std::size_t pos = lo; pos < hi; ++pos) {
          ExampleGradient g = grad(model, order[pos], derive_seed(cfg.rng_seed, {epoch, pos}));
          if (g.params.size() != p) throw InputError("example gradient has wrong length");
          for (std::size_t k = 0; k < p; ++k) acc[k] += g.params[k];
        }
        partial[c] = std::move(acc);
      });
      std::fill(step.begin(), step.end(), 0.0);
      for (const auto& part : partial) {
        for (std::size_t k = 0; k < p; ++k) step[k] += part[k];
      }
      const double scale = cfg.learning_rate / static_cast<double>(count);
      for (double& s : step) s *= scale;
      if (cfg.temperature != 1.0) scale_last_layer(model, step, cfg.temperature * cfg.temperature);
      for (std::size_t k = 0; k < p; ++k) params[k] -= step[k];
      try {
        model = load_params(std::move(model), params);
      } catch (const NumericError&) {
        throw NumericError("training diverged (non-finite parameters); lower the learning rate");
      }
    }
  }
  return model;
}

Model train(Model model, const data::LabeledDataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (data.sample_size() != model.input_size()) throw InputError("dataset samples do not match model input");
  BackwardOptions opts;
  opts.temperature = cfg.temperature;
  opts.input_grad = false;
  return sgd(std::move(model), data.size(), cfg, [&](const Model& m, std::size_t i, std::uint64_t) {
    Gradients g = backward(m, data.input(i), HardLabel{data.label(i)}, opts);
    return ExampleGradient{g.loss, std::move(g.params)};
  });
}

Model train_soft(Model model, const data::LabeledDataset& data, const std::vector<std::vector<double>>& targets,
                 const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (targets.size() != data.size()) throw InputError("one target distribution per sample is required");
  BackwardOptions opts;
  opts.temperature = cfg.temperature;
  opts.input_grad = false;
  return sgd(std::move(model), data.size(), cfg, [&](const Model& m, std::size_t i, std::uint64_t) {
    Gradients g = backward(m, data.input(i), SoftLabel{targets[i]}, opts);
    return ExampleGradient{g.loss, std::move(g.params)};
  });
}

double accuracy(const Model& model, const data::LabeledDataset& data) {
  if (data.empty()) throw ConfigError("evaluation set is empty");
  std::vector<char> hit(data.size(), 0);
  parallel_for(data.size(), [&](std::size_t i) { hit[i] = model.predict(data.input(i)) == data.label(i); });
  const auto correct = std::count(hit.begin(), hit.end(), char{1});
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace certfl::nn
