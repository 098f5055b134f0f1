#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"

namespace certfl::nn {

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t rng_seed = 0;
  // Softmax temperature of the training loss. When it differs from 1 the
  // step of the last parameterized layer is scaled by temperature^2, which is
  // plain SGD on the reparameterization W_last = T * V: the hidden layers see
  // the same gradients as at T = 1 and the logits grow to T times the scale.
  double temperature = 1.0;

  void validate() const;
};

struct ExampleGradient {
  double loss = 0.0;
  std::vector<double> params;
};

// Computes the gradient of one training example against the current model.
// step_seed is unique per (epoch, position) and drives any randomness.
using ExampleGradientFn =
    std::function<ExampleGradient(const Model& model, std::size_t index, std::uint64_t step_seed)>;

// Mini-batch SGD over n examples with a per-epoch shuffle derived from
// cfg.rng_seed. Per-example gradients are reduced in a fixed order, so the
// result does not depend on the worker count.
Model sgd(Model model, std::size_t n, const TrainConfig& cfg, const ExampleGradientFn& grad);

// Cross-entropy at cfg.temperature on hard labels.
Model train(Model model, const data::LabeledDataset& data, const TrainConfig& cfg);

// Cross-entropy at cfg.temperature against per-example target distributions.
Model train_soft(Model model, const data::LabeledDataset& data, const std::vector<std::vector<double>>& targets,
                 const TrainConfig& cfg);

// Fraction of samples whose argmax logit equals the label.
double accuracy(const Model& model, const data::LabeledDataset& data);

// Scales the last parameterized layer's step by factor (see TrainConfig).
void scale_last_layer(const Model& model, std::vector<double>& flat_grad, double factor);

}  // namespace certfl::nn
