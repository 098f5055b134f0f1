#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "certfl/nn/model.hpp"
#include "certfl/tensor.hpp"

namespace certfl::nn {

// softmax(logits / temperature), computed with max subtraction. Accepts a
// vector or a [batch, classes] tensor and normalizes each row.
Tensor softmax_t(const Tensor& logits, double temperature);
std::vector<double> softmax_t(std::span<const double> logits, double temperature);

// Cross-entropy against a hard label.
struct HardLabel {
  std::size_t label = 0;
};
// Cross-entropy against a target distribution (distillation).
struct SoftLabel {
  std::vector<double> probs;
};
// Caller-supplied dLoss/dLogits; the reported loss is zero.
struct LogitGradient {
  std::vector<double> grad;
};
using Target = std::variant<HardLabel, SoftLabel, LogitGradient>;

struct BackwardOptions {
  double temperature = 1.0;
  bool param_grads = true;
  bool input_grad = true;
  // Round the softmax output, the logit error and the input gradient through
  // 32-bit floats. This reproduces the gradient underflow a float32 framework
  // exhibits on saturated (e.g. distilled) models.
  bool fp32_masking = false;
};

struct Gradients {
  double loss = 0.0;
  std::vector<double> logits;
  std::vector<double> params;  // flat, flatten_params order; empty unless requested
  std::vector<double> input;   // empty unless requested
};

// Loss and gradients for one example. The hard/soft losses are
// -sum_k t_k log softmax_t(z)_k whose logit gradient is (p - t) / T.
Gradients backward(const Model& model, std::span<const double> x, const Target& target,
                   const BackwardOptions& options = {});

// Backpropagates an explicit logit gradient given a precomputed trace.
// grad_params (if non-empty) is accumulated into; returns the input gradient
// when want_input is set.
std::vector<double> backpropagate(const Model& model, const std::vector<std::vector<double>>& trace,
                                  std::span<const double> grad_logits, std::span<double> grad_params,
                                  bool want_input);

}  // namespace certfl::nn
