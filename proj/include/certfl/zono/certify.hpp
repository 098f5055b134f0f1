#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/zono/zonotope.hpp"

namespace certfl::zono {

struct CertifyOptions {
  // Input domain the ball is intersected with; nullopt disables clipping.
  std::optional<Clip> clip = Clip{};
  DiffMode diff_mode = DiffMode::shared_symbols;
};

struct CertVerdict {
  bool certified = false;
  std::size_t predicted_label = 0;
  IntervalBox logit_bounds;
  double cert_loss = 0.0;
};

// Certified iff every rival class q has upper(z_q - z_y) < 0 (strict) over
// the zonotope image of the eps-ball around x.
CertVerdict certify(const nn::Model& model, std::span<const double> x, std::size_t y, CertEpsilon eps,
                    const CertifyOptions& options = {});

struct CertStats {
  double certified_accuracy = 0.0;
  double mean_cert_loss = 0.0;
  std::vector<CertVerdict> verdicts;  // one per datapoint, in dataset order
};

// Certified accuracy counts points that are both certified and classified
// correctly; the mean loss is reduced in dataset order.
CertStats certified_stats(const nn::Model& model, const data::LabeledDataset& dataset, CertEpsilon eps,
                          const CertifyOptions& options = {});

struct CertLossGradient {
  double loss = 0.0;         // max(0, max_q upper(z_q - z_y) + margin), logits divided by logit_scale
  double raw_loss = 0.0;     // cert_loss on the unscaled logits
  bool certified = false;
  std::vector<double> params;  // d loss / d parameters, flatten_params order
};

// Differentiates the certifiable loss through zonotope propagation. The ReLU
// relaxation coefficients (slope and offset of every crossing neuron) are
// held constant for the step, and |.| uses its sign as subgradient. Logits
// are divided by logit_scale before the loss (temperature-normalized units).
CertLossGradient cert_loss_gradient(const nn::Model& model, std::span<const double> x, std::size_t y,
                                    CertEpsilon eps, const CertifyOptions& options = {}, double margin = 0.0,
                                    double logit_scale = 1.0);

}  // namespace certfl::zono
