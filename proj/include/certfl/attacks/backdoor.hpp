#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "certfl/adv/pgd.hpp"
#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/nn/train.hpp"

namespace certfl::attacks {

// Vertical stripe trigger. Column band b = col / stripe_period gets
// +trigger_magnitude when b is even and -trigger_magnitude when odd.
struct BackdoorSpec {
  double trigger_magnitude = 0.1;
  std::size_t stripe_period = 1;
  std::size_t target_class = 0;
  double poison_fraction = 0.1;
  // Share of clean examples replaced by their PGD perturbation; the rest
  // are used as is.
  double adversarial_fraction = 0.5;

  // adv_eps is the defender's adversarial-training radius; a trigger larger
  // than it would not be stealthy.
  void validate(double adv_eps) const;
};

// sample_shape is [H, W] or [C, H, W]; the result is clipped to [0, 1].
std::vector<double> apply_trigger(std::span<const double> x, const Shape& sample_shape, const BackdoorSpec& spec);
Tensor apply_trigger(const Tensor& x, const BackdoorSpec& spec);

// Fraction of non-target points whose triggered input is classified as the
// target class.
double trigger_success_rate(const nn::Model& model, const data::LabeledDataset& data, const BackdoorSpec& spec);

// PGD training from global_model on the attacker's pooled data, with
// round(poison_fraction * N) triggered non-target points relabeled to the
// target class appended to the training set. Poisoned examples are used as
// is; each clean one is replaced by its PGD perturbation with probability
// adversarial_fraction. With poison_fraction = 0 this is exactly
// adv::pgd_train.
nn::Model backdoor_attack(const nn::Model& global_model, const data::LabeledDataset& attacker_data,
                          const BackdoorSpec& spec, const nn::TrainConfig& train_cfg, const adv::PgdConfig& pgd_cfg);

}  // namespace certfl::attacks
