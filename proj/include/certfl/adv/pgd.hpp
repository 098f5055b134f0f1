#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/nn/train.hpp"
#include "certfl/zono/zonotope.hpp"

namespace certfl::adv {

struct PgdConfig {
  zono::CertEpsilon eps = zono::CertEpsilon::adv(0.0);
  double step_size = 0.0;
  std::size_t num_steps = 40;
  bool random_start = true;
  // Softmax temperature the attacker differentiates through. Crafting at the
  // distillation temperature restores the gradients a distilled model hides.
  double attack_temperature = 1.0;
  std::uint64_t rng_seed = 0;
  // Round softmax and input gradients through float32, as a float32
  // framework would.
  bool fp32_masking = true;
  // Stop as soon as an iterate is misclassified.
  bool early_stop = true;

  // 40 steps of 2.5 * eps / 40 with a random start.
  static PgdConfig standard(double eps, std::size_t steps = 40);
  void validate() const;
};

// L-infinity PGD on the temperature-scaled cross-entropy. The result
// satisfies |x' - x|_inf <= eps and lies in [0, 1].
std::vector<double> pgd_attack(const nn::Model& model, std::span<const double> x, std::size_t y,
                               const PgdConfig& cfg);

// Per-point seed used by dataset-level attacks for point i.
std::uint64_t point_seed(const PgdConfig& cfg, std::size_t i);

// Fraction of points still classified correctly after pgd_attack.
double adv_accuracy(const nn::Model& model, const data::LabeledDataset& dataset, const PgdConfig& cfg);

// Madry adversarial training: every example of every batch is replaced by its
// PGD perturbation before the gradient step. eps = 0 reduces to nn::train.
nn::Model pgd_train(nn::Model model, const data::LabeledDataset& data, const nn::TrainConfig& train_cfg,
                    const PgdConfig& pgd_cfg);

}  // namespace certfl::adv
