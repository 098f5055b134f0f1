#include "certfl/attacks/backdoor.hpp"

#include <algorithm>
#include <cmath>

#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"

namespace certfl::attacks {

void BackdoorSpec::validate(double adv_eps) const {
  if (!(trigger_magnitude >= 0.0) || !std::isfinite(trigger_magnitude)) {
    throw ConfigError("backdoor trigger_magnitude must be >= 0");
  }
  if (stripe_period < 1) throw ConfigError("backdoor stripe_period must be >= 1");
  if (!(poison_fraction >= 0.0 && poison_fraction <= 1.0)) throw ConfigError("backdoor poison_fraction must be in [0, 1]");
  if (!(adversarial_fraction >= 0.0 && adversarial_fraction <= 1.0)) {
    throw ConfigError("backdoor adversarial_fraction must be in [0, 1]");
  }
  if (trigger_magnitude > adv_eps) {
    throw ConfigError("backdoor trigger_magnitude " + std::to_string(trigger_magnitude) +
                      " exceeds the adversarial-training radius " + std::to_string(adv_eps));
  }
}

std::vector<double> apply_trigger(std::span<const double> x, const Shape& sample_shape, const BackdoorSpec& spec) {
  if (sample_shape.size() < 2 || sample_shape.size() > 3) {
    throw InputError("trigger needs an image-shaped sample, got " + shape_string(sample_shape));
  }
  if (x.size() != shape_size(sample_shape)) throw InputError("sample does not match its shape");
  if (spec.stripe_period < 1) throw ConfigError("backdoor stripe_period must be >= 1");
  const std::size_t width = sample_shape.back();
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t band = (k % width) / spec.stripe_period;
    const double delta = band % 2 == 0 ? spec.trigger_magnitude : -spec.trigger_magnitude;
    double v = out[k] + delta;
    while (std::abs(v - x[k]) > spec.trigger_magnitude) v = std::nextafter(v, x[k]);
    out[k] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Tensor apply_trigger(const Tensor& x, const BackdoorSpec& spec) {
  return Tensor(x.shape(), apply_trigger(x.data(), x.shape(), spec));
}

double trigger_success_rate(const nn::Model& model, const data::LabeledDataset& data, const BackdoorSpec& spec) {
  const Shape shape = data.sample_shape();
  std::vector<char> hit(data.size(), 0), counted(data.size(), 0);
  parallel_for(data.size(), [&](std::size_t i) {
    if (data.label(i) == spec.target_class) return;
    counted[i] = 1;
    hit[i] = model.predict(apply_trigger(data.input(i), shape, spec)) == spec.target_class;
  });
  const auto n = std::count(counted.begin(), counted.end(), char{1});
  if (n == 0) throw ConfigError("no points outside the backdoor target class");
  return static_cast<double>(std::count(hit.begin(), hit.end(), char{1})) / static_cast<double>(n);
}

nn::Model backdoor_attack(const nn::Model& global_model, const data::LabeledDataset& attacker_data,
                          const BackdoorSpec& spec, const nn::TrainConfig& train_cfg, const adv::PgdConfig& pgd_cfg) {
  if (attacker_data.empty()) throw ConfigError("attacker holds no data");
  spec.validate(pgd_cfg.eps.value);
  if (spec.target_class >= global_model.num_classes()) throw ConfigError("backdoor target_class out of range");

  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < attacker_data.size(); ++i) {
    if (attacker_data.label(i) != spec.target_class) sources.push_back(i);
  }
  const auto want = static_cast<std::size_t>(std::llround(spec.poison_fraction * static_cast<double>(attacker_data.size())));
  if (want > 0 && sources.empty()) throw ConfigError("no points outside the backdoor target class to poison");
  if (want == 0) return adv::pgd_train(global_model, attacker_data, train_cfg, pgd_cfg);

  const Shape shape = attacker_data.sample_shape();
  std::vector<std::vector<double>> poison(want);
  for (std::size_t k = 0; k < want; ++k) poison[k] = apply_trigger(attacker_data.input(sources[k % sources.size()]), shape, spec);

  const std::size_t n = attacker_data.size();
  nn::BackwardOptions opts;
  opts.temperature = train_cfg.temperature;
  opts.input_grad = false;
  pgd_cfg.validate();
  return nn::sgd(global_model, n + want, train_cfg, [&](const nn::Model& m, std::size_t i, std::uint64_t step_seed) {
    nn::Gradients g;
    if (i < n) {
      adv::PgdConfig local = pgd_cfg;
      local.rng_seed = step_seed;
      local.early_stop = false;
      Rng coin(derive_seed(step_seed, {0x4d4958}));
      const bool perturb = std::uniform_real_distribution<double>(0.0, 1.0)(coin) < spec.adversarial_fraction;
      const auto x = perturb && pgd_cfg.eps.value > 0.0 ? adv::pgd_attack(m, attacker_data.input(i), attacker_data.label(i), local)
                                             : std::vector<double>(attacker_data.input(i).begin(), attacker_data.input(i).end());
      g = nn::backward(m, x, nn::HardLabel{attacker_data.label(i)}, opts);
    } else {
      g = nn::backward(m, poison[i - n], nn::HardLabel{spec.target_class}, opts);
    }
    return nn::ExampleGradient{g.loss, std::move(g.params)};
  });
}

}  // namespace certfl::attacks
