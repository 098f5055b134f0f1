#include "certfl/adv/pgd.hpp"

#include <algorithm>
#include <cmath>

#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"

namespace certfl::adv {

PgdConfig PgdConfig::standard(double eps, std::size_t steps) {
  PgdConfig cfg;
  cfg.eps = zono::CertEpsilon::adv(eps);
  cfg.num_steps = steps;
  cfg.step_size = 2.5 * eps / static_cast<double>(steps);
  if (cfg.step_size == 0.0) cfg.step_size = 1e-3;
  return cfg;
}

void PgdConfig::validate() const {
  eps.validate();
  if (!(step_size > 0.0)) throw ConfigError("pgd step_size must be > 0");
  if (num_steps < 1) throw ConfigError("pgd num_steps must be >= 1");
  if (!(attack_temperature > 0.0)) throw ConfigError("pgd attack_temperature must be > 0");
}

std::vector<double> pgd_attack(const nn::Model& model, std::span<const double> x, std::size_t y,
                               const PgdConfig& cfg) {
  cfg.validate();
  if (x.size() != model.input_size()) throw InputError("attack input does not match model input");
  if (y >= model.num_classes()) throw InputError("label out of range");
  const double eps = cfg.eps.value;
  const std::size_t d = x.size();
  std::vector<double> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    // Tighten by an ulp where rounding would let |x' - x| exceed eps.
    double l = x[j] - eps;
    while (x[j] - l > eps) l = std::nextafter(l, INFINITY);
    double h = x[j] + eps;
    while (h - x[j] > eps) h = std::nextafter(h, -INFINITY);
    lo[j] = std::max(l, 0.0);
    hi[j] = std::min(h, 1.0);
  }
  std::vector<double> cur(x.begin(), x.end());
  if (cfg.random_start && eps > 0.0) {
    Rng rng(cfg.rng_seed);
    std::uniform_real_distribution<double> noise(-eps, eps);
    for (std::size_t j = 0; j < d; ++j) cur[j] = std::clamp(x[j] + noise(rng), lo[j], hi[j]);
  }
  nn::BackwardOptions opts;
  opts.temperature = cfg.attack_temperature;
  opts.param_grads = false;
  opts.fp32_masking = cfg.fp32_masking;
  for (std::size_t step = 0; step < cfg.num_steps; ++step) {
    const nn::Gradients g = nn::backward(model, cur, nn::HardLabel{y}, opts);
    if (cfg.early_stop && nn::argmax(g.logits) != y) return cur;
    for (std::size_t j = 0; j < d; ++j) {
      const double s = g.input[j] > 0.0 ? 1.0 : (g.input[j] < 0.0 ? -1.0 : 0.0);
      cur[j] = std::clamp(cur[j] + cfg.step_size * s, lo[j], hi[j]);
    }
  }
  return cur;
}

std::uint64_t point_seed(const PgdConfig& cfg, std::size_t i) { return derive_seed(cfg.rng_seed, {0x50474400, i}); }

double adv_accuracy(const nn::Model& model, const data::LabeledDataset& dataset, const PgdConfig& cfg) {
  if (dataset.empty()) throw ConfigError("evaluation set is empty");
  cfg.validate();
  std::vector<char> ok(dataset.size(), 0);
  parallel_for(dataset.size(), [&](std::size_t i) {
    PgdConfig local = cfg;
    local.rng_seed = point_seed(cfg, i);
    const auto adv = pgd_attack(model, dataset.input(i), dataset.label(i), local);
    ok[i] = model.predict(adv) == dataset.label(i);
  });
  const auto good = std::count(ok.begin(), ok.end(), char{1});
  return static_cast<double>(good) / static_cast<double>(dataset.size());
}

nn::Model pgd_train(nn::Model model, const data::LabeledDataset& data, const nn::TrainConfig& train_cfg,
                    const PgdConfig& pgd_cfg) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (pgd_cfg.eps.value == 0.0) return nn::train(std::move(model), data, train_cfg);
  pgd_cfg.validate();
  nn::BackwardOptions opts;
  opts.temperature = train_cfg.temperature;
  opts.input_grad = false;
  return nn::sgd(std::move(model), data.size(), train_cfg,
                 [&](const nn::Model& m, std::size_t i, std::uint64_t step_seed) {
                   PgdConfig local = pgd_cfg;
                   local.rng_seed = step_seed;
                   local.early_stop = false;
                   const auto adv = pgd_attack(m, data.input(i), data.label(i), local);
                   nn::Gradients g = nn::backward(m, adv, nn::HardLabel{data.label(i)}, opts);
                   return nn::ExampleGradient{g.loss, std::move(g.params)};
                 });
}

}  // namespace certfl::adv
