#include "certfl/attacks/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "certfl/attacks/distill.hpp"
#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/nn/train.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"

namespace certfl::attacks {

void AdaptiveSpec::validate() const {
  target_eps.validate();
  start_eps.validate();
  if (start_eps.value > target_eps.value) throw ConfigError("adaptive start_eps must not exceed target_eps");
  if (!(eps_step > 0.0)) throw ConfigError("adaptive eps_step must be > 0");
  if (!(target_certified_fraction > 0.0 && target_certified_fraction <= 1.0)) {
    throw ConfigError("adaptive target_certified_fraction must be in (0, 1]");
  }
  if (!(target_mean_loss >= 0.0) || !(loss_band_fraction >= 0.0)) {
    throw ConfigError("adaptive target_mean_loss and loss_band_fraction must be >= 0");
  }
  if (!(temperature > 0.0)) throw ConfigError("adaptive temperature must be > 0");
  if (!(w_cert >= 0.0 && w_distill >= 0.0)) throw ConfigError("adaptive loss weights must be >= 0");
  if (!(margin >= 0.0)) throw ConfigError("adaptive margin must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("adaptive learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("adaptive batch_size must be >= 1");
  if (!(max_wall_seconds >= 0.0)) throw ConfigError("adaptive max_wall_seconds must be >= 0");
}

AdaptiveResult adaptive_attack(const nn::Model& distilled, const data::LabeledDataset& cert_set,
                               const AdaptiveSpec& spec, const data::LabeledDataset* maintenance) {
  spec.validate();
  AdaptiveResult result;
  result.model = distilled;
  if (spec.cert_subset_size == 0) {
    result.converged = true;
    return result;
  }
  if (spec.cert_subset_size > cert_set.size()) {
    throw ConfigError("adaptive cert_subset_size " + std::to_string(spec.cert_subset_size) +
                      " exceeds the certification set (" + std::to_string(cert_set.size()) + " points)");
  }
  const auto subset = cert_set.slice(0, spec.cert_subset_size, cert_set.name() + ":subset");
  const data::LabeledDataset& keep = maintenance != nullptr && !maintenance->empty() ? *maintenance : subset;
  const auto targets = soft_labels(distilled, keep, spec.temperature);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  const std::size_t p = distilled.param_count();
  const std::size_t n = subset.size();
  const std::size_t m = keep.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(spec.rng_seed, {0x4144}));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  nn::Model model = distilled;
  std::vector<double> params = flatten_params(model);
  std::size_t stage = 0;
  auto eps_at = [&](std::size_t k) {
    const double e = spec.start_eps.value + static_cast<double>(k) * spec.eps_step;
    return e >= spec.target_eps.value - 1e-12 ? spec.target_eps.value : e;
  };
  std::size_t best_certified = 0;
  double best_loss = INFINITY;
  bool matched_any = false;
  std::size_t cursor = 0;

  std::vector<zono::CertLossGradient> per_point(n);
  std::vector<double> step(p);
  const double last_layer_factor = spec.temperature * spec.temperature;

  for (std::size_t it = 0; it < spec.max_iterations && elapsed() < spec.max_wall_seconds; ++it) {
    const double eps = eps_at(stage);
    parallel_for(n, [&](std::size_t i) {
      per_point[i] = zono::cert_loss_gradient(model, subset.input(i), subset.label(i), zono::CertEpsilon::crt(eps), {},
                                              spec.margin, spec.temperature);
    });
    std::size_t certified = 0;
    double raw = 0.0;
    for (const auto& g : per_point) {
      certified += g.certified ? 1 : 0;
      raw += g.raw_loss;
    }
    const double mean_raw = raw / static_cast<double>(n);
    bool match = static_cast<double>(certified) >= spec.target_certified_fraction * static_cast<double>(n) - 1e-9;
    if (spec.match_mode == MatchMode::accuracy_and_loss) {
      match = match && std::abs(mean_raw - spec.target_mean_loss) <= spec.loss_band_fraction * spec.target_mean_loss;
    }

    // Distillation-maintenance batch, cycling through a fixed permutation.
    std::fill(step.begin(), step.end(), 0.0);
    double distill_loss = 0.0;
    const std::size_t batch = std::min(spec.batch_size, m);
    std::vector<nn::Gradients> dg(batch);
    std::vector<std::size_t> idx(batch);
    for (std::size_t k = 0; k < batch; ++k) idx[k] = order[(cursor + k) % m];
    nn::BackwardOptions opts;
    opts.temperature = spec.temperature;
    opts.input_grad = false;
    opts.param_grads = !match;
    parallel_for(batch, [&](std::size_t k) { dg[k] = nn::backward(model, keep.input(idx[k]), nn::SoftLabel{targets[idx[k]]}, opts); });
    for (const auto& g : dg) distill_loss += g.loss;
    distill_loss /= static_cast<double>(batch);

    result.log.push_back({it, eps, certified, mean_raw, distill_loss, elapsed()});
    result.iterations = it + 1;

    if (match) {
      matched_any = true;
      result.eps_reached = eps;
      result.points_matched = certified;
      result.model = model;
      if (eps >= spec.target_eps.value) {
        result.converged = true;
        break;
      }
      ++stage;
      continue;
    }
    if (!matched_any && (certified > best_certified || (certified == best_certified && mean_raw < best_loss))) {
      best_certified = certified;
      best_loss = mean_raw;
      result.model = model;
      result.points_matched = certified;
    }

    const double wc = spec.w_cert / static_cast<double>(n);
    for (const auto& g : per_point) {
      if (g.loss == 0.0) continue;
      for (std::size_t k = 0; k < p; ++k) step[k] += wc * g.params[k];
    }
    const double wd = spec.w_distill / static_cast<double>(batch);
    for (const auto& g : dg) {
      for (std::size_t k = 0; k < p; ++k) step[k] += wd * g.params[k];
    }
    cursor = (cursor + batch) % m;
    for (double& s : step) s *= spec.learning_rate;
    if (spec.temperature != 1.0) nn::scale_last_layer(model, step, last_layer_factor);
    for (std::size_t k = 0; k < p; ++k) params[k] -= step[k];
    try {
      model = load_params(std::move(model), params);
    } catch (const NumericError&) {
      throw NumericError("adaptive attack diverged (non-finite parameters); lower the learning rate");
    }
  }
  result.wall_seconds = elapsed();
  return result;
}

}  // namespace certfl::attacks
