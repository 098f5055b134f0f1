#include "certfl/nn/backprop.hpp"

#include <algorithm>
#include <cmath>

#include "certfl/error.hpp"

namespace certfl::nn {

std::vector<double> softmax_t(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InputError("softmax temperature must be > 0");
  require_finite(logits, "softmax logits");
  if (logits.empty()) throw InputError("softmax of empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp((logits[k] - peak) / temperature);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor softmax_t(const Tensor& logits, double temperature) {
  if (logits.rank() == 1) return Tensor(logits.shape(), softmax_t(logits.data(), temperature));
  if (logits.rank() != 2) throw InputError("softmax expects a vector or a [batch, classes] tensor");
  std::vector<double> out;
  out.reserve(logits.size());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto p = softmax_t(logits.row(r), temperature);
    out.insert(out.end(), p.begin(), p.end());
  }
  return Tensor(logits.shape(), std::move(out));
}

std::vector<double> backpropagate(const Model& model, const std::vector<std::vector<double>>& trace,
                                  std::span<const double> grad_logits, std::span<double> grad_params,
                                  bool want_input) {
  const auto& layers = model.layers();
  if (trace.size() != layers.size() + 1) throw InputError("trace does not match model depth");
  if (grad_logits.size() != model.num_classes()) throw InputError("logit gradient has wrong length");
  if (!grad_params.empty() && grad_params.size() != model.param_count()) {
    throw InputError("parameter gradient buffer has wrong length");
  }
  std::vector<double> grad(grad_logits.begin(), grad_logits.end());
  std::vector<double> next;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Layer& layer = layers[i];
    const std::vector<double>& in = trace[i];
    const bool need_input = want_input || i > 0;
    if (const auto* d = std::get_if<Dense>(&layer)) {
      if (!grad_params.empty()) {
        auto slot = grad_params.subspan(model.param_offset(i), param_count(layer));
        accumulate_weight_grad(*d, in, grad, slot.first(d->weight.size()));
        auto gb = slot.subspan(d->weight.size());
        for (std::size_t o = 0; o < gb.size(); ++o) gb[o] += grad[o];
      }
      if (!need_input) break;
      next.assign(d->in_features, 0.0);
      linear_transpose(*d, grad, next);
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      if (!grad_params.empty()) {
        auto slot = grad_params.subspan(model.param_offset(i), param_count(layer));
        accumulate_weight_grad(*c, in, grad, slot.first(c->kernel.size()));
        auto gb = slot.subspan(c->kernel.size());
        const std::size_t plane = c->out_height() * c->out_width();
        for (std::size_t o = 0; o < grad.size(); ++o) gb[o / plane] += grad[o];
      }
      if (!need_input) break;
      next.assign(c->input_size(), 0.0);
      linear_transpose(*c, grad, next);
    } else {
      next.resize(grad.size());
      for (std::size_t k = 0; k < grad.size(); ++k) next[k] = in[k] > 0.0 ? grad[k] : 0.0;
    }
    grad.swap(next);
  }
  if (!want_input) return {};
  return grad;
}

Gradients backward(const Model& model, std::span<const double> x, const Target& target,
                   const BackwardOptions& options) {
  const auto acts = model.trace(x);
  const std::vector<double>& z = acts.back();
  const std::size_t classes = z.size();

  Gradients out;
  out.logits = z;
  std::vector<double> dz(classes, 0.0);

  if (const auto* custom = std::get_if<LogitGradient>(&target)) {
    if (custom->grad.size() != classes) throw InputError("logit gradient has wrong length");
    dz = custom->grad;
  } else {
    std::vector<double> t(classes, 0.0);
    if (const auto* hard = std::get_if<HardLabel>(&target)) {
      if (hard->label >= classes) throw InputError("label out of range");
      t[hard->label] = 1.0;
    } else {
      const auto& soft = std::get<SoftLabel>(target).probs;
      if (soft.size() != classes) throw InputError("soft label has wrong length");
      t = soft;
    }
    const double temp = options.temperature;
    std::vector<double> p = softmax_t(z, temp);
    // log-softmax directly for the loss value (stable for saturated logits)
    const double peak = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp((v - peak) / temp);
    lse = std::log(lse);
    double loss = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      if (t[k] != 0.0) loss -= t[k] * ((z[k] - peak) / temp - lse);
    }
    out.loss = loss;
    for (std::size_t k = 0; k < classes; ++k) {
      if (options.fp32_masking) {
        const float pk = static_cast<float>(p[k]);
        const float tk = static_cast<float>(t[k]);
        dz[k] = static_cast<double>(pk - tk) / temp;
      } else {
        dz[k] = (p[k] - t[k]) / temp;
      }
    }
  }
  require_finite(dz, "logit gradient");

  if (options.param_grads) out.params.assign(model.param_count(), 0.0);
  out.input = backpropagate(model, acts, dz, out.params, options.input_grad);
  if (options.fp32_masking) {
    for (double& g : out.input) g = static_cast<double>(static_cast<float>(g));
  }
  return out;
}

}  // namespace certfl::nn
