#include "certfl/zono/certify.hpp"

#include <cmath>

#include "certfl/error.hpp"
#include "certfl/parallel.hpp"

namespace certfl::zono {

CertVerdict certify(const nn::Model& model, std::span<const double> x, std::size_t y, CertEpsilon eps,
                    const CertifyOptions& options) {
  eps.validate();
  if (y >= model.num_classes()) throw InputError("label out of range");
  const Zonotope out = propagate(model, from_linf_ball(x, eps, options.clip));
  CertVerdict v;
  v.predicted_label = model.predict(x);
  v.logit_bounds = bounds(out);
  v.cert_loss = cert_loss(out, y, options.diff_mode);
  v.certified = true;
  for (std::size_t q = 0; q < model.num_classes() && v.certified; ++q) {
    if (q == y) continue;
    const double upper = options.diff_mode == DiffMode::shared_symbols
                             ? pairwise_diff_upper(out, q, y)
                             : v.logit_bounds.upper[q] - v.logit_bounds.lower[y];
    if (!(upper < 0.0)) v.certified = false;
  }
  return v;
}

CertStats certified_stats(const nn::Model& model, const data::LabeledDataset& dataset, CertEpsilon eps,
                          const CertifyOptions& options) {
  if (dataset.empty()) throw ConfigError("certification set is empty");
  eps.validate();
  CertStats stats;
  stats.verdicts.resize(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    stats.verdicts[i] = certify(model, dataset.input(i), dataset.label(i), eps, options);
  });
  std::size_t good = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& v = stats.verdicts[i];
    if (v.certified && v.predicted_label == dataset.label(i)) ++good;
    loss += v.cert_loss;
  }
  stats.certified_accuracy = static_cast<double>(good) / static_cast<double>(dataset.size());
  stats.mean_cert_loss = loss / static_cast<double>(dataset.size());
  return stats;
}

namespace {

// dG rows are symbol-major like the generators.
struct AbstractGrad {
  std::vector<double> center;
  std::vector<double> gens;
};

}  // namespace

CertLossGradient cert_loss_gradient(const nn::Model& model, std::span<const double> x, std::size_t y,
                                    CertEpsilon eps, const CertifyOptions& options, double margin,
                                    double logit_scale) {
  eps.validate();
  if (y >= model.num_classes()) throw InputError("label out of range");
  if (!(logit_scale > 0.0)) throw InputError("logit scale must be > 0");
  const auto& layers = model.layers();

  std::vector<Zonotope> zs;
  zs.reserve(layers.size() + 1);
  zs.push_back(from_linf_ball(x, eps, options.clip));
  std::vector<std::vector<double>> relu_scale(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const nn::Layer& layer = layers[li];
    const Zonotope& in = zs.back();
    if (const auto* d = std::get_if<nn::Dense>(&layer)) {
      zs.push_back(affine(in, *d));
    } else if (const auto* c = std::get_if<nn::Conv2D>(&layer)) {
      zs.push_back(conv2d_abs(in, *c));
    } else {
      const IntervalBox box = bounds(in);
      auto& s = relu_scale[li];
      s.assign(in.dim(), 1.0);
      for (std::size_t j = 0; j < in.dim(); ++j) {
        if (box.lower[j] >= 0.0) continue;
        s[j] = box.upper[j] <= 0.0 ? 0.0 : box.upper[j] / (box.upper[j] - box.lower[j]);
      }
      zs.push_back(relu_deepzono(in));
    }
  }

  const Zonotope& out = zs.back();
  const std::size_t classes = out.dim();
  CertLossGradient result;
  result.raw_loss = cert_loss(out, y, options.diff_mode);
  result.params.assign(model.param_count(), 0.0);

  double worst = -INFINITY;
  std::size_t worst_q = y;
  result.certified = true;
  for (std::size_t q = 0; q < classes; ++q) {
    if (q == y) continue;
    const double upper = pairwise_diff_upper(out, q, y);
    if (!(upper < 0.0)) result.certified = false;
    if (upper > worst) {
      worst = upper;
      worst_q = q;
    }
  }
  const double scaled = worst / logit_scale + margin;
  result.loss = std::max(0.0, scaled);
  if (!(scaled > 0.0)) return result;

  // Seed gradient on the output zonotope.
  AbstractGrad g;
  g.center.assign(classes, 0.0);
  g.center[worst_q] = 1.0 / logit_scale;
  g.center[y] = -1.0 / logit_scale;
  g.gens.assign(out.num_symbols() * classes, 0.0);
  for (std::size_t i = 0; i < out.num_symbols(); ++i) {
    const double diff = out.coefficient(i, worst_q) - out.coefficient(i, y);
    const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    g.gens[i * classes + worst_q] = s / logit_scale;
    g.gens[i * classes + y] = -s / logit_scale;
  }

  for (std::size_t li = layers.size(); li-- > 0;) {
    const nn::Layer& layer = layers[li];
    const Zonotope& in = zs[li];
    const std::size_t din = in.dim();
    const std::size_t dout = nn::output_size(layer);
    const std::size_t n_in = in.num_symbols();
    AbstractGrad next;
    if (const auto* relu = std::get_if<nn::ReLU>(&layer)) {
      (void)relu;
      const auto& s = relu_scale[li];
      next.center.resize(din);
      for (std::size_t j = 0; j < din; ++j) next.center[j] = s[j] * g.center[j];
      next.gens.resize(n_in * din);
      for (std::size_t i = 0; i < n_in; ++i) {
        for (std::size_t j = 0; j < din; ++j) next.gens[i * din + j] = s[j] * g.gens[i * din + j];
      }
      g = std::move(next);
      continue;
    }
    auto slot = std::span<double>(result.params).subspan(model.param_offset(li), nn::param_count(layer));
    const bool need_input = li > 0;
    auto apply = [&](const auto& lin) {
      const std::size_t wsize = nn::weights_of(layer).size();
      auto gw = slot.first(wsize);
      auto gb = slot.subspan(wsize);
      nn::accumulate_weight_grad(lin, in.center(), g.center, gw);
      for (std::size_t i = 0; i < n_in; ++i) {
        nn::accumulate_weight_grad(lin, in.generator(i), std::span<const double>(g.gens).subspan(i * dout, dout),
                                   gw);
      }
      const std::size_t per_bias = dout / gb.size();
      for (std::size_t o = 0; o < dout; ++o) gb[o / per_bias] += g.center[o];
      if (!need_input) return;
      next.center.assign(din, 0.0);
      nn::linear_transpose(lin, g.center, next.center);
      next.gens.assign(n_in * din, 0.0);
      for (std::size_t i = 0; i < n_in; ++i) {
        nn::linear_transpose(lin, std::span<const double>(g.gens).subspan(i * dout, dout),
                             std::span<double>(next.gens).subspan(i * din, din));
      }
    };
    if (const auto* d = std::get_if<nn::Dense>(&layer)) {
      apply(*d);
    } else {
      apply(std::get<nn::Conv2D>(layer));
    }
    if (!need_input) break;
    g = std::move(next);
  }
  return result;
}

}  // namespace certfl::zono
