#include "certfl/zono/zonotope.hpp"

#include <algorithm>
#include <cmath>

#include "certfl/error.hpp"
#include "certfl/tensor.hpp"

namespace certfl::zono {

void CertEpsilon::validate() const {
  if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("epsilon must be a finite value >= 0");
}

bool IntervalBox::contains(std::span<const double> point, double tol) const {
  if (point.size() != dim()) return false;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (point[j] < lower[j] - tol || point[j] > upper[j] + tol) return false;
  }
  return true;
}

Zonotope::Zonotope(std::vector<double> center, std::vector<double> generators, std::size_t num_symbols)
    : center_(std::move(center)), gens_(std::move(generators)), num_symbols_(num_symbols) {
  if (gens_.size() != num_symbols_ * center_.size()) throw InputError("generator matrix does not match dimension");
  require_finite(center_, "zonotope center");
  require_finite(gens_, "zonotope generators");
}

Zonotope Zonotope::point(std::span<const double> x) { return Zonotope({x.begin(), x.end()}, {}, 0); }

std::span<const double> Zonotope::generator(std::size_t symbol) const {
  if (symbol >= num_symbols_) throw InputError("error symbol index out of range");
  return std::span<const double>(gens_).subspan(symbol * dim(), dim());
}

std::vector<double> Zonotope::instantiate(std::span<const double> eps) const {
  if (eps.size() != num_symbols_) throw InputError("need one value per error symbol");
  std::vector<double> out = center_;
  for (std::size_t i = 0; i < num_symbols_; ++i) {
    const double e = eps[i];
    const double* g = gens_.data() + i * dim();
    for (std::size_t j = 0; j < dim(); ++j) out[j] += g[j] * e;
  }
  return out;
}

Zonotope from_linf_ball(std::span<const double> x, CertEpsilon eps, std::optional<Clip> clip) {
  eps.validate();
  if (clip && clip->lo > clip->hi) throw ConfigError("clip range has lo > hi");
  const std::size_t d = x.size();
  std::vector<double> center(d);
  std::vector<double> gens(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (clip) {
      const double hi = std::min(x[j] + eps.value, clip->hi);
      const double lo = std::max(x[j] - eps.value, clip->lo);
      center[j] = (hi + lo) / 2.0;
      gens[j * d + j] = (hi - lo) / 2.0;
    } else {
      center[j] = x[j];
      gens[j * d + j] = eps.value;
    }
  }
  return Zonotope(std::move(center), std::move(gens), d);
}

Zonotope affine(const Zonotope& z, std::span<const double> weight, std::size_t rows, std::size_t cols,
                std::span<const double> bias) {
  if (cols != z.dim()) {
    throw InputError("affine map expects dimension " + std::to_string(cols) + ", zonotope has " +
                     std::to_string(z.dim()));
  }
  if (weight.size() != rows * cols || bias.size() != rows) throw InputError("affine map shapes are inconsistent");
  return affine(z, nn::Dense(cols, rows, {weight.begin(), weight.end()}, {bias.begin(), bias.end()}));
}

Zonotope affine(const Zonotope& z, const nn::Dense& layer) {
  if (layer.in_features != z.dim()) {
    throw InputError("dense layer expects dimension " + std::to_string(layer.in_features) + ", zonotope has " +
                     std::to_string(z.dim()));
  }
  const std::size_t rows = layer.out_features;
  std::vector<double> center(rows);
  nn::linear_forward(layer, z.center(), center);
  for (std::size_t r = 0; r < rows; ++r) center[r] += layer.bias[r];
  std::vector<double> gens(z.num_symbols() * rows);
  for (std::size_t i = 0; i < z.num_symbols(); ++i) {
    nn::linear_forward(layer, z.generator(i), std::span<double>(gens).subspan(i * rows, rows));
  }
  return Zonotope(std::move(center), std::move(gens), z.num_symbols());
}

Zonotope conv2d_abs(const Zonotope& z, const nn::Conv2D& layer) {
  if (layer.input_size() != z.dim()) {
    throw InputError("conv2d layer expects dimension " + std::to_string(layer.input_size()) + ", zonotope has " +
                     std::to_string(z.dim()));
  }
  const std::size_t rows = layer.output_size();
  const std::size_t plane = layer.out_height() * layer.out_width();
  std::vector<double> center(rows);
  nn::linear_forward(layer, z.center(), center);
  for (std::size_t r = 0; r < rows; ++r) center[r] += layer.bias[r / plane];
  std::vector<double> gens(z.num_symbols() * rows);
  for (std::size_t i = 0; i < z.num_symbols(); ++i) {
    nn::linear_forward(layer, z.generator(i), std::span<double>(gens).subspan(i * rows, rows));
  }
  return Zonotope(std::move(center), std::move(gens), z.num_symbols());
}

Zonotope relu_deepzono(const Zonotope& z) {
  const std::size_t d = z.dim();
  const std::size_t n = z.num_symbols();
  const IntervalBox box = bounds(z);
  std::vector<double> center(z.center().begin(), z.center().end());
  std::vector<double> scale(d, 1.0);
  std::vector<std::pair<std::size_t, double>> fresh;
  for (std::size_t j = 0; j < d; ++j) {
    const double l = box.lower[j], u = box.upper[j];
    if (l >= 0.0) continue;
    if (u <= 0.0) {
      scale[j] = 0.0;
      center[j] = 0.0;
      continue;
    }
    const double lambda = u / (u - l);
    const double mu = -lambda * l / 2.0;
    scale[j] = lambda;
    center[j] = lambda * center[j] + mu;
    fresh.emplace_back(j, mu);
  }
  std::vector<double> gens((n + fresh.size()) * d, 0.0);
  const auto src = z.generators();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) gens[i * d + j] = scale[j] * src[i * d + j];
  }
  for (std::size_t k = 0; k < fresh.size(); ++k) gens[(n + k) * d + fresh[k].first] = fresh[k].second;
  return Zonotope(std::move(center), std::move(gens), n + fresh.size());
}

Zonotope propagate(const nn::Model& model, Zonotope z) {
  if (z.dim() != model.input_size()) {
    throw InputError("zonotope dimension " + std::to_string(z.dim()) + " does not match model input " +
                     std::to_string(model.input_size()));
  }
  for (const nn::Layer& layer : model.layers()) {
    if (const auto* d = std::get_if<nn::Dense>(&layer)) {
      z = affine(z, *d);
    } else if (const auto* c = std::get_if<nn::Conv2D>(&layer)) {
      z = conv2d_abs(z, *c);
    } else {
      z = relu_deepzono(z);
    }
  }
  return z;
}

IntervalBox bounds(const Zonotope& z) {
  const std::size_t d = z.dim();
  std::vector<double> radius(d, 0.0);
  const auto gens = z.generators();
  for (std::size_t i = 0; i < z.num_symbols(); ++i) {
    for (std::size_t j = 0; j < d; ++j) radius[j] += std::abs(gens[i * d + j]);
  }
  IntervalBox box;
  box.lower.resize(d);
  box.upper.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    box.lower[j] = z.center()[j] - radius[j];
    box.upper[j] = z.center()[j] + radius[j];
  }
  return box;
}

double pairwise_diff_upper(const Zonotope& z, std::size_t q, std::size_t y) {
  if (q >= z.dim() || y >= z.dim()) throw InputError("class index out of range");
  if (q == y) throw InputError("pairwise difference needs two distinct classes");
  const std::size_t d = z.dim();
  const auto gens = z.generators();
  double upper = z.center()[q] - z.center()[y];
  for (std::size_t i = 0; i < z.num_symbols(); ++i) upper += std::abs(gens[i * d + q] - gens[i * d + y]);
  return upper;
}

double cert_loss(const Zonotope& z, std::size_t y, DiffMode mode) {
  if (y >= z.dim()) throw InputError("class index out of range");
  double worst = 0.0;
  if (mode == DiffMode::shared_symbols) {
    for (std::size_t q = 0; q < z.dim(); ++q) {
      if (q != y) worst = std::max(worst, pairwise_diff_upper(z, q, y));
    }
  } else {
    const IntervalBox box = bounds(z);
    for (std::size_t q = 0; q < z.dim(); ++q) {
      if (q != y) worst = std::max(worst, box.upper[q] - box.lower[y]);
    }
  }
  return worst;
}

IntervalBox interval_from_linf_ball(std::span<const double> x, CertEpsilon eps, std::optional<Clip> clip) {
  return bounds(from_linf_ball(x, eps, clip));
}

IntervalBox propagate_interval(const nn::Model& model, IntervalBox box) {
  if (box.dim() != model.input_size()) throw InputError("box dimension does not match model input");
  for (const nn::Layer& layer : model.layers()) {
    if (std::holds_alternative<nn::ReLU>(layer)) {
      for (std::size_t j = 0; j < box.dim(); ++j) {
        box.lower[j] = std::max(box.lower[j], 0.0);
        box.upper[j] = std::max(box.upper[j], 0.0);
      }
      continue;
    }
    // Center/radius form: W c + b -+ |W| r.
    const std::size_t in = box.dim();
    std::vector<double> c(in), r(in);
    for (std::size_t j = 0; j < in; ++j) {
      c[j] = (box.lower[j] + box.upper[j]) / 2.0;
      r[j] = (box.upper[j] - box.lower[j]) / 2.0;
    }
    nn::Layer abs_layer = layer;
    for (double& w : nn::weights_of(abs_layer)) w = std::abs(w);
    const std::size_t out = nn::output_size(layer);
    std::vector<double> oc(out), orad(out);
    if (const auto* d = std::get_if<nn::Dense>(&layer)) {
      nn::linear_forward(*d, c, oc);
      nn::linear_forward(std::get<nn::Dense>(abs_layer), r, orad);
      for (std::size_t o = 0; o < out; ++o) oc[o] += d->bias[o];
    } else {
      const auto& cv = std::get<nn::Conv2D>(layer);
      nn::linear_forward(cv, c, oc);
      nn::linear_forward(std::get<nn::Conv2D>(abs_layer), r, orad);
      const std::size_t plane = cv.out_height() * cv.out_width();
      for (std::size_t o = 0; o < out; ++o) oc[o] += cv.bias[o / plane];
    }
    box.lower.resize(out);
    box.upper.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      box.lower[o] = oc[o] - orad[o];
      box.upper[o] = oc[o] + orad[o];
    }
  }
  return box;
}

}  // namespace certfl::zono
