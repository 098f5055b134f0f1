#include "certfl/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "certfl/error.hpp"
#include "certfl/random.hpp"

namespace certfl::nn {

Model::Model(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) throw InputError("model needs at least one layer");
  input_size_ = shape_size(input_shape_);
  if (input_shape_.empty() || input_size_ == 0) throw InputError("model input shape must be non-empty");
  std::size_t width = input_size_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (nn::input_size(layers_[i]) != width) {
      throw InputError("layer " + std::to_string(i) + " (" + std::string(kind_name(layers_[i])) + ") expects " +
                       std::to_string(nn::input_size(layers_[i])) + " inputs but receives " + std::to_string(width));
    }
    if (const auto* c = std::get_if<Conv2D>(&layers_[i])) {
      if (c->stride_height < 1 || c->stride_width < 1) throw InputError("conv2d stride must be >= 1");
      if (c->kernel.size() != c->out_channels * c->in_channels * c->kernel_height * c->kernel_width ||
          c->bias.size() != c->out_channels) {
        throw InputError("conv2d parameter shapes are inconsistent");
      }
    }
    if (const auto* d = std::get_if<Dense>(&layers_[i])) {
      if (d->weight.size() != d->in_features * d->out_features || d->bias.size() != d->out_features) {
        throw InputError("dense parameter shapes are inconsistent");
      }
    }
    offsets_.push_back(param_count_);
    param_count_ += nn::param_count(layers_[i]);
    require_finite(weights_of(layers_[i]), "model weights");
    require_finite(bias_of(layers_[i]), "model bias");
    width = output_size(layers_[i]);
  }
  if (param_count_ == 0) throw InputError("model has no parameterized layer");
  num_classes_ = width;
  if (num_classes_ < 2) throw InputError("model must emit at least two logits");
}

std::size_t Model::last_param_layer() const {
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (nn::param_count(layers_[i]) > 0) return i;
  }
  return 0;
}

std::vector<std::vector<double>> Model::trace(std::span<const double> x) const {
  if (x.size() != input_size_) {
    throw InputError("input of length " + std::to_string(x.size()) + " does not match model input " +
                     shape_string(input_shape_));
  }
  std::vector<std::vector<double>> acts;
  acts.reserve(layers_.size() + 1);
  acts.emplace_back(x.begin(), x.end());
  for (const Layer& layer : layers_) {
    const std::vector<double>& in = acts.back();
    std::vector<double> out(output_size(layer));
    if (const auto* d = std::get_if<Dense>(&layer)) {
      linear_forward(*d, in, out);
      for (std::size_t o = 0; o < out.size(); ++o) out[o] += d->bias[o];
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      linear_forward(*c, in, out);
      const std::size_t plane = c->out_height() * c->out_width();
      for (std::size_t o = 0; o < out.size(); ++o) out[o] += c->bias[o / plane];
    } else {
      for (std::size_t o = 0; o < out.size(); ++o) out[o] = in[o] > 0.0 ? in[o] : 0.0;
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

std::vector<double> Model::logits(std::span<const double> x) const {
  auto acts = trace(x);
  return std::move(acts.back());
}

std::size_t Model::predict(std::span<const double> x) const { return argmax(logits(x)); }

Tensor Model::forward(const Tensor& x) const {
  if (x.shape() == input_shape_) {
    return Tensor({num_classes_}, logits(x.data()));
  }
  Shape tail(x.shape().begin() + (x.rank() > 0 ? 1 : 0), x.shape().end());
  if (x.rank() != input_shape_.size() + 1 || tail != input_shape_) {
    throw InputError("input shape " + shape_string(x.shape()) + " does not match model input " +
                     shape_string(input_shape_));
  }
  const std::size_t batch = x.rows();
  std::vector<double> out;
  out.reserve(batch * num_classes_);
  for (std::size_t b = 0; b < batch; ++b) {
    auto z = logits(x.row(b));
    out.insert(out.end(), z.begin(), z.end());
  }
  return Tensor({batch, num_classes_}, std::move(out));
}

std::vector<double> flatten_params(const Model& model) {
  std::vector<double> flat;
  flat.reserve(model.param_count());
  for (const Layer& layer : model.layers()) {
    auto w = weights_of(layer);
    auto b = bias_of(layer);
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  return flat;
}

Model load_params(Model model, std::span<const double> params) {
  if (params.size() != model.param_count()) {
    throw InputError("parameter vector of length " + std::to_string(params.size()) + " does not match model (" +
                     std::to_string(model.param_count()) + " parameters)");
  }
  require_finite(params, "parameters");
  std::size_t k = 0;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    for (double& w : model.layer_weights(i)) w = params[k++];
    for (double& b : model.layer_bias(i)) b = params[k++];
  }
  return model;
}

void init_params(Model& model, std::uint64_t seed) {
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const Layer& layer = model.layers()[i];
    double fan_in = 0.0, fan_out = 0.0;
    if (const auto* d = std::get_if<Dense>(&layer)) {
      fan_in = static_cast<double>(d->in_features);
      fan_out = static_cast<double>(d->out_features);
    } else if (const auto* c = std::get_if<Conv2D>(&layer)) {
      const double k = static_cast<double>(c->kernel_height * c->kernel_width);
      fan_in = static_cast<double>(c->in_channels) * k;
      fan_out = static_cast<double>(c->out_channels) * k;
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(derive_seed(seed, {i}));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : model.layer_weights(i)) w = dist(rng);
    for (double& b : model.layer_bias(i)) b = 0.0;
  }
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InputError("argmax of empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace certfl::nn
