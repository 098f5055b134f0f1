#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "certfl/nn/model.hpp"
#include "certfl/random.hpp"

namespace certfl::testing {

inline nn::Model dense_model(std::vector<std::size_t> widths, std::uint64_t seed) {
  std::vector<nn::Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(nn::Dense(widths[i], widths[i + 1]));
    if (i + 2 < widths.size()) layers.emplace_back(nn::ReLU{widths[i + 1]});
  }
  nn::Model m({widths.front()}, std::move(layers));
  nn::init_params(m, seed);
  return m;
}

inline std::vector<double> uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace certfl::testing
