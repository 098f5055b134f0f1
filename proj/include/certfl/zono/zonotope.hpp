#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "certfl/nn/layer.hpp"
#include "certfl/nn/model.hpp"

namespace certfl::zono {

// Which L-infinity radius a value denotes: the certification radius or the
// radius adversarial examples are crafted to.
enum class EpsRole { crt, adv };

struct CertEpsilon {
  double value = 0.0;
  EpsRole role = EpsRole::crt;

  static CertEpsilon crt(double v) { return {v, EpsRole::crt}; }
  static CertEpsilon adv(double v) { return {v, EpsRole::adv}; }
  void validate() const;
};

// Per-dimension closed intervals [lower_j, upper_j].
struct IntervalBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> point, double tol = 0.0) const;
};

// Affine form  x_j = c_j + sum_i g_{i,j} e_i  with shared error symbols
// e_i in [-1, 1]. Generators are stored symbol-major: generator(i) holds the
// coefficients of symbol i across every dimension, so a symbol's identity is
// its row index and survives every transformer unchanged.
class Zonotope {
 public:
  Zonotope() = default;
  Zonotope(std::vector<double> center, std::vector<double> generators, std::size_t num_symbols);

  static Zonotope point(std::span<const double> x);

  std::size_t dim() const { return center_.size(); }
  std::size_t num_symbols() const { return num_symbols_; }
  std::span<const double> center() const { return center_; }
  std::span<const double> generator(std::size_t symbol) const;
  std::span<const double> generators() const { return gens_; }
  double coefficient(std::size_t symbol, std::size_t d) const { return gens_[symbol * dim() + d]; }

  // Concrete point for an assignment of every error symbol.
  std::vector<double> instantiate(std::span<const double> eps) const;

 private:
  std::vector<double> center_;
  std::vector<double> gens_;
  std::size_t num_symbols_ = 0;
};

struct Clip {
  double lo = 0.0;
  double hi = 1.0;
};

// One fresh symbol per input dimension. With clipping the per-dimension
// interval [max(x-eps, lo), min(x+eps, hi)] is encoded exactly.
Zonotope from_linf_ball(std::span<const double> x, CertEpsilon eps, std::optional<Clip> clip = std::nullopt);

// Exact image under x -> W x + b, W is rows x cols row-major.
Zonotope affine(const Zonotope& z, std::span<const double> weight, std::size_t rows, std::size_t cols,
                std::span<const double> bias);
Zonotope affine(const Zonotope& z, const nn::Dense& layer);
Zonotope conv2d_abs(const Zonotope& z, const nn::Conv2D& layer);

// DeepZono ReLU. Dimensions with l >= 0 pass through, u <= 0 collapse to 0,
// and crossing dimensions get slope u/(u-l), offset -l*u/(2(u-l)) and one
// fresh symbol carrying the offset.
Zonotope relu_deepzono(const Zonotope& z);

Zonotope propagate(const nn::Model& model, Zonotope z);

IntervalBox bounds(const Zonotope& z);

// Upper bound of z_q - z_y on the shared-symbol difference.
double pairwise_diff_upper(const Zonotope& z, std::size_t q, std::size_t y);

enum class DiffMode {
  shared_symbols,  // interval of the difference zonotope z_q - z_y
  naive_interval,  // u_q - l_y, for comparison only
};

// max(0, max_{q != y} upper(z_q - z_y)).
double cert_loss(const Zonotope& z, std::size_t y, DiffMode mode = DiffMode::shared_symbols);

// Interval (box) domain, for comparison with zonotopes.
IntervalBox interval_from_linf_ball(std::span<const double> x, CertEpsilon eps,
                                    std::optional<Clip> clip = std::nullopt);
IntervalBox propagate_interval(const nn::Model& model, IntervalBox box);

}  // namespace certfl::zono
