#include <doctest.h>

#include <cmath>

#include "certfl/adv/pgd.hpp"
#include "certfl/data/synth.hpp"
#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/nn/presets.hpp"
#include "certfl/zono/certify.hpp"
#include "helpers.hpp"

using namespace certfl;
using namespace certfl::adv;
using certfl::testing::uniform_vec;

namespace {

data::LabeledDataset desk_data(std::uint64_t seed, std::size_t per_class = 30) {
  data::SynthSpec s;
  s.per_class = per_class;
  s.separation = 0.8;
  s.noise = 0.05;
  s.flip_prob = 0.05;
  s.seed = seed;
  s.prototype_seed = 7;
  return data::synth_dataset(s);
}

nn::Model desk_model() {
  nn::PresetOptions o;
  o.hidden = {32};
  o.seed = 3;
  return nn::make_preset("desk_mlp", {1, 8, 8}, 10, o);
}

nn::TrainConfig desk_train() {
  nn::TrainConfig t;
  t.epochs = 15;
  t.learning_rate = 0.05;
  t.rng_seed = 1;
  return t;
}

}  // namespace

TEST_CASE("pgd config") {
  const PgdConfig c = PgdConfig::standard(0.2);
  CHECK(c.num_steps == 40);
  CHECK(c.step_size == doctest::Approx(2.5 * 0.2 / 40));
  CHECK(c.random_start);
  PgdConfig bad = c;
  bad.step_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.num_steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.attack_temperature = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pgd with zero radius returns the input") {
  const nn::Model m = certfl::testing::dense_model({4, 8, 3}, 2);
  Rng rng(1);
  const auto x = uniform_vec(rng, 4, 0, 1);
  const auto adv = pgd_attack(m, x, 0, PgdConfig::standard(0.0));
  CHECK(adv == x);
}

TEST_CASE("one pgd step on a linear model is fgsm") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto w = uniform_vec(rng, 4, -1, 1);
    const nn::Model m({2}, {nn::Dense(2, 2, w, {0, 0})});
    const auto x = uniform_vec(rng, 2, 0.2, 0.8);
    const std::size_t y = t % 2;
    PgdConfig c;
    c.eps = zono::CertEpsilon::adv(0.1);
    c.step_size = 0.1;
    c.num_steps = 1;
    c.random_start = false;
    c.fp32_masking = false;
    c.early_stop = false;
    // d CE / dx = W^T (softmax(Wx) - e_y)
    auto p = nn::softmax_t(m.logits(x), 1.0);
    p[y] -= 1.0;
    const auto adv = pgd_attack(m, x, y, c);
    for (std::size_t j = 0; j < 2; ++j) {
      const double g = w[j] * p[0] + w[2 + j] * p[1];
      const double expect = x[j] + 0.1 * (g > 0 ? 1.0 : -1.0);
      CHECK(std::abs(adv[j] - expect) <= 1e-15);
    }
  }
}

TEST_CASE("pgd output respects the ball and the domain exactly") {
  const nn::Model m = certfl::testing::dense_model({16, 16, 4}, 5);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto x = uniform_vec(rng, 16, 0, 1);
    PgdConfig c = PgdConfig::standard(std::uniform_real_distribution<double>(0.01, 0.5)(rng), 10);
    c.rng_seed = static_cast<std::uint64_t>(t);
    c.early_stop = false;
    c.step_size = 0.3;
    const auto adv = pgd_attack(m, x, t % 4, c);
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(std::abs(adv[j] - x[j]) <= c.eps.value);
      CHECK(adv[j] >= 0.0);
      CHECK(adv[j] <= 1.0);
    }
  }
}

TEST_CASE("pgd rejects bad inputs") {
  const nn::Model m = certfl::testing::dense_model({4, 3}, 1);
  CHECK_THROWS_AS(pgd_attack(m, std::vector<double>(5, 0.5), 0, PgdConfig::standard(0.1)), InputError);
  CHECK_THROWS_AS(pgd_attack(m, std::vector<double>(4, 0.5), 3, PgdConfig::standard(0.1)), InputError);
  CHECK_THROWS_AS(adv_accuracy(m, data::LabeledDataset{}, PgdConfig::standard(0.1)), ConfigError);
}

TEST_CASE("adversarial accuracy on desk data") {
  const auto train_set = desk_data(1);
  const auto test_set = desk_data(2);
  const nn::Model plain = nn::train(desk_model(), train_set, desk_train());
  const double clean = nn::accuracy(plain, test_set);

  SUBCASE("zero radius equals clean accuracy") {
    CHECK(adv_accuracy(plain, test_set, PgdConfig::standard(0.0)) == clean);
  }
  SUBCASE("an undefended model loses accuracy") {
    CHECK(adv_accuracy(plain, test_set, PgdConfig::standard(0.25)) < clean);
  }
  SUBCASE("non-increasing in the radius") {
    double prev = 1.0;
    for (double e : {0.05, 0.15, 0.3}) {
      const double a = adv_accuracy(plain, test_set, PgdConfig::standard(e));
      CHECK(a <= prev);
      prev = a;
    }
  }
  SUBCASE("pgd training beats plain training at its radius") {
    PgdConfig p = PgdConfig::standard(0.25, 10);
    p.rng_seed = 4;
    const nn::Model robust = pgd_train(desk_model(), train_set, desk_train(), p);
    const PgdConfig eval = PgdConfig::standard(0.25);
    CHECK(adv_accuracy(robust, test_set, eval) > adv_accuracy(plain, test_set, eval));
    CHECK(nn::flatten_params(pgd_train(desk_model(), train_set, desk_train(), p)) == nn::flatten_params(robust));
  }
  SUBCASE("zero radius pgd training is plain training") {
    CHECK(pgd_train(desk_model(), train_set, desk_train(), PgdConfig::standard(0.0)) == plain);
  }
}

TEST_CASE("certified points survive pgd") {
  const auto train_set = desk_data(1);
  const auto test_set = desk_data(3, 10);
  PgdConfig p = PgdConfig::standard(0.2, 10);
  const nn::Model m = pgd_train(desk_model(), train_set, desk_train(), p);
  std::size_t certified = 0, flipped = 0;
  for (double e : {0.05, 0.1, 0.15}) {
    const auto stats = zono::certified_stats(m, test_set, zono::CertEpsilon::crt(e));
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      if (!stats.verdicts[i].certified) continue;
      ++certified;
      for (double T : {1.0, 100.0}) {
        PgdConfig a = PgdConfig::standard(e, 100);
        a.attack_temperature = T;
        a.rng_seed = i;
        a.fp32_masking = false;
        flipped += m.predict(pgd_attack(m, test_set.input(i), test_set.label(i), a)) != test_set.label(i);
      }
    }
  }
  CHECK(certified > 0);
  CHECK(flipped == 0);
}
