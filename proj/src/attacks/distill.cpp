#include "certfl/attacks/distill.hpp"

#include <cmath>

#include "certfl/error.hpp"
#include "certfl/nn/backprop.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"

namespace certfl::attacks {

void DistillSpec::validate() const {
  if (!(temperature >= 1.0) || !std::isfinite(temperature)) throw ConfigError("distillation temperature must be >= 1");
  teacher_cfg.validate();
  student_cfg.validate();
}

std::vector<std::vector<double>> soft_labels(const nn::Model& model, const data::LabeledDataset& data,
                                             double temperature) {
  std::vector<std::vector<double>> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) { out[i] = nn::softmax_t(model.logits(data.input(i)), temperature); });
  return out;
}

void scale_last_layer_params(nn::Model& model, double factor) {
  const std::size_t last = model.last_param_layer();
  for (double& w : model.layer_weights(last)) w *= factor;
  for (double& b : model.layer_bias(last)) b *= factor;
}

nn::Model distill(const nn::Model& architecture, const data::LabeledDataset& attacker_data, const DistillSpec& spec) {
  if (attacker_data.empty()) throw ConfigError("attacker holds no data");
  spec.validate();
  const double t = spec.temperature;

  nn::Model teacher = architecture;
  nn::init_params(teacher, derive_seed(spec.init_seed, {1}));
  scale_last_layer_params(teacher, t);
  nn::TrainConfig tcfg = spec.teacher_cfg;
  tcfg.temperature = t;
  teacher = nn::train(std::move(teacher), attacker_data, tcfg);

  const auto targets = soft_labels(teacher, attacker_data, t);

  nn::Model student = architecture;
  nn::init_params(student, derive_seed(spec.init_seed, {2}));
  scale_last_layer_params(student, t);
  nn::TrainConfig scfg = spec.student_cfg;
  scfg.temperature = t;
  return nn::train_soft(std::move(student), attacker_data, targets, scfg);
}

}  // namespace certfl::attacks
