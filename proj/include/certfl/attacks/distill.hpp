#pragma once

#include <cstdint>
#include <vector>

#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/nn/train.hpp"

namespace certfl::attacks {

struct DistillSpec {
  double temperature = 100.0;
  nn::TrainConfig teacher_cfg;
  nn::TrainConfig student_cfg;
  // Seeds the fresh initialization of teacher and student.
  std::uint64_t init_seed = 0;

  void validate() const;
};

// softmax_t(f(x), T) for every sample.
std::vector<std::vector<double>> soft_labels(const nn::Model& model, const data::LabeledDataset& data,
                                             double temperature);

// Defensive distillation. Teacher and student take the architecture of
// `architecture`, are freshly initialized with the last layer multiplied by
// T and trained at temperature T (the cfg temperatures are overridden). The
// teacher learns the hard labels, the student the teacher's soft labels at T.
// The returned student is used at T = 1, so its logits are about T times
// those of a normally trained network.
nn::Model distill(const nn::Model& architecture, const data::LabeledDataset& attacker_data,
                  const DistillSpec& spec);

// Multiplies the last parameterized layer (weights and bias) by factor.
void scale_last_layer_params(nn::Model& model, double factor);

}  // namespace certfl::attacks
