#pragma once

#include <cstdint>
#include <string>

#include "certfl/data/dataset.hpp"

namespace certfl::data {

// Class blobs around random two-level prototypes. Every class c draws a
// prototype with entries 0.5 +- separation / 2; a sample copies its class
// prototype, mirrors each entry around 0.5 with probability flip_prob, adds
// N(0, noise^2) and clips to [0, 1]. shape is either [features] or [C, H, W].
struct SynthSpec {
  std::size_t classes = 10;
  Shape shape = {1, 8, 8};
  std::size_t per_class = 100;
  double separation = 0.6;
  double noise = 0.1;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;
  // Seed of the class prototypes; draw a held-out set from the same
  // distribution by changing only `seed`.
  std::uint64_t prototype_seed = 0;
  std::string name = "synth";

  void validate() const;
};

// Samples are shuffled so every prefix mixes all classes.
LabeledDataset synth_dataset(const SynthSpec& spec);

}  // namespace certfl::data
