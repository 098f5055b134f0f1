#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "certfl/data/dataset.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/zono/certify.hpp"

namespace certfl::attacks {

enum class MatchMode { accuracy_only, accuracy_and_loss };

struct AdaptiveSpec {
  std::size_t cert_subset_size = 0;
  zono::CertEpsilon target_eps = zono::CertEpsilon::crt(0.1);
  zono::CertEpsilon start_eps = zono::CertEpsilon::crt(0.1);
  double eps_step = 0.01;
  MatchMode match_mode = MatchMode::accuracy_only;
  // Certified fraction of the subset required to advance the schedule.
  double target_certified_fraction = 1.0;
  // Reference mean cert loss of an honest model (accuracy_and_loss only).
  double target_mean_loss = 0.0;
  double loss_band_fraction = 0.1;

  // Temperature the distilled model was trained at. Cert losses are taken on
  // logits / temperature and the distillation term is cross-entropy at it.
  double temperature = 1.0;
  double w_cert = 1.0;
  double w_distill = 1.0;
  double margin = 0.05;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t max_iterations = 2000;
  double max_wall_seconds = 600.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct AdaptiveLogEntry {
  std::size_t iteration = 0;
  double eps = 0.0;
  std::size_t certified = 0;
  double mean_cert_loss = 0.0;  // raw logits
  double distill_loss = 0.0;
  double wall_seconds = 0.0;
};

struct AdaptiveResult {
  nn::Model model;
  bool converged = false;
  // Largest radius at which the subset matched; nullopt if none did.
  std::optional<double> eps_reached;
  std::size_t points_matched = 0;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  std::vector<AdaptiveLogEntry> log;
};

// Refines a distilled model until the first cert_subset_size points of the
// defender's certification set are certified, growing the radius from
// start_eps to target_eps in eps_step increments each time the subset
// matches. Each iteration takes one SGD step on
//   w_cert * mean cert_loss(subset) + w_distill * CE_T(maintenance batch)
// where the maintenance targets are the input model's own soft labels at T on
// `maintenance` (the subset itself when absent). Stops at target_eps, after
// max_iterations steps or after max_wall_seconds; the best model so far is
// returned, flagged unconverged when the target was not reached. Results
// are reproducible whenever the iteration budget binds before the clock.
AdaptiveResult adaptive_attack(const nn::Model& distilled, const data::LabeledDataset& cert_set,
                               const AdaptiveSpec& spec, const data::LabeledDataset* maintenance = nullptr);

}  // namespace certfl::attacks
