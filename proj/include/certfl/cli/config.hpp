#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "certfl/adv/pgd.hpp"
#include "certfl/data/splits.hpp"
#include "certfl/data/synth.hpp"
#include "certfl/fl/simulation.hpp"
#include "certfl/nn/presets.hpp"
#include "certfl/nn/train.hpp"
#include "certfl/zono/certify.hpp"

namespace certfl::cli {

inline constexpr int kSchemaVersion = 1;

struct DatasetConfig {
  std::string kind = "synth";  // synth | idx
  data::SynthSpec synth;
  // Held-out set drawn from the same prototypes; 0 disables it.
  std::uint64_t test_seed = 0;
  std::size_t test_per_class = 0;
  std::filesystem::path images, labels;
  std::filesystem::path test_images, test_labels;
  std::size_t classes = 10;
  std::size_t limit = 0;  // keep only the first `limit` idx samples (0 = all)
};

struct ExperimentConfig {
  int version = kSchemaVersion;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output_dir;
  std::size_t threads = 1;

  DatasetConfig dataset;
  std::size_t cert_n = 200;
  std::size_t val_n = 300;

  std::string preset = "desk_mlp";
  nn::PresetOptions model;

  nn::TrainConfig train;
  bool adversarial = true;
  adv::PgdConfig pgd;       // training attack
  adv::PgdConfig eval_pgd;  // evaluation attack

  std::vector<double> certify_eps = {0.1, 0.15, 0.25};
  zono::CertifyOptions certify;
  bool per_point = true;

  fl::SimulationConfig federation;

  void validate() const;
};

// Parses YAML text. Every error names the line and column of the offending
// node; keys outside the schema are rejected. `overrides` are "a.b.c=value"
// assignments applied to the document before parsing.
ExperimentConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides = {},
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Output directory: config value, else $CERTFL_OUTPUT_DIR, else ./certfl_out.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

struct LoadedData {
  data::LabeledDataset all;
  data::DefenderSplits splits;
  std::optional<data::LabeledDataset> test;
};
LoadedData load_data(const ExperimentConfig& cfg);

nn::Model build_model(const ExperimentConfig& cfg, const Shape& input_shape, std::size_t classes);

}  // namespace certfl::cli
