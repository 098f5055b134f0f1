#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "certfl/cli/config.hpp"

namespace certfl::cli {

using Json = nlohmann::ordered_json;

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

// Each command writes its artifacts under out_dir and returns the path of
// its report. Progress lines go to `log`.
//
//   train     model.cfl + train_report.json
//   certify   certify_report.jsonl
//   simulate  rounds.jsonl (+ final_model.cfl, checkpoints/)
//   attack    attack_model.cfl + attack_log.jsonl
std::filesystem::path cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
std::filesystem::path cmd_certify(const ExperimentConfig& cfg, const std::filesystem::path& model_path,
                                  const std::filesystem::path& out_dir, std::ostream& log);
std::filesystem::path cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                   std::ostream& log, const std::filesystem::path& initial_model = {});
std::filesystem::path cmd_attack(const ExperimentConfig& cfg, const std::filesystem::path& model_path,
                                 const std::filesystem::path& out_dir, std::ostream& log);

// Re-checks a report's internal consistency; returns the problems found.
std::vector<std::string> validate_report(const std::filesystem::path& report);

// Reads a .json or .jsonl report into a list of records.
std::vector<Json> read_report(const std::filesystem::path& report);

// Copy of a record tree with every "wall_seconds" field removed; the
// remaining numerics are a pure function of config and seeds.
Json strip_wall_time(const Json& record);

}  // namespace certfl::cli
