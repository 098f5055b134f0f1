#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "certfl/adv/pgd.hpp"
#include "certfl/attacks/adaptive.hpp"
#include "certfl/attacks/backdoor.hpp"
#include "certfl/attacks/distill.hpp"
#include "certfl/data/splits.hpp"
#include "certfl/fl/gate.hpp"
#include "certfl/fl/population.hpp"
#include "certfl/nn/model.hpp"
#include "certfl/nn/train.hpp"

namespace certfl::fl {

enum class AttackKind { none, backdoor, distill, adaptive };
const char* attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

// When the coordinated attackers strike: at least min_malicious of them in
// the quorum and the global model near convergence, i.e. its clean accuracy
// is >= convergence_fraction times the value `lookback` rounds earlier and
// >= accuracy_floor. Rounds before min_round are never attacked.
struct AttackTrigger {
  std::size_t min_round = 0;
  std::size_t min_malicious = 3;
  double convergence_fraction = 0.95;
  std::size_t lookback = 5;
  double accuracy_floor = 0.0;
};

struct AttackPlan {
  AttackKind kind = AttackKind::none;
  AttackTrigger trigger;
  attacks::BackdoorSpec backdoor;
  nn::TrainConfig backdoor_train;
  attacks::DistillSpec distill;
  // Used by the adaptive attack on top of distillation; the subset is taken
  // from the defender's certification set.
  attacks::AdaptiveSpec adaptive;
};

struct SimulationConfig {
  std::size_t num_clients = 20;
  std::size_t num_malicious = 0;
  std::size_t quorum_size = 5;
  std::size_t rounds = 10;
  std::uint64_t seed = 0;

  nn::TrainConfig client_train;
  adv::PgdConfig client_pgd;  // honest clients' adversarial training
  adv::PgdConfig eval_pgd;    // defender's validation attack

  GateThresholds gate;
  GateMode gate_mode = GateMode::full;
  // Rounds 1..gate_warmup_rounds are accepted unconditionally and the last
  // of them sets the gate baseline.
  std::size_t gate_warmup_rounds = 1;

  AttackPlan attack;
  std::optional<std::filesystem::path> checkpoint_dir;

  void validate() const;
};

struct RoundRecord {
  std::size_t round_index = 0;
  std::vector<std::size_t> quorum;
  std::size_t num_malicious_in_quorum = 0;
  bool attack_round = false;
  RoundMetrics metrics;
  bool accepted = true;
  std::string reason;  // first failed gate check, or "baseline" / "warmup"
  std::vector<std::string> failed;
  std::string model_hash;  // evaluated candidate
  double wall_seconds = 0.0;
};

struct SimulationResult {
  std::vector<RoundRecord> records;  // records[0] is the evaluated initial model
  nn::Model final_model;
  RoundMetrics final_metrics;
};

// Evaluates a model the way the defender does: clean and PGD accuracy on
// the validation split, certified accuracy and mean cert loss on the
// certification split (zero when it is empty).
RoundMetrics evaluate_model(const nn::Model& model, const data::DefenderSplits& splits, const GateThresholds& gate,
                            const adv::PgdConfig& eval_pgd);

using RoundCallback = std::function<void(const RoundRecord&)>;

// Runs the round protocol from `initial`. Each round: sample a quorum, let
// every benign client (and every malicious client while the attack is not
// triggered) PGD-train the global model on its shard, let triggered
// attackers submit one shared attack model, take the coordinate-wise median,
// evaluate and gate it. Rejected rounds leave the global model untouched.
SimulationResult run_simulation(const nn::Model& initial, const data::DefenderSplits& splits,
                                const SimulationConfig& config, const RoundCallback& on_round = {});

}  // namespace certfl::fl
