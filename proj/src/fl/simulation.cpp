#include "certfl/fl/simulation.hpp"

#include <chrono>
#include <cstdio>

#include "certfl/error.hpp"
#include "certfl/fl/aggregate.hpp"
#include "certfl/nn/serialize.hpp"
#include "certfl/parallel.hpp"
#include "certfl/random.hpp"
#include "certfl/zono/certify.hpp"

namespace certfl::fl {

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::backdoor: return "backdoor";
    case AttackKind::distill: return "distill";
    case AttackKind::adaptive: return "adaptive";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::none;
  if (name == "backdoor") return AttackKind::backdoor;
  if (name == "distill") return AttackKind::distill;
  if (name == "adaptive") return AttackKind::adaptive;
  throw ConfigError("unknown attack '" + name + "' (expected none, backdoor, distill or adaptive)");
}

void SimulationConfig::validate() const {
  if (num_clients == 0) throw ConfigError("simulation needs at least one client");
  if (num_malicious > num_clients) throw ConfigError("num_malicious exceeds num_clients");
  if (quorum_size == 0 || quorum_size > num_clients) throw ConfigError("quorum_size must be in [1, num_clients]");
  client_train.validate();
  client_pgd.validate();
  eval_pgd.validate();
  gate.validate();
  if (attack.kind != AttackKind::none) {
    if (attack.trigger.min_malicious == 0 || attack.trigger.min_malicious > quorum_size) {
      throw ConfigError("attack trigger min_malicious must be in [1, quorum_size]");
    }
  }
  if (attack.kind == AttackKind::backdoor) {
    attack.backdoor.validate(client_pgd.eps.value);
    attack.backdoor_train.validate();
  }
  if (attack.kind == AttackKind::distill || attack.kind == AttackKind::adaptive) attack.distill.validate();
  if (attack.kind == AttackKind::adaptive) attack.adaptive.validate();
}

RoundMetrics evaluate_model(const nn::Model& model, const data::DefenderSplits& splits, const GateThresholds& gate,
                            const adv::PgdConfig& eval_pgd) {
  RoundMetrics m;
  m.normal_acc = nn::accuracy(model, splits.validation_set);
  adv::PgdConfig pgd = eval_pgd;
  pgd.eps = zono::CertEpsilon::adv(gate.eps_adv.value);
  m.adv_acc = adv::adv_accuracy(model, splits.validation_set, pgd);
  if (!splits.cert_set.empty()) {
    const auto stats = zono::certified_stats(model, splits.cert_set, gate.eps_crt);
    m.certified_acc = stats.certified_accuracy;
    m.mean_cert_loss = stats.mean_cert_loss;
  }
  return m;
}

namespace {

bool near_convergence(const std::vector<double>& history, const AttackTrigger& t) {
  if (history.size() <= t.lookback) return false;
  const double now = history.back();
  const double before = history[history.size() - 1 - t.lookback];
  return now >= t.convergence_fraction * before && now >= t.accuracy_floor;
}

nn::Model craft_attack(const nn::Model& global, const data::LabeledDataset& pooled,
                       const data::LabeledDataset& cert_set, const SimulationConfig& cfg, std::uint64_t round_seed) {
  const AttackPlan& plan = cfg.attack;
  switch (plan.kind) {
    case AttackKind::backdoor: {
      nn::TrainConfig tc = plan.backdoor_train;
      tc.rng_seed = derive_seed(round_seed, {0x4244});
      return attacks::backdoor_attack(global, pooled, plan.backdoor, tc, cfg.client_pgd);
    }
    case AttackKind::distill:
    case AttackKind::adaptive: {
      attacks::DistillSpec ds = plan.distill;
      ds.teacher_cfg.rng_seed = derive_seed(round_seed, {0x5445});
      ds.student_cfg.rng_seed = derive_seed(round_seed, {0x5354});
      nn::Model distilled = attacks::distill(global, pooled, ds);
      if (plan.kind == AttackKind::distill) return distilled;
      attacks::AdaptiveSpec as = plan.adaptive;
      as.temperature = plan.distill.temperature;
      return attacks::adaptive_attack(distilled, cert_set, as, &pooled).model;
    }
    case AttackKind::none: break;
  }
  return global;
}

}  // namespace

SimulationResult run_simulation(const nn::Model& initial, const data::DefenderSplits& splits,
                                const SimulationConfig& config, const RoundCallback& on_round) {
  config.validate();
  if (splits.validation_set.empty()) throw ConfigError("the defender's validation split is empty");
  if (splits.cert_set.empty() && config.gate_mode == GateMode::full) {
    throw ConfigError("the full gate needs a non-empty certification split");
  }
  if (splits.client_pool.sample_size() != initial.input_size()) {
    throw ConfigError("client data does not match the model input");
  }
  const ClientPopulation pop =
      ClientPopulation::make(splits.client_pool.size(), config.num_clients, config.num_malicious, config.seed);
  std::vector<data::LabeledDataset> shards(pop.num_clients);
  for (std::size_t c = 0; c < pop.num_clients; ++c) {
    shards[c] = splits.client_pool.select(pop.shards[c], "client" + std::to_string(c));
  }
  std::vector<std::size_t> pooled_idx;
  for (std::size_t c : pop.malicious_ids()) pooled_idx.insert(pooled_idx.end(), pop.shards[c].begin(), pop.shards[c].end());
  data::LabeledDataset pooled;
  if (!pooled_idx.empty()) pooled = splits.client_pool.select(pooled_idx, "attacker_pool");

  if (config.checkpoint_dir) std::filesystem::create_directories(*config.checkpoint_dir);
  auto checkpoint = [&](const nn::Model& m, std::size_t round) {
    if (!config.checkpoint_dir) return;
    char name[32];
    std::snprintf(name, sizeof name, "round_%04zu.cfl", round);
    nn::save_model(m, *config.checkpoint_dir / name);
  };

  SimulationResult result;
  nn::Model global = initial;
  const auto t_start = std::chrono::steady_clock::now();
  auto since = [](auto t0) { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  RoundRecord base;
  base.round_index = 0;
  base.metrics = evaluate_model(global, splits, config.gate, config.eval_pgd);
  base.reason = "baseline";
  base.model_hash = nn::model_hash(global);
  base.wall_seconds = since(t_start);
  RoundMetrics accepted_metrics = base.metrics;
  std::vector<double> acc_history{base.metrics.normal_acc};
  checkpoint(global, 0);
  if (on_round) on_round(base);
  result.records.push_back(std::move(base));

  for (std::size_t r = 1; r <= config.rounds; ++r) {
    const auto t_round = std::chrono::steady_clock::now();
    const std::uint64_t round_seed = derive_seed(config.seed, {0x524f554e44, r});
    RoundRecord rec;
    rec.round_index = r;
    rec.quorum = sample_quorum(pop, config.quorum_size, derive_seed(round_seed, {0x51}));
    rec.num_malicious_in_quorum = count_malicious(pop, rec.quorum);
    rec.attack_round = config.attack.kind != AttackKind::none && r >= config.attack.trigger.min_round &&
                       rec.num_malicious_in_quorum >= config.attack.trigger.min_malicious &&
                       near_convergence(acc_history, config.attack.trigger);

    std::optional<nn::Model> attack_model;
    if (rec.attack_round) attack_model = craft_attack(global, pooled, splits.cert_set, config, round_seed);

    std::vector<ClientUpdate> updates(rec.quorum.size());
    parallel_for(rec.quorum.size(), [&](std::size_t k) {
      const std::size_t id = rec.quorum[k];
      updates[k].client_id = id;
      updates[k].is_malicious = pop.malicious[id];
      if (attack_model && pop.malicious[id]) {
        updates[k].params = nn::flatten_params(*attack_model);
        return;
      }
      nn::TrainConfig tc = config.client_train;
      tc.rng_seed = derive_seed(round_seed, {0x434c, id});
      updates[k].params = nn::flatten_params(adv::pgd_train(global, shards[id], tc, config.client_pgd));
    });
    const nn::Model candidate = nn::load_params(global, median_aggregate(updates));
    rec.metrics = evaluate_model(candidate, splits, config.gate, config.eval_pgd);
    rec.model_hash = nn::model_hash(candidate);

    if (r <= config.gate_warmup_rounds) {
      rec.reason = "warmup";
    } else {
      const GateVerdict v = defender_gate(rec.metrics, accepted_metrics, config.gate, config.gate_mode);
      rec.accepted = v.accepted;
      rec.reason = v.reason;
      rec.failed = v.failed;
    }
    if (rec.accepted) {
      global = candidate;
      accepted_metrics = rec.metrics;
      checkpoint(global, r);
    }
    acc_history.push_back(accepted_metrics.normal_acc);
    rec.wall_seconds = since(t_round);
    if (on_round) on_round(rec);
    result.records.push_back(std::move(rec));
  }
  result.final_model = std::move(global);
  result.final_metrics = accepted_metrics;
  return result;
}

}  // namespace certfl::fl
