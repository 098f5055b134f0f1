#include "certfl/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "certfl/attacks/adaptive.hpp"
#include "certfl/attacks/backdoor.hpp"
#include "certfl/attacks/distill.hpp"
#include "certfl/error.hpp"
#include "certfl/fl/population.hpp"
#include "certfl/nn/serialize.hpp"

namespace certfl::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  void write(const Json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json splits_json(const data::DefenderSplits& s) {
  const auto& r = s.ranges;
  return Json{{"cert", {r.cert_begin, r.cert_end}}, {"validation", {r.val_begin, r.val_end}},
              {"client_pool", {r.pool_begin, r.pool_end}}};
}

Json metrics_json(const fl::RoundMetrics& m) {
  return Json{{"normal_acc", m.normal_acc},
              {"adv_acc", m.adv_acc},
              {"certified_acc", m.certified_acc},
              {"mean_cert_loss", m.mean_cert_loss}};
}

Json pgd_json(const adv::PgdConfig& p) {
  return Json{{"eps", p.eps.value},         {"steps", p.num_steps},
              {"step_size", p.step_size},   {"random_start", p.random_start},
              {"temperature", p.attack_temperature}, {"fp32_masking", p.fp32_masking}};
}

const data::LabeledDataset& eval_set(const LoadedData& d) { return d.test ? *d.test : d.splits.validation_set; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace

Json strip_wall_time(const Json& record) {
  if (record.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : record.items()) {
      if (k == "wall_seconds") continue;
      out[k] = strip_wall_time(v);
    }
    return out;
  }
  if (record.is_array()) {
    Json out = Json::array();
    for (const auto& v : record) out.push_back(strip_wall_time(v));
    return out;
  }
  return record;
}

fs::path cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const auto t0 = Clock::now();
  ensure_dir(out_dir);
  const LoadedData d = load_data(cfg);
  nn::Model model = build_model(cfg, d.all.sample_shape(), d.all.num_classes());
  const auto& train_set = d.splits.client_pool;
  log << "training " << cfg.preset << " on " << train_set.size() << " points ("
      << (cfg.adversarial ? "PGD" : "plain") << ", " << cfg.train.epochs << " epochs)\n";
  model = cfg.adversarial ? adv::pgd_train(std::move(model), train_set, cfg.train, cfg.pgd)
                          : nn::train(std::move(model), train_set, cfg.train);
  const fs::path model_path = out_dir / "model.cfl";
  nn::save_model(model, model_path);

  Json report{{"report", "train"}, {"schema", kSchemaVersion}, {"dataset", d.all.name()},
              {"splits", splits_json(d.splits)}, {"preset", cfg.preset}, {"adversarial", cfg.adversarial},
              {"model_path", model_path.filename().string()}, {"model_hash", nn::model_hash(model)}};
  Json metrics{{"train_acc", nn::accuracy(model, train_set)},
               {"validation_acc", nn::accuracy(model, d.splits.validation_set)},
               {"validation_adv_acc", adv::adv_accuracy(model, d.splits.validation_set, cfg.eval_pgd)},
               {"eval_pgd", pgd_json(cfg.eval_pgd)}};
  if (!d.splits.cert_set.empty()) {
    Json rows = Json::array();
    for (double e : cfg.certify_eps) {
      const auto s = zono::certified_stats(model, d.splits.cert_set, zono::CertEpsilon::crt(e), cfg.certify);
      rows.push_back({{"eps", e}, {"certified_acc", s.certified_accuracy}, {"mean_cert_loss", s.mean_cert_loss}});
    }
    metrics["certified"] = rows;
  }
  report["metrics"] = metrics;
  report["wall_seconds"] = since(t0);
  const fs::path report_path = out_dir / "train_report.json";
  write_json(report_path, report);
  log << "validation acc " << metrics["validation_acc"].get<double>() << ", adv acc "
      << metrics["validation_adv_acc"].get<double>() << "; model " << model_path.string() << '\n';
  return report_path;
}

fs::path cmd_certify(const ExperimentConfig& cfg, const fs::path& model_path, const fs::path& out_dir,
                     std::ostream& log) {
  const auto t0 = Clock::now();
  ensure_dir(out_dir);
  const LoadedData d = load_data(cfg);
  const nn::Model model = nn::load_model(model_path);
  const auto& set = d.splits.cert_set;
  if (set.empty()) throw ConfigError("certify needs a non-empty certification split (splits.cert)");
  if (set.sample_size() != model.input_size()) throw ConfigError("model input does not match the dataset");

  const fs::path path = out_dir / "certify_report.jsonl";
  JsonlWriter w(path);
  w.write({{"report", "certify"}, {"schema", kSchemaVersion}, {"dataset", set.name()}, {"model_hash", nn::model_hash(model)},
           {"eps", cfg.certify_eps}, {"cert_points", set.size()}, {"splits", splits_json(d.splits)},
           {"clip", cfg.certify.clip.has_value()},
           {"diff_mode", cfg.certify.diff_mode == zono::DiffMode::shared_symbols ? "shared_symbols" : "naive_interval"},
           {"per_point", cfg.per_point}});
  const double clean = nn::accuracy(model, set);
  log << std::setw(8) << "eps" << std::setw(16) << "certified_acc" << std::setw(16) << "mean_cert_loss" << '\n';
  for (double e : cfg.certify_eps) {
    const auto s = zono::certified_stats(model, set, zono::CertEpsilon::crt(e), cfg.certify);
    if (cfg.per_point) {
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& v = s.verdicts[i];
        w.write({{"type", "point"}, {"eps", e}, {"index", i}, {"label", set.label(i)},
                 {"predicted", v.predicted_label}, {"certified", v.certified}, {"cert_loss", v.cert_loss},
                 {"lower", v.logit_bounds.lower}, {"upper", v.logit_bounds.upper}});
      }
    }
    w.write({{"type", "row"}, {"eps", e}, {"certified_acc", s.certified_accuracy},
             {"mean_cert_loss", s.mean_cert_loss}, {"clean_acc", clean}});
    log << std::setw(8) << e << std::setw(16) << s.certified_accuracy << std::setw(16) << s.mean_cert_loss << '\n';
  }
  w.write({{"type", "end"}, {"wall_seconds", since(t0)}});
  return path;
}

fs::path cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log,
                      const fs::path& initial_model) {
  const auto t0 = Clock::now();
  ensure_dir(out_dir);
  const LoadedData d = load_data(cfg);
  nn::Model initial = initial_model.empty() ? build_model(cfg, d.all.sample_shape(), d.all.num_classes())
                                            : nn::load_model(initial_model);
  fl::SimulationConfig sim = cfg.federation;
  if (sim.checkpoint_dir) sim.checkpoint_dir = out_dir / *sim.checkpoint_dir;

  const fs::path path = out_dir / "rounds.jsonl";
  JsonlWriter w(path);
  const auto& g = sim.gate;
  const std::size_t k = sim.attack.trigger.min_malicious;
  w.write({{"report", "simulate"}, {"schema", kSchemaVersion}, {"dataset", d.all.name()},
           {"splits", splits_json(d.splits)}, {"num_clients", sim.num_clients}, {"num_malicious", sim.num_malicious},
           {"quorum_size", sim.quorum_size}, {"rounds", sim.rounds}, {"warmup_rounds", sim.gate_warmup_rounds},
           {"gate", {{"mode", fl::gate_mode_name(sim.gate_mode)}, {"acc_retain_fraction", g.acc_retain_fraction},
                     {"loss_band_fraction", g.loss_band_fraction}, {"eps_crt", g.eps_crt.value},
                     {"eps_adv", g.eps_adv.value}}},
           {"attack", fl::attack_kind_name(sim.attack.kind)}, {"trigger_min_malicious", k},
           {"initial_model_hash", nn::model_hash(initial)}});

  const auto res = fl::run_simulation(initial, d.splits, sim, [&](const fl::RoundRecord& r) {
    w.write({{"type", "round"}, {"round", r.round_index}, {"quorum", r.quorum},
             {"num_malicious_in_quorum", r.num_malicious_in_quorum}, {"attack_round", r.attack_round},
             {"metrics", metrics_json(r.metrics)}, {"accepted", r.accepted}, {"reason", r.reason},
             {"failed", r.failed}, {"model_hash", r.model_hash}, {"wall_seconds", r.wall_seconds}});
    log << "round " << std::setw(3) << r.round_index << "  malicious " << r.num_malicious_in_quorum
        << (r.attack_round ? " ATTACK" : "       ") << "  acc " << std::fixed << std::setprecision(3)
        << r.metrics.normal_acc << " adv " << r.metrics.adv_acc << " cert " << r.metrics.certified_acc << " loss "
        << std::setprecision(4) << r.metrics.mean_cert_loss << "  " << (r.accepted ? "accepted" : "REJECTED")
        << (r.reason.empty() ? "" : " (" + r.reason + ")") << std::defaultfloat << '\n';
  });
  nn::save_model(res.final_model, out_dir / "final_model.cfl");

  std::size_t accepted = 0, attacks = 0, attacks_rejected = 0, at_least_k = 0;
  for (std::size_t i = 1; i < res.records.size(); ++i) {
    const auto& r = res.records[i];
    accepted += r.accepted ? 1 : 0;
    attacks += r.attack_round ? 1 : 0;
    attacks_rejected += r.attack_round && !r.accepted ? 1 : 0;
    at_least_k += r.num_malicious_in_quorum >= k ? 1 : 0;
  }
  const std::size_t rounds = res.records.size() - 1;
  const double expected = fl::hypergeometric_tail(sim.num_clients, sim.num_malicious, sim.quorum_size, k);
  const double observed = rounds ? static_cast<double>(at_least_k) / static_cast<double>(rounds) : 0.0;
  const double se = rounds ? std::sqrt(expected * (1.0 - expected) / static_cast<double>(rounds)) : 0.0;
  w.write({{"type", "summary"}, {"rounds", rounds}, {"accepted", accepted}, {"rejected", rounds - accepted},
           {"attack_rounds", attacks}, {"attack_rounds_rejected", attacks_rejected},
           {"final_metrics", metrics_json(res.final_metrics)}, {"final_model_hash", nn::model_hash(res.final_model)},
           {"quorum_stats", {{"min_malicious", k}, {"observed_fraction", observed}, {"expected_fraction", expected},
                             {"standard_error", se}}},
           {"wall_seconds", since(t0)}});
  log << "rounds " << rounds << ", accepted " << accepted << ", attack rounds " << attacks << " (rejected "
      << attacks_rejected << "); P(>=" << k << " malicious) observed " << observed << " expected " << expected
      << '\n';
  return path;
}

fs::path cmd_attack(const ExperimentConfig& cfg, const fs::path& model_path, const fs::path& out_dir,
                    std::ostream& log) {
  const auto t0 = Clock::now();
  ensure_dir(out_dir);
  const LoadedData d = load_data(cfg);
  const nn::Model input = nn::load_model(model_path);
  const auto& plan = cfg.federation.attack;
  const auto& pool = d.splits.client_pool;
  const auto& heldout = eval_set(d);

  const fs::path path = out_dir / "attack_log.jsonl";
  JsonlWriter w(path);
  w.write({{"report", "attack"}, {"schema", kSchemaVersion}, {"kind", fl::attack_kind_name(plan.kind)},
           {"dataset", d.all.name()}, {"splits", splits_json(d.splits)}, {"input_model_hash", nn::model_hash(input)},
           {"eval_set", heldout.name()}});

  nn::Model out = input;
  Json summary{{"type", "summary"}};
  const double temperature = plan.distill.temperature;
  auto robustness = [&](const nn::Model& m) {
    adv::PgdConfig scaled = cfg.eval_pgd;
    scaled.attack_temperature = temperature;
    return Json{{"clean_acc", nn::accuracy(m, heldout)},
                {"adv_acc", adv::adv_accuracy(m, heldout, cfg.eval_pgd)},
                {"adv_acc_temperature_scaled", adv::adv_accuracy(m, heldout, scaled)},
                {"attack_temperature", temperature}};
  };
  switch (plan.kind) {
    case fl::AttackKind::none:
      throw ConfigError("attack.kind is none; nothing to run");
    case fl::AttackKind::backdoor: {
      out = attacks::backdoor_attack(input, pool, plan.backdoor, plan.backdoor_train, cfg.pgd);
      const double asr = attacks::trigger_success_rate(out, heldout, plan.backdoor);
      w.write({{"type", "iteration"}, {"iteration", 0}, {"trigger_success_rate", asr},
               {"clean_acc", nn::accuracy(out, heldout)}, {"wall_seconds", since(t0)}});
      summary["trigger_success_rate"] = asr;
      summary["converged"] = true;
      break;
    }
    case fl::AttackKind::distill: {
      out = attacks::distill(input, pool, plan.distill);
      summary["converged"] = true;
      break;
    }
    case fl::AttackKind::adaptive: {
      attacks::AdaptiveSpec spec = plan.adaptive;
      spec.temperature = temperature;
      const auto r = attacks::adaptive_attack(input, d.splits.cert_set, spec, &pool);
      for (const auto& e : r.log) {
        w.write({{"type", "iteration"}, {"iteration", e.iteration}, {"eps", e.eps}, {"certified", e.certified},
                 {"mean_cert_loss", e.mean_cert_loss}, {"distill_loss", e.distill_loss},
                 {"wall_seconds", e.wall_seconds}});
      }
      out = r.model;
      summary["converged"] = r.converged;
      summary["eps_reached"] = r.eps_reached ? Json(*r.eps_reached) : Json(nullptr);
      summary["points_matched"] = r.points_matched;
      summary["subset_size"] = spec.cert_subset_size;
      summary["iterations"] = r.iterations;
      break;
    }
  }
  summary["unconverged"] = !summary["converged"].get<bool>();
  summary["input_metrics"] = robustness(input);
  summary["output_metrics"] = robustness(out);
  const fs::path out_model = out_dir / "attack_model.cfl";
  nn::save_model(out, out_model);
  summary["model_hash"] = nn::model_hash(out);
  summary["wall_seconds"] = since(t0);
  w.write(summary);
  log << fl::attack_kind_name(plan.kind) << " attack " << (summary["unconverged"].get<bool>() ? "unconverged" : "done")
      << "; model " << out_model.string() << '\n';
  return path;
}

std::vector<Json> read_report(const fs::path& report) {
  std::ifstream in(report);
  if (!in) throw FormatError("cannot read report " + report.string());
  std::vector<Json> out;
  try {
    if (report.extension() == ".json") {
      out.push_back(Json::parse(in));
      return out;
    }
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        out.push_back(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw FormatError(report.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  } catch (const Json::parse_error& e) {
    throw FormatError(report.string() + ": " + e.what());
  }
  if (out.empty()) throw FormatError(report.string() + ": empty report");
  return out;
}

namespace {

void check_splits(const Json& s, std::vector<std::string>& problems) {
  auto range = [&](const char* k) { return std::pair{s.at(k).at(0).get<std::size_t>(), s.at(k).at(1).get<std::size_t>()}; };
  const auto c = range("cert"), v = range("validation"), p = range("client_pool");
  if (c.first != 0 || c.second > v.first || v.second > p.first || c.first > c.second || v.first > v.second ||
      p.first > p.second) {
    problems.push_back("splits are not disjoint ordered ranges");
  }
  if (c.second != v.first || v.second != p.first) problems.push_back("splits do not cover the dataset contiguously");
}

void check_certify(const std::vector<Json>& recs, std::vector<std::string>& problems) {
  const Json& h = recs.front();
  const std::size_t n = h.at("cert_points").get<std::size_t>();
  const bool per_point = h.value("per_point", true);
  std::vector<Json> rows;
  std::vector<Json> points;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const Json& r = recs[i];
    const std::string type = r.at("type").get<std::string>();
    if (type == "point") {
      points.push_back(r);
      if (r.at("certified").get<bool>() && r.at("predicted") != r.at("label")) {
        problems.push_back("point " + r.at("index").dump() + " is certified but misclassified");
      }
      if (r.at("certified").get<bool>() && r.at("cert_loss").get<double>() != 0.0) {
        problems.push_back("point " + r.at("index").dump() + " is certified with a positive cert loss");
      }
      if (r.at("cert_loss").get<double>() < 0.0) problems.push_back("negative cert loss");
    } else if (type == "row") {
      if (per_point) {
        if (points.size() != n) {
          problems.push_back("row eps=" + r.at("eps").dump() + " has " + std::to_string(points.size()) +
                             " point records, expected " + std::to_string(n));
        } else {
          std::size_t cert = 0;
          double loss = 0.0;
          for (const auto& p : points) {
            cert += p.at("certified").get<bool>() ? 1 : 0;
            loss += p.at("cert_loss").get<double>();
          }
          const double acc = static_cast<double>(cert) / static_cast<double>(n);
          if (std::abs(acc - r.at("certified_acc").get<double>()) > 1e-12) {
            problems.push_back("row eps=" + r.at("eps").dump() + " certified_acc disagrees with its points");
          }
          const double mean = loss / static_cast<double>(n);
          if (std::abs(mean - r.at("mean_cert_loss").get<double>()) > 1e-9 * std::max(1.0, std::abs(mean))) {
            problems.push_back("row eps=" + r.at("eps").dump() + " mean_cert_loss disagrees with its points");
          }
        }
      }
      if (r.at("eps").get<double>() == 0.0 &&
          std::abs(r.at("certified_acc").get<double>() - r.at("clean_acc").get<double>()) > 1e-12) {
        problems.push_back("eps=0 certified accuracy differs from clean accuracy");
      }
      rows.push_back(r);
      points.clear();
    }
  }
  if (rows.size() != h.at("eps").size()) problems.push_back("number of rows does not match the eps list");
  std::sort(rows.begin(), rows.end(), [](const Json& a, const Json& b) { return a.at("eps").get<double>() < b.at("eps").get<double>(); });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].at("certified_acc").get<double>() > rows[i - 1].at("certified_acc").get<double>()) {
      problems.push_back("certified_acc increases from eps=" + rows[i - 1].at("eps").dump() + " to eps=" +
                         rows[i].at("eps").dump());
    }
    if (rows[i].at("mean_cert_loss").get<double>() < rows[i - 1].at("mean_cert_loss").get<double>()) {
      problems.push_back("mean_cert_loss decreases from eps=" + rows[i - 1].at("eps").dump() + " to eps=" +
                         rows[i].at("eps").dump());
    }
  }
}

void check_simulate(const std::vector<Json>& recs, std::vector<std::string>& problems) {
  const Json& h = recs.front();
  const Json& g = h.at("gate");
  fl::GateThresholds th;
  th.acc_retain_fraction = g.at("acc_retain_fraction").get<double>();
  th.loss_band_fraction = g.at("loss_band_fraction").get<double>();
  const fl::GateMode mode = fl::parse_gate_mode(g.at("mode").get<std::string>());
  const std::size_t warmup = h.at("warmup_rounds").get<std::size_t>();
  const std::size_t quorum = h.at("quorum_size").get<std::size_t>();
  auto metrics = [](const Json& m) {
    return fl::RoundMetrics{m.at("normal_acc").get<double>(), m.at("adv_acc").get<double>(),
                            m.at("certified_acc").get<double>(), m.at("mean_cert_loss").get<double>()};
  };
  std::optional<fl::RoundMetrics> last;
  std::string last_hash;
  std::size_t rounds = 0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const Json& r = recs[i];
    if (r.at("type") != "round") continue;
    const std::size_t idx = r.at("round").get<std::size_t>();
    const fl::RoundMetrics m = metrics(r.at("metrics"));
    const std::string tag = "round " + std::to_string(idx) + ": ";
    if (idx == 0) {
      last = m;
      last_hash = r.at("model_hash").get<std::string>();
      continue;
    }
    ++rounds;
    if (r.at("quorum").size() != quorum) problems.push_back(tag + "quorum size differs from the header");
    if (r.at("num_malicious_in_quorum").get<std::size_t>() > quorum) problems.push_back(tag + "too many malicious");
    if (!last) {
      problems.push_back(tag + "no baseline before the first round");
      break;
    }
    bool accepted = true;
    std::string reason = "warmup";
    if (idx > warmup) {
      const auto v = fl::defender_gate(m, *last, th, mode);
      accepted = v.accepted;
      reason = v.reason;
    }
    if (accepted != r.at("accepted").get<bool>()) problems.push_back(tag + "verdict does not follow the gate arithmetic");
    if (reason != r.at("reason").get<std::string>()) problems.push_back(tag + "rejection reason does not match");
    if (r.at("accepted").get<bool>()) {
      last = m;
      last_hash = r.at("model_hash").get<std::string>();
    }
  }
  for (const auto& r : recs) {
    if (r.value("type", "") != "summary") continue;
    if (r.at("rounds").get<std::size_t>() != rounds) problems.push_back("summary round count mismatch");
    if (last && !(metrics(r.at("final_metrics")) == *last)) problems.push_back("summary final metrics are not the last accepted round's");
  }
}

void check_attack(const std::vector<Json>& recs, std::vector<std::string>& problems) {
  double prev = -INFINITY;
  bool summary = false;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const Json& r = recs[i];
    if (r.at("type") == "iteration" && r.contains("eps")) {
      const double e = r.at("eps").get<double>();
      if (e < prev) problems.push_back("eps column decreases at iteration " + r.at("iteration").dump());
      prev = e;
    }
    if (r.at("type") == "summary") {
      summary = true;
      if (r.at("converged").get<bool>() == r.at("unconverged").get<bool>()) problems.push_back("inconsistent convergence flags");
    }
  }
  if (!summary) problems.push_back("attack log has no summary record");
}

}  // namespace

std::vector<std::string> validate_report(const fs::path& report) {
  const auto recs = read_report(report);
  std::vector<std::string> problems;
  const Json& h = recs.front();
  if (!h.contains("report")) return {"first record is not a report header"};
  const std::string kind = h.at("report").get<std::string>();
  try {
    if (h.contains("splits")) check_splits(h.at("splits"), problems);
    if (kind == "certify") {
      check_certify(recs, problems);
    } else if (kind == "simulate") {
      check_simulate(recs, problems);
    } else if (kind == "attack") {
      check_attack(recs, problems);
    } else if (kind != "train") {
      problems.push_back("unknown report kind '" + kind + "'");
    }
  } catch (const Json::exception& e) {
    problems.push_back(std::string("malformed record: ") + e.what());
  }
  return problems;
}

}  // namespace certfl::cli
