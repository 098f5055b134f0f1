#include "certfl/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "certfl/data/idx.hpp"
#include "certfl/error.hpp"
#include "certfl/random.hpp"

namespace certfl::cli {

namespace {

std::string where(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return "";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

// A mapping node whose keys are checked against the ones actually read.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError(where(node_) + "'" + label() + "' must be a mapping");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const YAML::Node v = node_[key];
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v) + "'" + full(key) + "' has an invalid value '" + scalar(v) + "'");
    }
  }

  void get_path(const std::string& key, std::filesystem::path& out) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = s;
  }

  template <class Check>
  void check(const std::string& key, Check ok, const std::string& what) {
    if (!has(key)) return;
    if (!ok()) throw ConfigError(where(node_[key]) + "'" + full(key) + "' " + what);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(node_.IsMap() ? node_[key] : YAML::Node(), full(key));
  }

  YAML::Node node(const std::string& key) { return node_.IsMap() ? node_[key] : YAML::Node(); }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(where(kv.first) + "unknown key '" + full(key) + "'");
    }
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  static std::string scalar(const YAML::Node& v) {
    if (v.IsScalar()) return v.Scalar();
    return v.IsSequence() ? "<list>" : "<mapping>";
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_train(Section s, nn::TrainConfig& t) {
  s.get("learning_rate", t.learning_rate);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("seed", t.rng_seed);
  s.get("temperature", t.temperature);
  s.finish();
}

void read_pgd(Section s, adv::PgdConfig& p) {
  double eps = p.eps.value;
  s.get("eps", eps);
  s.get("steps", p.num_steps);
  p.eps = zono::CertEpsilon::adv(eps);
  p.step_size = 2.5 * eps / static_cast<double>(std::max<std::size_t>(p.num_steps, 1));
  if (p.step_size == 0.0) p.step_size = 1e-3;
  s.get("step_size", p.step_size);
  s.get("random_start", p.random_start);
  s.get("temperature", p.attack_temperature);
  s.get("fp32_masking", p.fp32_masking);
  s.get("seed", p.rng_seed);
  s.finish();
}

void read_eps(Section& s, const std::string& key, zono::CertEpsilon& e) {
  double v = e.value;
  s.get(key, v);
  e.value = v;
}

void apply_override(YAML::Node root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.msg);
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next.IsMap()) next = YAML::Node(YAML::NodeType::Map);
    chain.back()[parts[i]] = next;
    chain.push_back(chain.back()[parts[i]]);
  }
  chain.back()[parts.back()] = value;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (dataset.kind == "synth") {
    dataset.synth.validate();
  } else if (dataset.kind == "idx") {
    if (dataset.images.empty() || dataset.labels.empty()) throw ConfigError("dataset.images and dataset.labels are required for idx data");
  } else {
    throw ConfigError("dataset.kind must be synth or idx, got '" + dataset.kind + "'");
  }
  if (cert_n == 0 && federation.gate_mode == fl::GateMode::full) {
    throw ConfigError("splits.cert is 0 but the full gate certifies");
  }
  train.validate();
  pgd.validate();
  eval_pgd.validate();
  for (double e : certify_eps) zono::CertEpsilon::crt(e).validate();
  if (certify.clip && certify.clip->lo > certify.clip->hi) throw ConfigError("certify clip lo > hi");
  federation.validate();
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides,
                              const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) apply_override(root, o);

  ExperimentConfig c;
  try {
    Section top(root, "");
    top.get("version", c.version);
    if (!top.has("version")) throw ConfigError("missing required key 'version'");
    top.get("seed", c.seed);
    if (top.has("output_dir")) {
      std::filesystem::path p;
      top.get_path("output_dir", p);
      c.output_dir = p;
    }
    top.get("threads", c.threads);

    c.train.rng_seed = c.seed;
    c.pgd = adv::PgdConfig::standard(0.25, 10);
    c.pgd.rng_seed = c.seed;
    c.eval_pgd = adv::PgdConfig::standard(0.25, 40);
    c.eval_pgd.rng_seed = derive_seed(c.seed, {0x4556});
    c.model.seed = c.seed;
    c.dataset.synth.seed = c.seed;
    c.dataset.synth.prototype_seed = c.seed;

    {
      Section d = top.child("dataset");
      d.get("kind", c.dataset.kind);
      auto& s = c.dataset.synth;
      d.get("classes", s.classes);
      c.dataset.classes = s.classes;
      d.get("shape", s.shape);
      d.get("per_class", s.per_class);
      d.get("separation", s.separation);
      d.get("noise", s.noise);
      d.get("flip_prob", s.flip_prob);
      d.get("seed", s.seed);
      d.get("prototype_seed", s.prototype_seed);
      d.get("name", s.name);
      d.get("test_seed", c.dataset.test_seed);
      d.get("test_per_class", c.dataset.test_per_class);
      d.get_path("images", c.dataset.images);
      d.get_path("labels", c.dataset.labels);
      d.get_path("test_images", c.dataset.test_images);
      d.get_path("test_labels", c.dataset.test_labels);
      d.get("limit", c.dataset.limit);
      d.finish();
    }
    {
      Section s = top.child("splits");
      s.get("cert", c.cert_n);
      s.get("validation", c.val_n);
      s.finish();
    }
    {
      Section m = top.child("model");
      m.get("preset", c.preset);
      m.get("hidden", c.model.hidden);
      m.get("init_seed", c.model.seed);
      m.finish();
    }
    {
      Section t = top.child("train");
      t.get("adversarial", c.adversarial);
      t.get("learning_rate", c.train.learning_rate);
      t.get("batch_size", c.train.batch_size);
      t.get("epochs", c.train.epochs);
      t.get("seed", c.train.rng_seed);
      t.get("temperature", c.train.temperature);
      t.finish();
    }
    read_pgd(top.child("pgd"), c.pgd);
    read_pgd(top.child("eval_pgd"), c.eval_pgd);
    {
      Section s = top.child("certify");
      s.get("eps", c.certify_eps);
      bool clip = true;
      s.get("clip", clip);
      if (!clip) c.certify.clip.reset();
      std::string mode = "shared_symbols";
      s.get("diff_mode", mode);
      if (mode == "shared_symbols") {
        c.certify.diff_mode = zono::DiffMode::shared_symbols;
      } else if (mode == "naive_interval") {
        c.certify.diff_mode = zono::DiffMode::naive_interval;
      } else {
        throw ConfigError(where(s.node("diff_mode")) + "'certify.diff_mode' must be shared_symbols or naive_interval");
      }
      s.get("per_point", c.per_point);
      s.finish();
    }

    auto& f = c.federation;
    f.seed = c.seed;
    f.client_train = c.train;
    f.client_train.epochs = 1;
    {
      Section s = top.child("federation");
      s.get("num_clients", f.num_clients);
      s.get("num_malicious", f.num_malicious);
      s.get("quorum_size", f.quorum_size);
      s.get("rounds", f.rounds);
      s.get("seed", f.seed);
      s.get("warmup_rounds", f.gate_warmup_rounds);
      bool checkpoints = false;
      s.get("checkpoints", checkpoints);
      if (checkpoints) f.checkpoint_dir = "checkpoints";
      read_train(s.child("client_train"), f.client_train);
      s.finish();
    }
    f.client_pgd = c.pgd;
    f.eval_pgd = c.eval_pgd;
    f.gate.eps_adv = zono::CertEpsilon::adv(c.eval_pgd.eps.value);
    {
      Section g = top.child("gate");
      std::string mode = fl::gate_mode_name(f.gate_mode);
      g.get("mode", mode);
      try {
        f.gate_mode = fl::parse_gate_mode(mode);
      } catch (const ConfigError& e) {
        throw ConfigError(where(g.node("mode")) + e.what());
      }
      g.get("acc_retain_fraction", f.gate.acc_retain_fraction);
      g.get("loss_band_fraction", f.gate.loss_band_fraction);
      read_eps(g, "eps_crt", f.gate.eps_crt);
      g.finish();
    }
    {
      auto& a = f.attack;
      Section s = top.child("attack");
      std::string kind = "none";
      s.get("kind", kind);
      try {
        a.kind = fl::parse_attack_kind(kind);
      } catch (const ConfigError& e) {
        throw ConfigError(where(s.node("kind")) + e.what());
      }
      {
        Section t = s.child("trigger");
        t.get("min_malicious", a.trigger.min_malicious);
        t.get("convergence_fraction", a.trigger.convergence_fraction);
        t.get("lookback", a.trigger.lookback);
        t.get("accuracy_floor", a.trigger.accuracy_floor);
        t.get("min_round", a.trigger.min_round);
        t.finish();
      }
      {
        Section b = s.child("backdoor");
        b.get("trigger_magnitude", a.backdoor.trigger_magnitude);
        b.get("stripe_period", a.backdoor.stripe_period);
        b.get("target_class", a.backdoor.target_class);
        b.get("poison_fraction", a.backdoor.poison_fraction);
        b.get("adversarial_fraction", a.backdoor.adversarial_fraction);
        a.backdoor_train = c.train;
        read_train(b.child("train"), a.backdoor_train);
        b.finish();
      }
      {
        Section d = s.child("distill");
        d.get("temperature", a.distill.temperature);
        d.get("init_seed", a.distill.init_seed);
        a.distill.teacher_cfg = c.train;
        a.distill.student_cfg = c.train;
        read_train(d.child("teacher"), a.distill.teacher_cfg);
        read_train(d.child("student"), a.distill.student_cfg);
        d.finish();
      }
      {
        auto& ad = a.adaptive;
        Section d = s.child("adaptive");
        ad.rng_seed = c.seed;
        d.get("cert_subset_size", ad.cert_subset_size);
        read_eps(d, "target_eps", ad.target_eps);
        read_eps(d, "start_eps", ad.start_eps);
        d.get("eps_step", ad.eps_step);
        std::string mode = "accuracy_only";
        d.get("match_mode", mode);
        if (mode == "accuracy_only") {
          ad.match_mode = attacks::MatchMode::accuracy_only;
        } else if (mode == "accuracy_and_loss") {
          ad.match_mode = attacks::MatchMode::accuracy_and_loss;
        } else {
          throw ConfigError(where(d.node("match_mode")) +
                            "'attack.adaptive.match_mode' must be accuracy_only or accuracy_and_loss");
        }
        d.get("target_certified_fraction", ad.target_certified_fraction);
        d.get("target_mean_loss", ad.target_mean_loss);
        d.get("loss_band_fraction", ad.loss_band_fraction);
        d.get("w_cert", ad.w_cert);
        d.get("w_distill", ad.w_distill);
        d.get("margin", ad.margin);
        d.get("learning_rate", ad.learning_rate);
        d.get("batch_size", ad.batch_size);
        d.get("max_iterations", ad.max_iterations);
        d.get("max_wall_seconds", ad.max_wall_seconds);
        d.get("seed", ad.rng_seed);
        d.finish();
        ad.temperature = a.distill.temperature;
      }
      s.finish();
    }
    top.finish();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, path.string());
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("CERTFL_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return "certfl_out";
}

namespace {
data::LabeledDataset read_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                                   std::size_t classes, std::size_t limit) {
  for (const auto& p : {images, labels}) {
    if (!std::filesystem::exists(p)) throw ConfigError("dataset file not found: " + p.string());
  }
  auto d = data::load_idx(images, labels, classes);
  if (limit > 0 && limit < d.size()) d = d.slice(0, limit, d.name());
  return d;
}
}  // namespace

LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData out;
  if (cfg.dataset.kind == "synth") {
    out.all = data::synth_dataset(cfg.dataset.synth);
    if (cfg.dataset.test_per_class > 0) {
      data::SynthSpec t = cfg.dataset.synth;
      t.seed = cfg.dataset.test_seed;
      t.per_class = cfg.dataset.test_per_class;
      t.name = t.name + ":test";
      out.test = data::synth_dataset(t);
    }
  } else {
    out.all = read_idx_pair(cfg.dataset.images, cfg.dataset.labels, cfg.dataset.classes, cfg.dataset.limit);
    if (!cfg.dataset.test_images.empty()) {
      out.test = read_idx_pair(cfg.dataset.test_images, cfg.dataset.test_labels, cfg.dataset.classes, 0);
    }
  }
  out.splits = data::make_splits(out.all, cfg.cert_n, cfg.val_n, cfg.federation.gate_mode != fl::GateMode::full);
  return out;
}

nn::Model build_model(const ExperimentConfig& cfg, const Shape& input_shape, std::size_t classes) {
  return nn::make_preset(cfg.preset, input_shape, classes, cfg.model);
}

}  // namespace certfl::cli
