#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "certfl/cli/commands.hpp"
#include "certfl/error.hpp"
#include "certfl/parallel.hpp"

namespace fs = std::filesystem;
using namespace certfl;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::size_t threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "YAML experiment config")->required()->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "Override a config key, e.g. --set train.epochs=5");
  sub->add_option("-o,--output", c.output, "Output directory (default: config output_dir, $CERTFL_OUTPUT_DIR, ./certfl_out)");
  sub->add_option("-j,--threads", c.threads, "Worker threads (default: config threads)");
}

cli::ExperimentConfig prepare(const Common& c, fs::path& out_dir) {
  auto cfg = cli::load_config(c.config, c.overrides);
  if (c.threads > 0) cfg.threads = c.threads;
  set_max_threads(cfg.threads);
  out_dir = c.output.empty() ? cli::resolve_output_dir(cfg) : fs::path(c.output);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certfl: certified defenses and attacks for federated learning"};
  app.require_subcommand(1);

  Common train_opts, cert_opts, sim_opts, atk_opts;
  std::string cert_model, sim_model, atk_model, report;

  auto* train = app.add_subcommand("train", "Train a model on the configured dataset");
  add_common(train, train_opts);

  auto* certify = app.add_subcommand("certify", "Certify a model over a list of epsilons");
  add_common(certify, cert_opts);
  certify->add_option("-m,--model", cert_model, "Model file")->required()->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "Run a federated simulation with the defender gate");
  add_common(simulate, sim_opts);
  simulate->add_option("-m,--model", sim_model, "Initial global model (default: fresh preset)")
      ->check(CLI::ExistingFile);

  auto* attack = app.add_subcommand("attack", "Run the configured attack against a model");
  add_common(attack, atk_opts);
  attack->add_option("-m,--model", atk_model, "Model to attack")->required()->check(CLI::ExistingFile);

  auto* validate = app.add_subcommand("validate-report", "Check a report's internal consistency");
  validate->add_option("report", report, "Report file (.json or .jsonl)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  try {
    fs::path out_dir;
    fs::path result;
    if (*train) {
      const auto cfg = prepare(train_opts, out_dir);
      result = cli::cmd_train(cfg, out_dir, std::cerr);
    } else if (*certify) {
      const auto cfg = prepare(cert_opts, out_dir);
      result = cli::cmd_certify(cfg, cert_model, out_dir, std::cerr);
    } else if (*simulate) {
      const auto cfg = prepare(sim_opts, out_dir);
      result = cli::cmd_simulate(cfg, out_dir, std::cerr, sim_model);
    } else if (*attack) {
      const auto cfg = prepare(atk_opts, out_dir);
      result = cli::cmd_attack(cfg, atk_model, out_dir, std::cerr);
    } else if (*validate) {
      const auto problems = cli::validate_report(report);
      for (const auto& p : problems) std::cerr << "problem: " << p << '\n';
      if (!problems.empty()) {
        std::cerr << problems.size() << " problem(s) in " << report << '\n';
        return cli::kExitRuntime;
      }
      std::cout << "ok " << report << '\n';
      return cli::kExitOk;
    }
    std::cout << result.string() << '\n';
    return cli::kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
}
