#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "certfl/cli/commands.hpp"
#include "certfl/cli/config.hpp"
#include "certfl/error.hpp"

using namespace certfl;
using namespace certfl::cli;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(version: 1
seed: 4
dataset:
  kind: synth
  shape: [1, 6, 6]
  per_class: 12
  separation: 0.8
  noise: 0.05
  prototype_seed: 7
  test_seed: 2
  test_per_class: 4
splits:
  cert: 20
  validation: 20
model:
  hidden: [12]
train:
  epochs: 3
pgd:
  eps: 0.2
  steps: 3
eval_pgd:
  eps: 0.2
  steps: 5
certify:
  eps: [0.0, 0.02, 0.05, 0.1]
federation:
  num_clients: 4
  num_malicious: 0
  quorum_size: 3
  rounds: 2
  warmup_rounds: 1
gate:
  eps_crt: 0.02
)";

std::string config_error(const std::string& text, std::vector<std::string> overrides = {}) {
  try {
    parse_config(text, overrides, "t.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("certfl_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<Json> stripped(const fs::path& p) {
  std::vector<Json> out;
  for (const auto& r : read_report(p)) out.push_back(strip_wall_time(r));
  return out;
}

void write_lines(const fs::path& p, const std::vector<Json>& recs) {
  std::ofstream out(p);
  for (const auto& r : recs) out << r.dump() << '\n';
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(CERTFL_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(kTiny, {}, "t.yaml");
  CHECK(c.seed == 4);
  CHECK(c.dataset.synth.shape == Shape{1, 6, 6});
  CHECK(c.model.hidden == std::vector<std::size_t>{12});
  CHECK(c.pgd.eps.value == 0.2);
  CHECK(c.pgd.step_size == doctest::Approx(2.5 * 0.2 / 3));
  CHECK(c.federation.gate.eps_adv.value == 0.2);
  CHECK(c.federation.client_pgd.num_steps == 3);
  CHECK(c.certify_eps.size() == 4);

  const auto o = parse_config(kTiny, {"train.epochs=7", "gate.mode=accuracy_only", "certify.eps=[0.3]"}, "t.yaml");
  CHECK(o.train.epochs == 7);
  CHECK(o.federation.gate_mode == fl::GateMode::accuracy_only);
  CHECK(o.certify_eps == std::vector<double>{0.3});
}

TEST_CASE("config errors carry locations") {
  CHECK(config_error("seed: 1\n").find("version") != std::string::npos);
  CHECK(config_error("version: 2\n").find("unsupported config version") != std::string::npos);

  const auto unknown = config_error("version: 1\ntrain:\n  epochs: 2\n  epohcs: 3\n");
  CHECK(unknown.find("t.yaml") != std::string::npos);
  CHECK(unknown.find("line 4") != std::string::npos);
  CHECK(unknown.find("train.epohcs") != std::string::npos);

  const auto bad_value = config_error("version: 1\ndataset:\n  per_class: many\n");
  CHECK(bad_value.find("line 3, column 14") != std::string::npos);

  const auto syntax = config_error("version: 1\ntrain: [1, 2\n");
  CHECK(syntax.find("line") != std::string::npos);

  CHECK(config_error("version: 1\ngate:\n  mode: sometimes\n").find("line 3") != std::string::npos);
  CHECK(config_error("version: 1\nattack:\n  kind: sybil\n").find("line 3") != std::string::npos);
  CHECK(config_error("version: 1\ntrain: 5\n").find("mapping") != std::string::npos);
  CHECK(!config_error(kTiny, {"pgd.steps=0"}).empty());
  CHECK(!config_error(kTiny, {"federation.quorum_size=9"}).empty());
  CHECK(!config_error(kTiny, {"nonsense"}).empty());
  CHECK(config_error(kTiny, {"model.bogus=1"}).find("model.bogus") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("output directory resolution") {
  auto c = parse_config(kTiny, {}, "t.yaml");
  ::setenv("CERTFL_OUTPUT_DIR", "/tmp/from_env", 1);
  CHECK(resolve_output_dir(c) == fs::path("/tmp/from_env"));
  c.output_dir = "/tmp/from_config";
  CHECK(resolve_output_dir(c) == fs::path("/tmp/from_config"));
  ::unsetenv("CERTFL_OUTPUT_DIR");
  c.output_dir.reset();
  CHECK(resolve_output_dir(c) == fs::path("certfl_out"));
}

TEST_CASE("idx datasets must exist") {
  auto c = parse_config(kTiny, {"dataset.kind=idx", "dataset.images=/nope/img", "dataset.labels=/nope/lab"}, "t");
  CHECK_THROWS_AS(load_data(c), ConfigError);
}

TEST_CASE("commands are reproducible and their reports validate") {
  const auto cfg = parse_config(kTiny, {}, "t.yaml");
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  std::ostringstream log;

  const auto train_a = cmd_train(cfg, a, log);
  const auto train_b = cmd_train(cfg, b, log);
  CHECK(stripped(train_a) == stripped(train_b));
  CHECK(validate_report(train_a).empty());

  const auto cert_a = cmd_certify(cfg, a / "model.cfl", a, log);
  const auto cert_b = cmd_certify(cfg, b / "model.cfl", b, log);
  CHECK(stripped(cert_a) == stripped(cert_b));
  CHECK(validate_report(cert_a).empty());

  const auto sim_a = cmd_simulate(cfg, a, log);
  const auto sim_b = cmd_simulate(cfg, b, log);
  CHECK(stripped(sim_a) == stripped(sim_b));
  CHECK(validate_report(sim_a).empty());

  auto atk = parse_config(kTiny, {"attack.kind=adaptive", "attack.distill.temperature=20", "attack.adaptive.cert_subset_size=10",
                                  "attack.adaptive.start_eps=0.02", "attack.adaptive.target_eps=0.04",
                                  "attack.adaptive.max_iterations=40"},
                          "t.yaml");
  const auto atk_a = cmd_attack(atk, a / "model.cfl", a, log);
  const auto atk_b = cmd_attack(atk, b / "model.cfl", b, log);
  CHECK(stripped(atk_a) == stripped(atk_b));
  CHECK(validate_report(atk_a).empty());
  CHECK(read_report(atk_a).back().contains("unconverged"));

  SUBCASE("tampering is detected") {
    auto recs = read_report(cert_a);
    for (auto& r : recs)
      if (r.value("type", "") == "row" && r["eps"] == 0.1) r["certified_acc"] = 1.0;
    write_lines(a / "tampered_cert.jsonl", recs);
    CHECK(!validate_report(a / "tampered_cert.jsonl").empty());

    recs = read_report(sim_a);
    for (auto& r : recs)
      if (r.value("type", "") == "round" && r["round"] == 2) r["accepted"] = !r["accepted"].get<bool>();
    write_lines(a / "tampered_sim.jsonl", recs);
    CHECK(!validate_report(a / "tampered_sim.jsonl").empty());

    recs = read_report(sim_a);
    recs[0]["splits"]["validation"][0] = 5;
    write_lines(a / "tampered_splits.jsonl", recs);
    CHECK(!validate_report(a / "tampered_splits.jsonl").empty());

    recs = read_report(atk_a);
    std::vector<std::size_t> its;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].value("type", "") == "iteration") its.push_back(i);
    REQUIRE(its.size() >= 2);
    recs[its.front()]["eps"] = 0.5;
    write_lines(a / "tampered_atk.jsonl", recs);
    CHECK(!validate_report(a / "tampered_atk.jsonl").empty());
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("adaptive attack with no budget returns its input") {
  auto cfg = parse_config(kTiny, {"attack.kind=adaptive", "attack.adaptive.cert_subset_size=10",
                                  "attack.adaptive.max_iterations=0"},
                          "t.yaml");
  const auto d = fresh_dir("budget");
  std::ostringstream log;
  cmd_train(cfg, d, log);
  const auto report = cmd_attack(cfg, d / "model.cfl", d, log);
  const auto recs = read_report(report);
  std::size_t iterations = 0;
  for (const auto& r : recs) iterations += r.value("type", "") == "iteration";
  CHECK(iterations == 0);
  CHECK(recs.back()["unconverged"] == true);
  CHECK(recs.back()["model_hash"] == recs.front()["input_model_hash"]);
  fs::remove_all(d);
}

TEST_CASE("exit codes") {
  const auto d = fresh_dir("exit");
  {
    std::ofstream(d / "ok.yaml") << kTiny << "output_dir: " << (d / "out").string() << "\n";
    std::ofstream(d / "bad.yaml") << "version: 1\ntrain:\n  epochz: 1\n";
  }
  CHECK(run_tool("train -c " + (d / "ok.yaml").string()) == kExitOk);
  CHECK(fs::exists(d / "out" / "model.cfl"));
  CHECK(run_tool("train -c " + (d / "bad.yaml").string()) == kExitConfig);
  CHECK(run_tool("frobnicate") == kExitConfig);
  CHECK(run_tool("certify -c " + (d / "ok.yaml").string()) == kExitConfig);
  {
    std::ofstream(d / "garbage.cfl") << "not a model";
  }
  CHECK(run_tool("certify -c " + (d / "ok.yaml").string() + " -m " + (d / "garbage.cfl").string()) == kExitRuntime);
  CHECK(run_tool("certify -c " + (d / "ok.yaml").string() + " -m " + (d / "out" / "model.cfl").string() +
                 " --threads 2") == kExitOk);
  CHECK(run_tool("validate-report " + (d / "out" / "certify_report.jsonl").string()) == kExitOk);
  fs::remove_all(d);
}
