#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "congrad/checkpoint.hpp"
#include "congrad/metrics_io.hpp"
#include "congrad/run_config.hpp"
#include "congrad/verify.hpp"
#include "doctest.h"
#include "nlohmann/json.hpp"

using namespace congrad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("congrad_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct CliResult {
  int code = -1;
  std::string output;
};

// runs the installed binary named by CONGRAD_CLI with stderr folded into
// stdout
CliResult run_cli(const std::string& args) {
  const char* bin = std::getenv("CONGRAD_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "CONGRAD_CLI must point at the cli binary");
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string write_config(const fs::path& dir, const std::string& name,
                         const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  out << text;
  return p.string();
}

}  // namespace

TEST_CASE("env presets fill the expected defaults") {
  const RunConfig climb = config_from_json_text(R"({"env":"matrix_climb"})");
  CHECK(climb.policy == "tabular");
  CHECK(climb.num_agents == 2);
  CHECK(climb.num_actions == 3);
  CHECK(climb.episode_len == 8);
  CHECK(climb.train.eta == 5e-4);
  CHECK(climb.train.mode == TrainMode::Grasp);

  const RunConfig grid = config_from_json_text(R"({"env":"grid_spread"})");
  CHECK(grid.policy == "mlp");
  CHECK(grid.num_agents == 3);
  CHECK(grid.num_actions == 5);
  CHECK(grid.episode_len == 25);
  CHECK(grid.grid_width == 5);

  const RunConfig quad = config_from_json_text(R"({"env":"team_quadratic"})");
  CHECK(quad.num_agents == 3);
  CHECK(quad.params_per_agent == 4);
  CHECK(quad.train.eta == 0.1);
  CHECK(quad.train.optimizer == OptimizerKind::Plain);
  CHECK(quad.train.iterations == 2000);
}

TEST_CASE("explicit keys override the preset") {
  const RunConfig cfg = config_from_json_text(
      R"({"env":"matrix_climb","iterations":50,"eta":0.01,"mode":"grasp_aligned",
          "seed":99,"advantage_norm":true,"minibatches":2,"qp_algorithm":"frank_wolfe"})");
  CHECK(cfg.train.iterations == 50);
  CHECK(cfg.train.eta == 0.01);
  CHECK(cfg.train.mode == TrainMode::GraspAligned);
  CHECK(cfg.train.seed == 99);
  CHECK(cfg.train.advantage_norm);
  CHECK(cfg.train.minibatches == 2);
  CHECK(cfg.train.qp_algorithm == QpAlgorithm::FrankWolfe);
}

TEST_CASE("config parser rejects malformed input by name") {
  CHECK_THROWS_WITH_AS(config_from_json_text("{nope"),
                       doctest::Contains("not valid JSON"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_text("[1,2]"),
                       doctest::Contains("object"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_text(R"({"iterations":5})"),
                       doctest::Contains("env"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_text(R"({"env":"nope"})"),
                       doctest::Contains("unknown env"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","bogus_key":1})"),
      doctest::Contains("bogus_key"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","eta":"fast"})"),
      doctest::Contains("eta"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","iterations":1.5})"),
      doctest::Contains("iterations"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","mode":"sideways"})"),
      doctest::Contains("mode"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","seed":-1})"),
      doctest::Contains("seed"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","metrics_format":"xml"})"),
      doctest::Contains("metrics_format"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(
          R"({"env":"matrix_climb","checkpoint_interval":-2})"),
      doctest::Contains("checkpoint_interval"), ConfigError);
}

TEST_CASE("payoff is required for matrix_game and rejected elsewhere") {
  CHECK_THROWS_WITH_AS(config_from_json_text(R"({"env":"matrix_game"})"),
                       doctest::Contains("payoff"), ConfigError);
  const RunConfig cfg = config_from_json_text(
      R"({"env":"matrix_game","num_agents":2,"num_actions":2,
          "payoff":[1.0,0.0,0.0,1.0]})");
  CHECK(cfg.payoff.size() == 4);
  CHECK_THROWS_WITH_AS(
      config_from_json_text(R"({"env":"matrix_climb","payoff":[1.0]})"),
      doctest::Contains("payoff"), ConfigError);
}

TEST_CASE("rendered config round-trips exactly") {
  const std::vector<std::string> texts{
      R"({"env":"matrix_climb","iterations":3,"seed":42})",
      R"({"env":"grid_spread","mode":"grasp_aligned","timing":true})",
      R"({"env":"team_quadratic","eta":0.05,"consensus_coeff":0.3})",
      R"({"env":"matrix_game","num_agents":2,"num_actions":2,
          "payoff":[0.5,-0.5,-0.5,0.5],"metrics_format":"jsonl"})"};
  for (const std::string& text : texts) {
    const RunConfig a = config_from_json_text(text);
    const std::string echo = render_config(a);
    const RunConfig b = config_from_json_text(echo);
    CHECK(render_config(b) == echo);
  }
}

TEST_CASE("enum names parse and print consistently") {
  for (TrainMode m :
       {TrainMode::Grasp, TrainMode::MappoBaseline, TrainMode::GraspAligned})
    CHECK(parse_train_mode(train_mode_name(m)) == m);
  for (QpAlgorithm a : {QpAlgorithm::ProjectedGradient, QpAlgorithm::FrankWolfe})
    CHECK(parse_qp_algorithm(qp_algorithm_name(a)) == a);
  for (OptimizerKind k : {OptimizerKind::Plain, OptimizerKind::Adam})
    CHECK(parse_optimizer(optimizer_name(k)) == k);
  CHECK(parse_policy_kind("tabular") == PolicyKind::Tabular);
  CHECK(parse_policy_kind("mlp") == PolicyKind::Mlp);
  CHECK_THROWS_AS(parse_policy_kind("table"), ConfigError);
}

TEST_CASE("make_env builds the configured environment") {
  const RunConfig climb = config_from_json_text(R"({"env":"matrix_climb"})");
  const auto env = make_env(climb);
  REQUIRE(env != nullptr);
  CHECK(env->spec().num_agents == 2);
  CHECK(env->spec().episode_len == 8);

  RunConfig bad = climb;
  bad.num_agents = 3;
  CHECK_THROWS_WITH_AS(make_env(bad), doctest::Contains("fixed"), ConfigError);

  const RunConfig quad = config_from_json_text(R"({"env":"team_quadratic"})");
  CHECK(make_env(quad) == nullptr);
  const TeamQuadratic tq = make_quadratic(quad);
  CHECK(tq.num_agents() == 3);
  CHECK(tq.block_size() == 4);
  CHECK_THROWS_AS(make_quadratic(climb), ConfigError);
}

TEST_CASE("checkpoint files round-trip bitwise") {
  const fs::path dir = temp_dir("ckpt");
  std::vector<CheckpointBlock> blocks;
  blocks.push_back({BlockRole::Backbone, 2, 3, {1.0, -2.5, 3e-300, 0.25, 1e300, -0.0}});
  blocks.push_back({BlockRole::Head, 1, 2, {0.1, 0.2}});
  blocks.push_back({BlockRole::Critic, 1, 4, {7.0, 8.0, 9.0, 10.0}});
  const std::string path = (dir / "a.bin").string();
  save_checkpoint(path, blocks);
  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].role == blocks[i].role);
    CHECK(loaded[i].rows == blocks[i].rows);
    CHECK(loaded[i].cols == blocks[i].cols);
    REQUIRE(loaded[i].data.size() == blocks[i].data.size());
    for (std::size_t k = 0; k < blocks[i].data.size(); ++k) {
      const double a = loaded[i].data[k], b = blocks[i].data[k];
      CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
    }
  }
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  const fs::path dir = temp_dir("ckpt_bad");
  const std::string path = (dir / "a.bin").string();
  save_checkpoint(path, checkpoint_blocks(Vec{1.0, 2.0, 3.0}));

  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "missing.bin").string()),
                       doctest::Contains("cannot open"), std::runtime_error);

  std::string bytes = slurp(path);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::ofstream(dir / "magic.bin", std::ios::binary) << bad_magic;
  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "magic.bin").string()),
                       doctest::Contains("magic"), std::runtime_error);

  std::string bad_version = bytes;
  bad_version[16] = 2;
  std::ofstream(dir / "version.bin", std::ios::binary) << bad_version;
  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "version.bin").string()),
                       doctest::Contains("version"), std::runtime_error);

  std::ofstream(dir / "trunc.bin", std::ios::binary)
      << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "trunc.bin").string()),
                       doctest::Contains("truncated"), std::runtime_error);

  std::ofstream(dir / "tail.bin", std::ios::binary) << (bytes + "junk");
  CHECK_THROWS_WITH_AS(load_checkpoint((dir / "tail.bin").string()),
                       doctest::Contains("trailing"), std::runtime_error);
}

TEST_CASE("checkpoint blocks mirror the parameter shapes") {
  RngStream rng(1, 0);
  const PolicyParams mlp = make_mlp_policy(2, 6, 4, 8, rng);
  RngStream crng(1, 1);
  const CriticParams critic = make_mlp_critic(6, 8, crng);
  const auto blocks = checkpoint_blocks(mlp, critic);
  REQUIRE(blocks.size() == 4);  // backbone + 2 heads + critic
  CHECK(blocks[0].role == BlockRole::Backbone);
  CHECK(blocks[0].rows == 8);
  CHECK(blocks[0].cols == 7);
  CHECK(blocks[1].role == BlockRole::Head);
  CHECK(blocks[1].rows == 4);
  CHECK(blocks[1].cols == 9);
  CHECK(blocks[3].role == BlockRole::Critic);
  CHECK(blocks[3].data.size() == critic.w.size());

  const PolicyParams tab = make_tabular_policy(2, 3, 4);
  const CriticParams tc = make_tabular_critic(5);
  const auto tblocks = checkpoint_blocks(tab, tc);
  REQUIRE(tblocks.size() == 3);  // no backbone block for tabular
  CHECK(tblocks[0].role == BlockRole::Head);
  CHECK(tblocks[0].rows == 3);
  CHECK(tblocks[0].cols == 4);

  const auto raw = checkpoint_blocks(Vec{1.0, 2.0});
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].role == BlockRole::RawTheta);
  CHECK(raw[0].rows == 1);
  CHECK(raw[0].cols == 2);
}

TEST_CASE("csv metrics have a fixed header and exact values") {
  const fs::path dir = temp_dir("csv");
  const std::string path = (dir / "m.csv").string();
  CHECK(metrics_csv_header(2) ==
        "iteration,mean_return,u_star_norm,kkt_margin,g_norm_0,g_norm_1,"
        "actor_surrogate,critic_loss,qp_iters,wall_ms");
  {
    MetricsFileSink sink(path, 2, "csv", false);
    IterationMetrics m;
    m.iteration = 1;
    m.mean_return = 0.1;
    m.u_star_norm = 2.0;
    m.kkt_margin = -5e-9;
    m.g_norms = {1.5, 0.25};
    m.actor_surrogate = 0.125;
    m.critic_loss = 3.0;
    m.qp_iters = 17;
    m.wall_ms = 9.5;  // suppressed because timing is off
    sink.write(m);
  }
  const std::string got = slurp(path);
  const std::string expect =
      "iteration,mean_return,u_star_norm,kkt_margin,g_norm_0,g_norm_1,"
      "actor_surrogate,critic_loss,qp_iters,wall_ms\n"
      "1,0.10000000000000001,2,-5.0000000000000001e-09,1.5,0.25,0.125,3,17,0\n";
  CHECK(got == expect);
}

TEST_CASE("jsonl metrics parse back with exact fields") {
  const fs::path dir = temp_dir("jsonl");
  const std::string path = (dir / "m.jsonl").string();
  {
    MetricsFileSink sink(path, 1, "jsonl", true);
    IterationMetrics m;
    m.iteration = 3;
    m.mean_return = -0.5;
    m.u_star_norm = 0.001953125;  // exact binary fraction
    m.kkt_margin = 0.0;
    m.g_norms = {42.0};
    m.actor_surrogate = 1.0 / 3.0;
    m.critic_loss = 2.25;
    m.qp_iters = 5;
    m.wall_ms = 12.5;
    sink.write(m);
  }
  const auto row = nlohmann::json::parse(slurp(path));
  CHECK(row["iteration"] == 3);
  CHECK(row["mean_return"].get<double>() == -0.5);
  CHECK(row["u_star_norm"].get<double>() == 0.001953125);
  CHECK(row["g_norms"].size() == 1);
  CHECK(row["g_norms"][0].get<double>() == 42.0);
  CHECK(row["actor_surrogate"].get<double>() == 1.0 / 3.0);
  CHECK(row["qp_iters"] == 5);
  CHECK(row["wall_ms"].get<double>() == 12.5);  // timing on passes through
}

TEST_CASE("metrics sink validates format and g_norm count") {
  const fs::path dir = temp_dir("sink_bad");
  CHECK_THROWS_AS(MetricsFileSink((dir / "x").string(), 1, "xml", false),
                  std::invalid_argument);
  MetricsFileSink sink((dir / "m.csv").string(), 2, "csv", false);
  IterationMetrics m;
  m.g_norms = {1.0};  // expected 2
  CHECK_THROWS_AS(sink.write(m), std::invalid_argument);
}

TEST_CASE("verify suites run clean at small case counts") {
  for (const std::string& name : verify_suite_names()) {
    const VerifyReport r = run_verify_suite(name, 25, 7);
    CAPTURE(name);
    CHECK(r.pass);
    CHECK(r.cases >= 1);
    CHECK(r.failures == 0);
    const std::string line = format_report(r);
    CHECK(line.find(name) != std::string::npos);
    CHECK(line.find("pass") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(run_verify_suite("bogus", 10, 1),
                       doctest::Contains("bogus"), std::invalid_argument);
}

TEST_CASE("cli rejects bad invocations with exit code 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("train").code == 2);  // --config is required
  CHECK(run_cli("train --config /nonexistent.json").code == 2);
  CHECK(run_cli("verify --suite bogus").code == 2);

  const fs::path dir = temp_dir("cli_bad");
  const std::string cfg =
      write_config(dir, "bad.json", R"({"env":"unknown_env"})");
  const CliResult r = run_cli("train --config " + cfg);
  CHECK(r.code == 2);
  CHECK(r.output.find("config error") != std::string::npos);
}

TEST_CASE("cli reports runtime divergence with exit code 1") {
  const fs::path dir = temp_dir("cli_diverge");
  const std::string cfg = write_config(
      dir, "d.json",
      R"({"env":"team_quadratic","eta":1e200,"iterations":10})");
  const CliResult r =
      run_cli("train --config " + cfg + " --out " + (dir / "out").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("non-finite") != std::string::npos);
}

TEST_CASE("cli train writes config echo, metrics and final parameters") {
  const fs::path dir = temp_dir("cli_train");
  const std::string cfg = write_config(
      dir, "run.json",
      R"({"env":"matrix_climb","iterations":4,"rollout_episodes":4,
          "checkpoint_interval":2,"seed":5})");
  const fs::path out = dir / "out";
  const CliResult r = run_cli("train --config " + cfg + " --out " + out.string());
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  CHECK(r.output.find("train complete") != std::string::npos);

  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "checkpoint_000002.bin"));
  CHECK(fs::exists(out / "checkpoint_000004.bin"));
  CHECK(fs::exists(out / "params_final.bin"));

  const RunConfig echo = config_from_json_text(slurp(out / "config_echo.json"));
  CHECK(echo.train.iterations == 4);
  CHECK(echo.train.seed == 5);
  CHECK(render_config(echo) == slurp(out / "config_echo.json"));

  // header plus one row per iteration
  const std::string metrics = slurp(out / "metrics.csv");
  int lines = 0;
  for (char c : metrics) lines += c == '\n';
  CHECK(lines == 5);

  const auto blocks = load_checkpoint((out / "params_final.bin").string());
  REQUIRE(blocks.size() == 3);  // two tabular heads + critic
  CHECK(blocks[0].role == BlockRole::Head);
  CHECK(blocks[2].role == BlockRole::Critic);
}

TEST_CASE("cli seed override lands in the echoed config") {
  const fs::path dir = temp_dir("cli_seed");
  const std::string cfg = write_config(
      dir, "run.json",
      R"({"env":"team_quadratic","iterations":3,"seed":5})");
  const fs::path out = dir / "out";
  const CliResult r = run_cli("train --config " + cfg + " --seed 77 --out " +
                              out.string());
  REQUIRE(r.code == 0);
  const RunConfig echo = config_from_json_text(slurp(out / "config_echo.json"));
  CHECK(echo.train.seed == 77);
  // quadratic runs checkpoint a raw parameter vector
  const auto blocks = load_checkpoint((out / "params_final.bin").string());
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].role == BlockRole::RawTheta);
}

TEST_CASE("cli verify prints one report line per suite") {
  const CliResult ok = run_cli("verify --suite gae --cases 50");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("gae") != std::string::npos);
  CHECK(ok.output.find("50") != std::string::npos);
  const CliResult all = run_cli("verify --suite all --cases 10 --seed 3");
  CHECK(all.code == 0);
  for (const std::string& name : verify_suite_names())
    CHECK(all.output.find(name) != std::string::npos);
}
