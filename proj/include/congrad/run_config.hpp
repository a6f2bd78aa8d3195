#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "congrad/envs.hpp"
#include "congrad/trainer.hpp"

namespace congrad {

// raised for malformed config files (CLI maps it to exit code 2)
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat JSON run description. env selects a preset that fills defaults; any
// explicit key overrides the preset; unknown keys are rejected by name.
struct RunConfig {
  std::string env;            // matrix_climb | matrix_game | grid_spread | team_quadratic
  std::string policy;         // tabular | mlp
  int hidden = 16;
  TrainConfig train;

  int num_agents = 2;
  int num_actions = 3;
  int episode_len = 8;
  int grid_width = 5;
  double collision_penalty = 1.0;
  int params_per_agent = 4;
  std::uint64_t env_seed = 7;
  std::vector<double> payoff;  // matrix_game only, row-major joint table

  std::string metrics_format = "csv";  // csv | jsonl
  bool timing = false;                 // when false wall_ms is written as 0
  int checkpoint_interval = 0;         // 0 = final checkpoint only
};

RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical echo of the effective settings; parsing it back reproduces the
// same RunConfig.
std::string render_config(const RunConfig& cfg);

TrainMode parse_train_mode(const std::string& s);
std::string train_mode_name(TrainMode m);
QpAlgorithm parse_qp_algorithm(const std::string& s);
std::string qp_algorithm_name(QpAlgorithm a);
OptimizerKind parse_optimizer(const std::string& s);
std::string optimizer_name(OptimizerKind k);
PolicyKind parse_policy_kind(const std::string& s);

// Step environment described by the config; null for team_quadratic.
std::unique_ptr<StepEnv> make_env(const RunConfig& cfg);
TeamQuadratic make_quadratic(const RunConfig& cfg);

}  // namespace congrad
