#include "congrad/run_config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace congrad {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "' is out of range");
  return static_cast<int>(x);
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean())
    throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config key '" + key + "' must be a nonnegative integer");
}

std::vector<double> as_double_array(const json& v, const std::string& key) {
  if (!v.is_array())
    throw ConfigError("config key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number())
      throw ConfigError("config key '" + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void apply_env_preset(RunConfig& cfg) {
  if (cfg.env == "matrix_climb") {
    cfg.policy = "tabular";
    cfg.num_agents = 2;
    cfg.num_actions = 3;
    cfg.episode_len = 8;
  } else if (cfg.env == "matrix_game") {
    cfg.policy = "tabular";
  } else if (cfg.env == "grid_spread") {
    cfg.policy = "mlp";
    cfg.num_agents = 3;
    cfg.num_actions = 5;
    cfg.grid_width = 5;
    cfg.episode_len = 25;
    cfg.collision_penalty = 1.0;
  } else if (cfg.env == "team_quadratic") {
    cfg.policy = "tabular";
    cfg.num_agents = 3;
    cfg.params_per_agent = 4;
    cfg.train.eta = 0.1;
    cfg.train.optimizer = OptimizerKind::Plain;
    cfg.train.iterations = 2000;
  } else {
    throw ConfigError("unknown env '" + cfg.env +
                      "' (expected matrix_climb, matrix_game, grid_spread or "
                      "team_quadratic)");
  }
}

}  // namespace

TrainMode parse_train_mode(const std::string& s) {
  if (s == "grasp") return TrainMode::Grasp;
  if (s == "mappo_baseline") return TrainMode::MappoBaseline;
  if (s == "grasp_aligned") return TrainMode::GraspAligned;
  throw ConfigError("unknown mode '" + s +
                    "' (expected grasp, mappo_baseline or grasp_aligned)");
}

std::string train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Grasp: return "grasp";
    case TrainMode::MappoBaseline: return "mappo_baseline";
    case TrainMode::GraspAligned: return "grasp_aligned";
  }
  return "grasp";
}

QpAlgorithm parse_qp_algorithm(const std::string& s) {
  if (s == "pgd") return QpAlgorithm::ProjectedGradient;
  if (s == "frank_wolfe") return QpAlgorithm::FrankWolfe;
  throw ConfigError("unknown qp_algorithm '" + s +
                    "' (expected pgd or frank_wolfe)");
}

std::string qp_algorithm_name(QpAlgorithm a) {
  return a == QpAlgorithm::ProjectedGradient ? "pgd" : "frank_wolfe";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "plain") return OptimizerKind::Plain;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or plain)");
}

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "plain";
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "tabular") return PolicyKind::Tabular;
  if (s == "mlp") return PolicyKind::Mlp;
  throw ConfigError("unknown policy '" + s + "' (expected tabular or mlp)");
}

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  if (!j.contains("env")) throw ConfigError("missing required config key 'env'");

  RunConfig cfg;
  cfg.env = as_string(j.at("env"), "env");
  apply_env_preset(cfg);

  using Handler = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Handler> schema = {
      {"env", [](const json&, const std::string&) {}},
      {"mode",
       [&](const json& v, const std::string& k) {
         cfg.train.mode = parse_train_mode(as_string(v, k));
       }},
      {"policy",
       [&](const json& v, const std::string& k) {
         parse_policy_kind(as_string(v, k));
         cfg.policy = as_string(v, k);
       }},
      {"hidden",
       [&](const json& v, const std::string& k) { cfg.hidden = as_int(v, k); }},
      {"seed",
       [&](const json& v, const std::string& k) { cfg.train.seed = as_u64(v, k); }},
      {"iterations",
       [&](const json& v, const std::string& k) {
         cfg.train.iterations = as_int(v, k);
       }},
      {"rollout_episodes",
       [&](const json& v, const std::string& k) {
         cfg.train.rollout_episodes = as_int(v, k);
       }},
      {"ppo_epochs",
       [&](const json& v, const std::string& k) {
         cfg.train.ppo_epochs = as_int(v, k);
       }},
      {"minibatches",
       [&](const json& v, const std::string& k) {
         cfg.train.minibatches = as_int(v, k);
       }},
      {"eta",
       [&](const json& v, const std::string& k) { cfg.train.eta = as_double(v, k); }},
      {"critic_eta",
       [&](const json& v, const std::string& k) {
         cfg.train.critic_eta = as_double(v, k);
       }},
      {"gamma",
       [&](const json& v, const std::string& k) {
         cfg.train.gamma = as_double(v, k);
       }},
      {"gae_lambda",
       [&](const json& v, const std::string& k) {
         cfg.train.lambda = as_double(v, k);
       }},
      {"clip_eps",
       [&](const json& v, const std::string& k) {
         cfg.train.clip_eps = as_double(v, k);
       }},
      {"value_clip_eps",
       [&](const json& v, const std::string& k) {
         cfg.train.value_clip_eps = as_double(v, k);
       }},
      {"consensus_coeff",
       [&](const json& v, const std::string& k) {
         cfg.train.consensus_coeff = as_double(v, k);
       }},
      {"consensus_tol",
       [&](const json& v, const std::string& k) {
         cfg.train.consensus_tol = as_double(v, k);
       }},
      {"consensus_max_iter",
       [&](const json& v, const std::string& k) {
         cfg.train.consensus_max_iter = as_int(v, k);
       }},
      {"qp_algorithm",
       [&](const json& v, const std::string& k) {
         cfg.train.qp_algorithm = parse_qp_algorithm(as_string(v, k));
       }},
      {"optimizer",
       [&](const json& v, const std::string& k) {
         cfg.train.optimizer = parse_optimizer(as_string(v, k));
       }},
      {"advantage_norm",
       [&](const json& v, const std::string& k) {
         cfg.train.advantage_norm = as_bool(v, k);
       }},
      {"rollout_workers",
       [&](const json& v, const std::string& k) {
         cfg.train.rollout_workers = as_int(v, k);
       }},
      {"num_agents",
       [&](const json& v, const std::string& k) { cfg.num_agents = as_int(v, k); }},
      {"num_actions",
       [&](const json& v, const std::string& k) { cfg.num_actions = as_int(v, k); }},
      {"episode_len",
       [&](const json& v, const std::string& k) { cfg.episode_len = as_int(v, k); }},
      {"grid_width",
       [&](const json& v, const std::string& k) { cfg.grid_width = as_int(v, k); }},
      {"collision_penalty",
       [&](const json& v, const std::string& k) {
         cfg.collision_penalty = as_double(v, k);
       }},
      {"params_per_agent",
       [&](const json& v, const std::string& k) {
         cfg.params_per_agent = as_int(v, k);
       }},
      {"env_seed",
       [&](const json& v, const std::string& k) { cfg.env_seed = as_u64(v, k); }},
      {"payoff",
       [&](const json& v, const std::string& k) {
         cfg.payoff = as_double_array(v, k);
       }},
      {"metrics_format",
       [&](const json& v, const std::string& k) {
         const std::string f = as_string(v, k);
         if (f != "csv" && f != "jsonl")
           throw ConfigError("unknown metrics_format '" + f +
                             "' (expected csv or jsonl)");
         cfg.metrics_format = f;
       }},
      {"timing",
       [&](const json& v, const std::string& k) { cfg.timing = as_bool(v, k); }},
      {"checkpoint_interval",
       [&](const json& v, const std::string& k) {
         cfg.checkpoint_interval = as_int(v, k);
         if (cfg.checkpoint_interval < 0)
           throw ConfigError("config key 'checkpoint_interval' must be >= 0");
       }},
  };

  for (const auto& item : j.items()) {
    const auto it = schema.find(item.key());
    if (it == schema.end())
      throw ConfigError("unknown config key '" + item.key() + "'");
    it->second(item.value(), item.key());
  }

  if (cfg.env == "matrix_game" && cfg.payoff.empty())
    throw ConfigError("env 'matrix_game' requires the 'payoff' key");
  if (cfg.env != "matrix_game" && j.contains("payoff"))
    throw ConfigError("config key 'payoff' is only valid for env 'matrix_game'");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string render_config(const RunConfig& cfg) {
  ordered_json j;
  j["env"] = cfg.env;
  j["mode"] = train_mode_name(cfg.train.mode);
  j["policy"] = cfg.policy;
  j["hidden"] = cfg.hidden;
  j["seed"] = cfg.train.seed;
  j["iterations"] = cfg.train.iterations;
  j["rollout_episodes"] = cfg.train.rollout_episodes;
  j["ppo_epochs"] = cfg.train.ppo_epochs;
  j["minibatches"] = cfg.train.minibatches;
  j["eta"] = cfg.train.eta;
  j["critic_eta"] = cfg.train.critic_eta;
  j["gamma"] = cfg.train.gamma;
  j["gae_lambda"] = cfg.train.lambda;
  j["clip_eps"] = cfg.train.clip_eps;
  j["value_clip_eps"] = cfg.train.value_clip_eps;
  j["consensus_coeff"] = cfg.train.consensus_coeff;
  j["consensus_tol"] = cfg.train.consensus_tol;
  j["consensus_max_iter"] = cfg.train.consensus_max_iter;
  j["qp_algorithm"] = qp_algorithm_name(cfg.train.qp_algorithm);
  j["optimizer"] = optimizer_name(cfg.train.optimizer);
  j["advantage_norm"] = cfg.train.advantage_norm;
  j["rollout_workers"] = cfg.train.rollout_workers;
  j["num_agents"] = cfg.num_agents;
  j["num_actions"] = cfg.num_actions;
  j["episode_len"] = cfg.episode_len;
  j["grid_width"] = cfg.grid_width;
  j["collision_penalty"] = cfg.collision_penalty;
  j["params_per_agent"] = cfg.params_per_agent;
  j["env_seed"] = cfg.env_seed;
  if (cfg.env == "matrix_game") j["payoff"] = cfg.payoff;
  j["metrics_format"] = cfg.metrics_format;
  j["timing"] = cfg.timing;
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  return j.dump(2) + "\n";
}

std::unique_ptr<StepEnv> make_env(const RunConfig& cfg) {
  if (cfg.env == "matrix_climb") {
    if (cfg.num_agents != 2 || cfg.num_actions != 3)
      throw ConfigError("env 'matrix_climb' is fixed at 2 agents and 3 actions");
    return std::make_unique<MatrixGame>(MatrixGame::climb(cfg.episode_len));
  }
  if (cfg.env == "matrix_game")
    return std::make_unique<MatrixGame>(cfg.payoff, cfg.num_agents,
                                        cfg.num_actions, cfg.episode_len);
  if (cfg.env == "grid_spread") {
    if (cfg.num_actions != 5)
      throw ConfigError("env 'grid_spread' is fixed at 5 actions");
    return std::make_unique<GridSpread>(cfg.num_agents, cfg.grid_width,
                                        cfg.episode_len, cfg.collision_penalty);
  }
  if (cfg.env == "team_quadratic") return nullptr;
  throw ConfigError("unknown env '" + cfg.env + "'");
}

TeamQuadratic make_quadratic(const RunConfig& cfg) {
  if (cfg.env != "team_quadratic")
    throw ConfigError("env '" + cfg.env + "' is not team_quadratic");
  return TeamQuadratic(cfg.num_agents, cfg.params_per_agent, cfg.env_seed);
}

}  // namespace congrad
