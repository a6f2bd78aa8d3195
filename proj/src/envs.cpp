#include "congrad/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace congrad {

namespace {

constexpr std::uint64_t kQuadraticStream = 0x71ad5eedULL;

void check_joint_action(const std::vector<int>& actions, int num_agents,
                        int num_actions) {
  if (static_cast<int>(actions.size()) != num_agents)
    throw std::invalid_argument("step: expected " + std::to_string(num_agents) +
                                " actions, got " + std::to_string(actions.size()));
  for (int i = 0; i < num_agents; ++i)
    if (actions[i] < 0 || actions[i] >= num_actions)
      throw std::invalid_argument("step: action " + std::to_string(actions[i]) +
                                  " for agent " + std::to_string(i) +
                                  " out of range");
}

}  // namespace

MatrixGame::MatrixGame(std::vector<double> payoff, int num_agents,
                       int num_actions, int episode_len)
    : payoff_(std::move(payoff)),
      num_agents_(num_agents),
      num_actions_(num_actions),
      episode_len_(episode_len) {
  if (num_agents_ < 1) throw std::invalid_argument("MatrixGame: need agents >= 1");
  if (num_actions_ < 1) throw std::invalid_argument("MatrixGame: need actions >= 1");
  if (episode_len_ < 1)
    throw std::invalid_argument("MatrixGame: need episode_len >= 1");
  std::size_t expect = 1;
  for (int i = 0; i < num_agents_; ++i) expect *= num_actions_;
  if (payoff_.size() != expect)
    throw std::invalid_argument("MatrixGame: payoff tensor needs " +
                                std::to_string(expect) + " entries, got " +
                                std::to_string(payoff_.size()));
  if (!all_finite(payoff_))
    throw std::invalid_argument("MatrixGame: non-finite payoff entry");
}

MatrixGame MatrixGame::climb(int episode_len) {
  const double raw[9] = {11, -30, 0, -30, 7, 6, 0, 0, 5};
  std::vector<double> payoff(9);
  for (int i = 0; i < 9; ++i) payoff[i] = 0.1 * raw[i];
  return MatrixGame(std::move(payoff), 2, 3, episode_len);
}

EnvSpec MatrixGame::spec() const {
  EnvSpec s;
  s.num_agents = num_agents_;
  s.num_actions = num_actions_;
  s.obs_count = 1;
  s.obs_dim = 1;
  s.state_count = episode_len_ + 1;
  s.state_dim = episode_len_ + 1;
  s.episode_len = episode_len_;
  return s;
}

void MatrixGame::reset(RngStream&) { t_ = 0; }

double MatrixGame::payoff_at(const std::vector<int>& actions) const {
  check_joint_action(actions, num_agents_, num_actions_);
  std::size_t idx = 0;
  for (int i = 0; i < num_agents_; ++i)
    idx = idx * num_actions_ + static_cast<std::size_t>(actions[i]);
  return payoff_[idx];
}

StepResult MatrixGame::step(const std::vector<int>& actions) {
  if (t_ >= episode_len_)
    throw std::runtime_error("MatrixGame: step after terminal");
  const double r = payoff_at(actions);
  ++t_;
  return {r, t_ == episode_len_};
}

Observation MatrixGame::agent_obs(int agent) const {
  if (agent < 0 || agent >= num_agents_)
    throw std::invalid_argument("MatrixGame: agent index out of range");
  Observation o;
  o.id = 0;
  o.features = {1.0};
  return o;
}

Observation MatrixGame::global_state() const {
  Observation o;
  o.id = t_;
  o.features.assign(episode_len_ + 1, 0.0);
  o.features[t_] = 1.0;
  return o;
}

std::unique_ptr<StepEnv> MatrixGame::clone() const {
  return std::make_unique<MatrixGame>(*this);
}

double grid_spread_reward(const std::vector<std::pair<int, int>>& agents,
                          const std::vector<std::pair<int, int>>& landmarks,
                          double collision_penalty) {
  double r = 0.0;
  for (const auto& lm : landmarks) {
    int best = std::abs(lm.first - agents[0].first) +
               std::abs(lm.second - agents[0].second);
    for (std::size_t i = 1; i < agents.size(); ++i) {
      const int d = std::abs(lm.first - agents[i].first) +
                    std::abs(lm.second - agents[i].second);
      best = std::min(best, d);
    }
    r -= best;
  }
  for (std::size_t i = 0; i < agents.size(); ++i)
    for (std::size_t j = i + 1; j < agents.size(); ++j)
      if (agents[i] == agents[j]) r -= collision_penalty;
  return r;
}

GridSpread::GridSpread(int num_agents, int width, int episode_len,
                       double collision_penalty)
    : num_agents_(num_agents),
      width_(width),
      episode_len_(episode_len),
      collision_penalty_(collision_penalty) {
  if (num_agents_ < 1) throw std::invalid_argument("GridSpread: need agents >= 1");
  if (width_ < 2) throw std::invalid_argument("GridSpread: need width >= 2");
  if (episode_len_ < 1)
    throw std::invalid_argument("GridSpread: need episode_len >= 1");
  if (collision_penalty_ < 0.0)
    throw std::invalid_argument("GridSpread: collision_penalty must be >= 0");
  agents_.assign(num_agents_, {0, 0});
  landmarks_.assign(num_agents_, {0, 0});
}

EnvSpec GridSpread::spec() const {
  EnvSpec s;
  s.num_agents = num_agents_;
  s.num_actions = 5;
  s.obs_count = 0;
  s.obs_dim = 4 * num_agents_;
  s.state_count = 0;
  s.state_dim = 4 * num_agents_;
  s.episode_len = episode_len_;
  return s;
}

void GridSpread::reset(RngStream& rng) {
  t_ = 0;
  for (auto& a : agents_) {
    a.first = rng.uniform_int(width_);
    a.second = rng.uniform_int(width_);
  }
  for (auto& l : landmarks_) {
    l.first = rng.uniform_int(width_);
    l.second = rng.uniform_int(width_);
  }
}

StepResult GridSpread::step(const std::vector<int>& actions) {
  if (t_ >= episode_len_)
    throw std::runtime_error("GridSpread: step after terminal");
  check_joint_action(actions, num_agents_, 5);
  for (int i = 0; i < num_agents_; ++i) {
    auto& [x, y] = agents_[i];
    switch (actions[i]) {
      case 0: break;
      case 1: y = std::min(y + 1, width_ - 1); break;
      case 2: y = std::max(y - 1, 0); break;
      case 3: x = std::max(x - 1, 0); break;
      case 4: x = std::min(x + 1, width_ - 1); break;
    }
  }
  const double r = grid_spread_reward(agents_, landmarks_, collision_penalty_);
  ++t_;
  return {r, t_ == episode_len_};
}

Observation GridSpread::agent_obs(int agent) const {
  if (agent < 0 || agent >= num_agents_)
    throw std::invalid_argument("GridSpread: agent index out of range");
  return global_state();  // fully observable
}

Observation GridSpread::global_state() const {
  Observation o;
  o.id = -1;
  o.features.reserve(4 * num_agents_);
  const double scale = 1.0 / (width_ - 1);
  for (const auto& a : agents_) {
    o.features.push_back(a.first * scale);
    o.features.push_back(a.second * scale);
  }
  for (const auto& l : landmarks_) {
    o.features.push_back(l.first * scale);
    o.features.push_back(l.second * scale);
  }
  return o;
}

std::unique_ptr<StepEnv> GridSpread::clone() const {
  return std::make_unique<GridSpread>(*this);
}

TeamQuadratic::TeamQuadratic(int num_agents, int params_per_agent,
                             std::uint64_t seed)
    : num_agents_(num_agents), block_size_(params_per_agent) {
  if (num_agents_ < 1)
    throw std::invalid_argument("TeamQuadratic: need agents >= 1");
  if (block_size_ < 1)
    throw std::invalid_argument("TeamQuadratic: need params_per_agent >= 1");
  const int n = dim();
  RngStream rng(seed, kQuadraticStream);
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (double& x : a) x = rng.uniform(-0.3, 0.3);
  q_.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += a[static_cast<std::size_t>(k) * n + i] *
             a[static_cast<std::size_t>(k) * n + j];
      q_[static_cast<std::size_t>(i) * n + j] = s + (i == j ? 0.1 : 0.0);
    }
  std::vector<double> chk = q_;
  cholesky_factor(chk, n);  // SPD or throw
  theta_star_.resize(n);
  for (double& x : theta_star_) x = rng.uniform(-1.0, 1.0);
  GramMatrix shim;
  shim.n = n;
  shim.a = q_;
  lambda_max_ = power_iteration(shim);
}

double TeamQuadratic::objective(const Vec& theta) const {
  const int n = dim();
  if (static_cast<int>(theta.size()) != n)
    throw std::invalid_argument("TeamQuadratic: theta must have " +
                                std::to_string(n) + " entries");
  double j = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      s += q_[static_cast<std::size_t>(i) * n + k] * (theta[k] - theta_star_[k]);
    j += (theta[i] - theta_star_[i]) * s;
  }
  return -0.5 * j;
}

std::vector<Vec> TeamQuadratic::block_gradients(const Vec& theta) const {
  const int n = dim();
  if (static_cast<int>(theta.size()) != n)
    throw std::invalid_argument("TeamQuadratic: theta must have " +
                                std::to_string(n) + " entries");
  std::vector<Vec> blocks(num_agents_, Vec(block_size_));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      s += q_[static_cast<std::size_t>(i) * n + k] * (theta[k] - theta_star_[k]);
    blocks[i / block_size_][i % block_size_] = -s;
  }
  return blocks;
}

Vec TeamQuadratic::sample_initial(RngStream& rng) const {
  Vec theta(dim());
  for (double& x : theta) x = rng.uniform(-1.0, 1.0);
  return theta;
}

}  // namespace congrad
