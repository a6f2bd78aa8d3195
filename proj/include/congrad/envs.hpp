#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "congrad/numerics.hpp"
#include "congrad/policy.hpp"
#include "congrad/rng.hpp"

namespace congrad {

struct EnvSpec {
  int num_agents = 0;
  int num_actions = 0;
  int obs_count = 0;   // discrete per-agent observations; 0 = not enumerable
  int obs_dim = 0;     // per-agent feature width
  int state_count = 0; // discrete global states; 0 = not enumerable
  int state_dim = 0;   // global state feature width
  int episode_len = 0;
};

struct StepResult {
  double reward = 0.0;
  bool terminal = false;
};

// Shared-reward environment with simultaneous discrete actions.
class StepEnv {
 public:
  virtual ~StepEnv() = default;
  virtual EnvSpec spec() const = 0;
  virtual void reset(RngStream& rng) = 0;
  virtual StepResult step(const std::vector<int>& actions) = 0;
  virtual Observation agent_obs(int agent) const = 0;
  virtual Observation global_state() const = 0;
  virtual std::unique_ptr<StepEnv> clone() const = 0;
};

// Repeated matrix game: one payoff lookup per step, a single dummy
// observation for the agents, and the step index as the global state so the
// critic sees a finite chain.
class MatrixGame : public StepEnv {
 public:
  MatrixGame(std::vector<double> payoff, int num_agents, int num_actions,
             int episode_len);
  static MatrixGame climb(int episode_len);

  EnvSpec spec() const override;
  void reset(RngStream& rng) override;
  StepResult step(const std::vector<int>& actions) override;
  Observation agent_obs(int agent) const override;
  Observation global_state() const override;
  std::unique_ptr<StepEnv> clone() const override;

  double payoff_at(const std::vector<int>& actions) const;

 private:
  std::vector<double> payoff_;
  int num_agents_ = 0;
  int num_actions_ = 0;
  int episode_len_ = 0;
  int t_ = 0;
};

// -sum_l min_i manhattan(agent_i, landmark_l) - penalty * colocated pairs
double grid_spread_reward(const std::vector<std::pair<int, int>>& agents,
                          const std::vector<std::pair<int, int>>& landmarks,
                          double collision_penalty);

// Agents move on a width x width grid trying to cover as many landmarks as
// possible while avoiding sharing cells. Fully observable: every agent sees
// all coordinates.
class GridSpread : public StepEnv {
 public:
  GridSpread(int num_agents, int width, int episode_len,
             double collision_penalty);

  EnvSpec spec() const override;
  void reset(RngStream& rng) override;
  StepResult step(const std::vector<int>& actions) override;
  Observation agent_obs(int agent) const override;
  Observation global_state() const override;
  std::unique_ptr<StepEnv> clone() const override;

  const std::vector<std::pair<int, int>>& agent_positions() const {
    return agents_;
  }
  const std::vector<std::pair<int, int>>& landmark_positions() const {
    return landmarks_;
  }

 private:
  int num_agents_ = 0;
  int width_ = 0;
  int episode_len_ = 0;
  double collision_penalty_ = 0.0;
  int t_ = 0;
  std::vector<std::pair<int, int>> agents_;
  std::vector<std::pair<int, int>> landmarks_;
};

// Smooth cooperative objective J(theta) = -(1/2)(theta - theta*)' Q
// (theta - theta*) with Q = A'A + 0.1 I drawn from the seed; gradients are
// exact per-agent blocks, so the training loop can run without sampling.
class TeamQuadratic {
 public:
  TeamQuadratic(int num_agents, int params_per_agent, std::uint64_t seed);

  int num_agents() const { return num_agents_; }
  int block_size() const { return block_size_; }
  int dim() const { return num_agents_ * block_size_; }

  double objective(const Vec& theta) const;
  std::vector<Vec> block_gradients(const Vec& theta) const;
  Vec sample_initial(RngStream& rng) const;

  const std::vector<double>& q() const { return q_; }
  const Vec& optimum() const { return theta_star_; }
  double lambda_max() const { return lambda_max_; }

 private:
  int num_agents_ = 0;
  int block_size_ = 0;
  std::vector<double> q_;  // row-major, SPD
  Vec theta_star_;
  double lambda_max_ = 0.0;
};

}  // namespace congrad
