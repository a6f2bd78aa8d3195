#pragma once

#include <cstdint>
#include <functional>

#include "congrad/consensus.hpp"
#include "congrad/envs.hpp"
#include "congrad/estimation.hpp"
#include "congrad/policy.hpp"

namespace congrad {

// grasp: head direction = clip surrogate + coeff * u*
// mappo_baseline: head direction = clip surrogate (no consensus solve)
// grasp_aligned: head direction = factor * (vanilla gradient + u*)
enum class TrainMode { Grasp, MappoBaseline, GraspAligned };

struct TrainConfig {
  TrainMode mode = TrainMode::Grasp;
  int iterations = 1000;
  int rollout_episodes = 64;
  int ppo_epochs = 5;
  int minibatches = 1;
  double eta = 5e-4;
  double critic_eta = 5e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double value_clip_eps = 0.2;
  double consensus_coeff = 1.0;
  double consensus_tol = 1e-8;
  int consensus_max_iter = 10000;
  QpAlgorithm qp_algorithm = QpAlgorithm::ProjectedGradient;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool advantage_norm = false;
  int rollout_workers = 1;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument naming the field
};

// Flattened on-policy batch, episode-major. values_old / logp_old are frozen
// at collection time and advantage/target entries are episode-local.
struct RolloutBatch {
  std::size_t steps = 0;
  int num_agents = 0;
  std::vector<Observation> states;
  Vec values_old;
  Vec rewards;
  std::vector<std::uint8_t> terminal;
  Vec advantages;
  Vec targets;
  std::vector<std::vector<Observation>> obs;  // [agent][step]
  std::vector<std::vector<int>> actions;      // [agent][step]
  std::vector<Vec> logp_old;                  // [agent][step]
  Vec episode_returns;

  double mean_return() const;
  AgentBatchView agent_view(int agent, const std::vector<int>* idx = nullptr) const;
  CriticBatchView critic_view(const std::vector<int>* idx = nullptr) const;
};

// Episodes run in parallel workers with one derived stream per (iteration,
// episode) and are merged in episode order, so results do not depend on the
// worker count.
RolloutBatch collect_rollouts(const StepEnv& env_proto, const PolicyParams& policy,
                              const CriticParams& critic, const TrainConfig& cfg,
                              int iteration);

// Vanilla per-agent head gradients plus the consensus solve. aligned_dirs is
// filled only in grasp_aligned mode (zero direction when an agent's gradient
// and u* are both zero).
struct ConsensusStep {
  GradientSet gradients;
  ConsensusOutcome outcome;
  bool solved = false;
  std::vector<Vec> aligned_dirs;
};

ConsensusStep compute_consensus(const PolicyParams& policy,
                                const RolloutBatch& batch,
                                const TrainConfig& cfg);

// mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t) with rho recomputed
// from the current parameters
double ppo_surrogate(const PolicyParams& policy, int agent,
                     const AgentBatchView& view, double clip_eps);
PolicyGrad ppo_surrogate_grad(const PolicyParams& policy, int agent,
                              const AgentBatchView& view, double clip_eps,
                              ExecMode mode = ExecMode::Serial);

struct ActorOptimizers {
  std::vector<Optimizer> heads;
  Optimizer backbone;
};

void ppo_actor_update(PolicyParams& policy, const RolloutBatch& batch,
                      const ConsensusStep& cons, const TrainConfig& cfg,
                      ActorOptimizers& opt, int iteration);

void ppo_critic_update(CriticParams& critic, const RolloutBatch& batch,
                       const TrainConfig& cfg, Optimizer& opt, int iteration);

struct IterationMetrics {
  int iteration = 0;
  double mean_return = 0.0;
  double u_star_norm = 0.0;
  double kkt_margin = 0.0;  // min_j g_j'u* - ||u*||^2
  Vec g_norms;
  double actor_surrogate = 0.0;  // full batch, after the update
  double critic_loss = 0.0;      // full batch, after the update
  int qp_iters = 0;
  double wall_ms = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void write(const IterationMetrics& m) = 0;
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
  PolicyParams policy;
  CriticParams critic;
};

using SnapshotFn =
    std::function<void(int iteration, const PolicyParams&, const CriticParams&)>;

TrainResult train(const TrainConfig& cfg, const StepEnv& env_proto,
                  PolicyKind policy_kind, int hidden,
                  MetricsSink* sink = nullptr, const SnapshotFn& snapshot = {},
                  int snapshot_interval = 0);

struct QuadraticTrainResult {
  std::vector<IterationMetrics> metrics;
  Vec theta;
};

// Exact-gradient loop: no rollouts or critic, one consensus-realigned ascent
// step per iteration.
QuadraticTrainResult train_quadratic(const TrainConfig& cfg,
                                     const TeamQuadratic& env,
                                     MetricsSink* sink = nullptr);

// First-order expansion audit around random points: the realigned step
// direction d = (g_i + u*)_i must satisfy
//   |J(theta + eta d) - J(theta) - eta (sum ||g_i||^2 + sum g_i'u*)|
//     <= (1/2) eta^2 lambda_max ||d||^2
// and sum_i g_i'u* >= N ||u*||^2 up to solver tolerance.
struct MarginReport {
  int cases = 0;
  int failures = 0;
  double worst_expansion_excess = 0.0;  // max |actual-first| - bound
  double worst_alignment_slack = 0.0;   // min sum g_i'u* - N||u*||^2
  bool pass = false;
};

MarginReport quadratic_margin_check(const TeamQuadratic& env,
                                    const std::vector<double>& etas,
                                    int num_thetas, std::uint64_t seed);

}  // namespace congrad
