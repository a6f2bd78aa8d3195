#include "congrad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace congrad {

namespace {

constexpr std::uint64_t kPolicyInitStream = 1;
constexpr std::uint64_t kCriticInitStream = 2;
constexpr std::uint64_t kThetaInitStream = 3;

// Disjoint stream families: episode rollouts and minibatch shuffles must
// never collide with each other or with the init streams above.
std::uint64_t episode_stream(int iteration, int episode) {
  return (1ULL << 62) | (static_cast<std::uint64_t>(iteration) << 24) |
         static_cast<std::uint64_t>(episode);
}

std::uint64_t shuffle_stream(int iteration, int epoch) {
  return (2ULL << 62) | (static_cast<std::uint64_t>(iteration) << 17) |
         static_cast<std::uint64_t>(epoch);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("train config: " + msg);
}

// Same permutation for the actor and critic passes of one epoch.
std::vector<int> epoch_permutation(std::uint64_t seed, int iteration, int epoch,
                                   std::size_t n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed, shuffle_stream(iteration, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

// [m*n/M, (m+1)*n/M) slices cover every sample with sizes differing by at
// most one
std::vector<int> minibatch_indices(const std::vector<int>& perm, int m,
                                   int minibatches) {
  const std::size_t n = perm.size();
  const std::size_t lo = n * static_cast<std::size_t>(m) / minibatches;
  const std::size_t hi = n * static_cast<std::size_t>(m + 1) / minibatches;
  return std::vector<int>(perm.begin() + lo, perm.begin() + hi);
}

ExecMode exec_mode(const TrainConfig& cfg) {
  return cfg.rollout_workers > 1 ? ExecMode::Parallel : ExecMode::Serial;
}

bool use_consensus(const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::MappoBaseline:
      return false;
    case TrainMode::Grasp:
      return cfg.consensus_coeff != 0.0;
    case TrainMode::GraspAligned:
      return true;
  }
  return false;
}

void check_finite(const Vec& v, const std::string& what, int iteration) {
  if (!all_finite(v))
    throw std::runtime_error("train: non-finite " + what + " at iteration " +
                             std::to_string(iteration));
}

}  // namespace

void TrainConfig::validate() const {
  require(iterations >= 1, "iterations must be >= 1");
  require(rollout_episodes >= 1 && rollout_episodes < (1 << 24),
          "rollout_episodes must be in [1, 16777215]");
  require(ppo_epochs >= 1 && ppo_epochs <= (1 << 17),
          "ppo_epochs must be in [1, 131072]");
  require(minibatches >= 1, "minibatches must be >= 1");
  require(std::isfinite(eta) && eta > 0.0, "eta must be positive");
  require(std::isfinite(critic_eta) && critic_eta > 0.0,
          "critic_eta must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0, 1]");
  require(std::isfinite(clip_eps) && clip_eps > 0.0, "clip_eps must be positive");
  require(std::isfinite(value_clip_eps) && value_clip_eps > 0.0,
          "value_clip_eps must be positive");
  require(std::isfinite(consensus_coeff) && consensus_coeff >= 0.0,
          "consensus_coeff must be >= 0");
  require(std::isfinite(consensus_tol) && consensus_tol >= 0.0,
          "consensus_tol must be >= 0");
  require(consensus_max_iter >= 0, "consensus_max_iter must be >= 0");
  require(rollout_workers >= 1, "rollout_workers must be >= 1");
}

double RolloutBatch::mean_return() const {
  if (episode_returns.empty()) return 0.0;
  double s = 0.0;
  for (double r : episode_returns) s += r;
  return s / static_cast<double>(episode_returns.size());
}

AgentBatchView RolloutBatch::agent_view(int agent,
                                        const std::vector<int>* idx) const {
  if (agent < 0 || agent >= num_agents)
    throw std::invalid_argument("rollout batch: agent index " +
                                std::to_string(agent) + " out of range");
  AgentBatchView v;
  v.obs = obs[agent].data();
  v.actions = actions[agent].data();
  v.logp_old = logp_old[agent].data();
  v.advantages = advantages.data();
  v.idx = idx ? idx->data() : nullptr;
  v.n = idx ? idx->size() : steps;
  return v;
}

CriticBatchView RolloutBatch::critic_view(const std::vector<int>* idx) const {
  CriticBatchView v;
  v.states = states.data();
  v.values_old = values_old.data();
  v.targets = targets.data();
  v.idx = idx ? idx->data() : nullptr;
  v.n = idx ? idx->size() : steps;
  return v;
}

RolloutBatch collect_rollouts(const StepEnv& env_proto,
                              const PolicyParams& policy,
                              const CriticParams& critic,
                              const TrainConfig& cfg, int iteration) {
  const EnvSpec spec = env_proto.spec();
  const int agents = spec.num_agents;
  if (policy.layout.num_agents != agents)
    throw std::invalid_argument(
        "collect_rollouts: policy has " +
        std::to_string(policy.layout.num_agents) + " agents, environment has " +
        std::to_string(agents));
  const int episodes = cfg.rollout_episodes;

  struct Episode {
    std::vector<Observation> states;
    Vec values;
    Vec rewards;
    std::vector<std::uint8_t> term;
    std::vector<std::vector<Observation>> obs;
    std::vector<std::vector<int>> actions;
    std::vector<Vec> logp;
  };
  std::vector<Episode> eps(episodes);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(cfg.rollout_workers)
#endif
  for (int e = 0; e < episodes; ++e) {
    Episode& ep = eps[e];
    ep.obs.resize(agents);
    ep.actions.resize(agents);
    ep.logp.resize(agents);
    std::unique_ptr<StepEnv> env = env_proto.clone();
    RngStream rng(cfg.seed, episode_stream(iteration, e));
    env->reset(rng);
    bool done = false;
    while (!done) {
      ep.states.push_back(env->global_state());
      ep.values.push_back(critic_value(critic, ep.states.back()));
      std::vector<int> joint(agents);
      for (int i = 0; i < agents; ++i) {
        Observation o = env->agent_obs(i);
        const SampledAction a = sample_action(policy, i, o, rng);
        joint[i] = a.action;
        ep.obs[i].push_back(std::move(o));
        ep.actions[i].push_back(a.action);
        ep.logp[i].push_back(a.log_prob);
      }
      const StepResult r = env->step(joint);
      ep.rewards.push_back(r.reward);
      ep.term.push_back(r.terminal ? 1 : 0);
      done = r.terminal;
    }
    ep.values.push_back(critic_value(critic, env->global_state()));
  }

  RolloutBatch batch;
  batch.num_agents = agents;
  batch.obs.resize(agents);
  batch.actions.resize(agents);
  batch.logp_old.resize(agents);
  batch.episode_returns.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    Episode& ep = eps[e];
    const Vec deltas = td_errors(ep.rewards, ep.values, ep.term, cfg.gamma);
    const Vec adv = gae_advantages(deltas, ep.term, cfg.gamma, cfg.lambda);
    const Vec vals(ep.values.begin(), ep.values.end() - 1);
    const Vec tgt = return_targets(adv, vals);
    double ret = 0.0;
    for (double r : ep.rewards) ret += r;
    batch.episode_returns.push_back(ret);
    batch.states.insert(batch.states.end(),
                        std::make_move_iterator(ep.states.begin()),
                        std::make_move_iterator(ep.states.end()));
    batch.values_old.insert(batch.values_old.end(), vals.begin(), vals.end());
    batch.rewards.insert(batch.rewards.end(), ep.rewards.begin(),
                         ep.rewards.end());
    batch.terminal.insert(batch.terminal.end(), ep.term.begin(), ep.term.end());
    batch.advantages.insert(batch.advantages.end(), adv.begin(), adv.end());
    batch.targets.insert(batch.targets.end(), tgt.begin(), tgt.end());
    for (int i = 0; i < agents; ++i) {
      batch.obs[i].insert(batch.obs[i].end(),
                          std::make_move_iterator(ep.obs[i].begin()),
                          std::make_move_iterator(ep.obs[i].end()));
      batch.actions[i].insert(batch.actions[i].end(), ep.actions[i].begin(),
                              ep.actions[i].end());
      batch.logp_old[i].insert(batch.logp_old[i].end(), ep.logp[i].begin(),
                               ep.logp[i].end());
    }
  }
  batch.steps = batch.rewards.size();

  if (cfg.advantage_norm && batch.steps > 1) {
    double mean = 0.0;
    for (double a : batch.advantages) mean += a;
    mean /= static_cast<double>(batch.steps);
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(batch.steps);
    const double scale = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : batch.advantages) a = (a - mean) * scale;
  }
  return batch;
}

ConsensusStep compute_consensus(const PolicyParams& policy,
                                const RolloutBatch& batch,
                                const TrainConfig& cfg) {
  const ExecMode mode = exec_mode(cfg);
  ConsensusStep step;
  step.gradients.g.reserve(policy.layout.num_agents);
  for (int i = 0; i < policy.layout.num_agents; ++i)
    step.gradients.g.push_back(
        local_policy_gradient(policy, i, batch.agent_view(i), mode).head);

  if (use_consensus(cfg)) {
    step.outcome =
        solve_consensus_qp(step.gradients, cfg.consensus_tol,
                           cfg.consensus_max_iter, cfg.qp_algorithm, mode);
    step.solved = true;
  } else {
    step.outcome.u_star.assign(policy.layout.head_size(), 0.0);
  }

  if (cfg.mode == TrainMode::GraspAligned) {
    step.aligned_dirs.reserve(step.gradients.count());
    for (const Vec& g : step.gradients.g) {
      if (norm_sq(g) + norm_sq(step.outcome.u_star) == 0.0)
        step.aligned_dirs.emplace_back(g.size(), 0.0);
      else
        step.aligned_dirs.push_back(aligned_direction(g, step.outcome.u_star));
    }
  }
  return step;
}

double ppo_surrogate(const PolicyParams& policy, int agent,
                     const AgentBatchView& view, double clip_eps) {
  if (view.n == 0) throw std::invalid_argument("ppo_surrogate: empty batch");
  double s = 0.0;
  for (std::size_t k = 0; k < view.n; ++k) {
    const std::size_t t = view.sample(k);
    const double lp = log_prob(policy, agent, view.obs[t], view.actions[t]);
    const double rho = std::exp(lp - view.logp_old[t]);
    const double adv = view.advantages[t];
    const double clipped =
        std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
    s += std::min(rho * adv, clipped);
  }
  return s / static_cast<double>(view.n);
}

PolicyGrad ppo_surrogate_grad(const PolicyParams& policy, int agent,
                              const AgentBatchView& view, double clip_eps,
                              ExecMode mode) {
  if (view.n == 0)
    throw std::invalid_argument("ppo_surrogate_grad: empty batch");
  const std::size_t hs = policy.layout.head_size();
  const std::size_t bs = policy.layout.backbone_size();
  Vec combined(hs + bs);
  accumulate_chunked(
      view.n, hs + bs,
      [&](std::size_t k, double* acc) {
        const std::size_t t = view.sample(k);
        const double lp =
            log_prob(policy, agent, view.obs[t], view.actions[t]);
        const double rho = std::exp(lp - view.logp_old[t]);
        const double adv = view.advantages[t];
        // min(rho*adv, clip(rho)*adv) passes gradient only while the
        // unclipped branch is active; ties take the unclipped branch
        const bool active = adv >= 0.0 ? rho <= 1.0 + clip_eps
                                       : rho >= 1.0 - clip_eps;
        if (!active) return;
        const PolicyGrad g =
            logprob_grad(policy, agent, view.obs[t], view.actions[t]);
        const double w = rho * adv;
        for (std::size_t i = 0; i < hs; ++i) acc[i] += w * g.head[i];
        for (std::size_t i = 0; i < bs; ++i) acc[hs + i] += w * g.backbone[i];
      },
      combined.data(), mode);
  PolicyGrad out;
  out.head.assign(combined.begin(), combined.begin() + hs);
  out.backbone.assign(combined.begin() + hs, combined.end());
  const double inv = 1.0 / static_cast<double>(view.n);
  for (double& x : out.head) x *= inv;
  for (double& x : out.backbone) x *= inv;
  return out;
}

void ppo_actor_update(PolicyParams& policy, const RolloutBatch& batch,
                      const ConsensusStep& cons, const TrainConfig& cfg,
                      ActorOptimizers& opt, int iteration) {
  const int agents = policy.layout.num_agents;
  if (static_cast<int>(opt.heads.size()) != agents)
    throw std::invalid_argument("ppo_actor_update: expected " +
                                std::to_string(agents) + " head optimizers");
  if (cfg.minibatches > static_cast<int>(batch.steps))
    throw std::invalid_argument("ppo_actor_update: minibatches exceed batch size");
  const ExecMode mode = exec_mode(cfg);
  const bool mlp = policy.layout.kind == PolicyKind::Mlp;
  const bool aligned = cfg.mode == TrainMode::GraspAligned;
  const bool add_u = cfg.mode == TrainMode::Grasp && cfg.consensus_coeff != 0.0;
  const std::size_t bs = policy.layout.backbone_size();

  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::vector<int> perm;
    if (cfg.minibatches > 1)
      perm = epoch_permutation(cfg.seed, iteration, epoch, batch.steps);
    for (int m = 0; m < cfg.minibatches; ++m) {
      std::vector<int> idx;
      const std::vector<int>* sel = nullptr;
      if (cfg.minibatches > 1) {
        idx = minibatch_indices(perm, m, cfg.minibatches);
        sel = &idx;
      }
      // all directions are computed from the pre-update parameters, then
      // applied together
      std::vector<Vec> head_dirs(agents);
      Vec backbone_dir(bs, 0.0);
      for (int i = 0; i < agents; ++i) {
        if (aligned && !mlp) {
          head_dirs[i] = cons.aligned_dirs[i];
          continue;
        }
        PolicyGrad g = ppo_surrogate_grad(policy, i, batch.agent_view(i, sel),
                                          cfg.clip_eps, mode);
        if (mlp) axpy(1.0, g.backbone, backbone_dir);
        if (aligned)
          head_dirs[i] = cons.aligned_dirs[i];
        else
          head_dirs[i] = std::move(g.head);
        if (add_u)
          axpy(cfg.consensus_coeff, cons.outcome.u_star, head_dirs[i]);
      }
      for (int i = 0; i < agents; ++i) {
        check_finite(head_dirs[i],
                     "actor direction for agent " + std::to_string(i),
                     iteration);
        opt.heads[i].ascend(policy.heads[i], head_dirs[i]);
      }
      if (mlp) {
        check_finite(backbone_dir, "backbone direction", iteration);
        opt.backbone.ascend(policy.backbone, backbone_dir);
      }
    }
  }
}

void ppo_critic_update(CriticParams& critic, const RolloutBatch& batch,
                       const TrainConfig& cfg, Optimizer& opt, int iteration) {
  if (cfg.minibatches > static_cast<int>(batch.steps))
    throw std::invalid_argument("ppo_critic_update: minibatches exceed batch size");
  const ExecMode mode = exec_mode(cfg);
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::vector<int> perm;
    if (cfg.minibatches > 1)
      perm = epoch_permutation(cfg.seed, iteration, epoch, batch.steps);
    for (int m = 0; m < cfg.minibatches; ++m) {
      std::vector<int> idx;
      const std::vector<int>* sel = nullptr;
      if (cfg.minibatches > 1) {
        idx = minibatch_indices(perm, m, cfg.minibatches);
        sel = &idx;
      }
      const CriticLossResult r =
          clipped_value_loss(critic, batch.critic_view(sel),
                             cfg.value_clip_eps, mode);
      check_finite(r.grad, "critic gradient", iteration);
      opt.descend(critic.w, r.grad);
    }
  }
}

namespace {

IterationMetrics consensus_metrics(int iteration, const ConsensusStep& cons) {
  IterationMetrics m;
  m.iteration = iteration;
  m.g_norms.reserve(cons.gradients.count());
  for (const Vec& g : cons.gradients.g) m.g_norms.push_back(norm(g));
  if (cons.solved) {
    m.u_star_norm = norm(cons.outcome.u_star);
    const double usq = norm_sq(cons.outcome.u_star);
    double margin = 0.0;
    for (std::size_t j = 0; j < cons.gradients.count(); ++j) {
      const double v = dot(cons.gradients.g[j], cons.outcome.u_star) - usq;
      if (j == 0 || v < margin) margin = v;
    }
    m.kkt_margin = margin;
    m.qp_iters = cons.outcome.iterations;
  }
  return m;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const StepEnv& env_proto,
                  PolicyKind policy_kind, int hidden, MetricsSink* sink,
                  const SnapshotFn& snapshot, int snapshot_interval) {
  cfg.validate();
  const EnvSpec spec = env_proto.spec();

  PolicyParams policy;
  if (policy_kind == PolicyKind::Tabular) {
    if (spec.obs_count < 1)
      throw std::invalid_argument(
          "train: tabular policy needs enumerable observations");
    policy = make_tabular_policy(spec.num_agents, spec.obs_count,
                                 spec.num_actions);
  } else {
    RngStream rng(cfg.seed, kPolicyInitStream);
    policy = make_mlp_policy(spec.num_agents, spec.obs_dim, spec.num_actions,
                             hidden, rng);
  }

  CriticParams critic;
  if (spec.state_count >= 1) {
    critic = make_tabular_critic(spec.state_count);
  } else {
    RngStream rng(cfg.seed, kCriticInitStream);
    critic = make_mlp_critic(spec.state_dim, hidden, rng);
  }

  ActorOptimizers aopt;
  aopt.heads.assign(spec.num_agents, Optimizer{cfg.optimizer, cfg.eta, {}});
  aopt.backbone = Optimizer{cfg.optimizer, cfg.eta, {}};
  Optimizer copt{cfg.optimizer, cfg.critic_eta, {}};

  TrainResult result;
  result.metrics.reserve(cfg.iterations);
  for (int k = 1; k <= cfg.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const RolloutBatch batch = collect_rollouts(env_proto, policy, critic, cfg, k);
    const ConsensusStep cons = compute_consensus(policy, batch, cfg);
    ppo_critic_update(critic, batch, cfg, copt, k);
    ppo_actor_update(policy, batch, cons, cfg, aopt, k);
    for (const Vec& h : policy.heads)
      check_finite(h, "policy parameters", k);
    check_finite(policy.backbone, "policy parameters", k);
    check_finite(critic.w, "critic parameters", k);

    IterationMetrics m = consensus_metrics(k, cons);
    m.mean_return = batch.mean_return();
    double sur = 0.0;
    for (int i = 0; i < spec.num_agents; ++i)
      sur += ppo_surrogate(policy, i, batch.agent_view(i), cfg.clip_eps);
    m.actor_surrogate = sur / spec.num_agents;
    m.critic_loss =
        clipped_value_loss(critic, batch.critic_view(), cfg.value_clip_eps,
                           exec_mode(cfg))
            .loss;
    m.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    result.metrics.push_back(m);
    if (sink) sink->write(m);
    if (snapshot && snapshot_interval > 0 && k % snapshot_interval == 0)
      snapshot(k, policy, critic);
  }
  result.policy = std::move(policy);
  result.critic = std::move(critic);
  return result;
}

QuadraticTrainResult train_quadratic(const TrainConfig& cfg,
                                     const TeamQuadratic& env,
                                     MetricsSink* sink) {
  cfg.validate();
  const int agents = env.num_agents();
  const int bs = env.block_size();

  RngStream rng(cfg.seed, kThetaInitStream);
  Vec theta = env.sample_initial(rng);
  std::vector<Optimizer> opts(agents, Optimizer{cfg.optimizer, cfg.eta, {}});

  QuadraticTrainResult result;
  result.metrics.reserve(cfg.iterations);
  for (int k = 1; k <= cfg.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const double j_before = env.objective(theta);
    if (!std::isfinite(j_before))
      throw std::runtime_error("train: non-finite objective at iteration " +
                               std::to_string(k));
    ConsensusStep cons;
    cons.gradients.g = env.block_gradients(theta);
    if (use_consensus(cfg)) {
      cons.outcome =
          solve_consensus_qp(cons.gradients, cfg.consensus_tol,
                             cfg.consensus_max_iter, cfg.qp_algorithm,
                             exec_mode(cfg));
      cons.solved = true;
    } else {
      cons.outcome.u_star.assign(bs, 0.0);
    }

    for (int i = 0; i < agents; ++i) {
      Vec dir;
      if (cfg.mode == TrainMode::GraspAligned) {
        if (norm_sq(cons.gradients.g[i]) + norm_sq(cons.outcome.u_star) == 0.0)
          dir.assign(bs, 0.0);
        else
          dir = aligned_direction(cons.gradients.g[i], cons.outcome.u_star);
      } else {
        dir = cons.gradients.g[i];
        if (cfg.mode == TrainMode::Grasp && cfg.consensus_coeff != 0.0)
          axpy(cfg.consensus_coeff, cons.outcome.u_star, dir);
      }
      check_finite(dir, "direction for agent " + std::to_string(i), k);
      Vec block(theta.begin() + static_cast<std::ptrdiff_t>(i) * bs,
                theta.begin() + static_cast<std::ptrdiff_t>(i + 1) * bs);
      opts[i].ascend(block, dir);
      std::copy(block.begin(), block.end(),
                theta.begin() + static_cast<std::ptrdiff_t>(i) * bs);
    }
    check_finite(theta, "parameters", k);

    IterationMetrics m = consensus_metrics(k, cons);
    m.mean_return = j_before;
    m.actor_surrogate = env.objective(theta);
    m.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    result.metrics.push_back(m);
    if (sink) sink->write(m);
  }
  result.theta = std::move(theta);
  return result;
}

MarginReport quadratic_margin_check(const TeamQuadratic& env,
                                    const std::vector<double>& etas,
                                    int num_thetas, std::uint64_t seed) {
  if (etas.empty())
    throw std::invalid_argument("quadratic_margin_check: no step sizes");
  if (num_thetas < 1)
    throw std::invalid_argument("quadratic_margin_check: num_thetas must be >= 1");
  const int agents = env.num_agents();
  const int bs = env.block_size();
  // gap <= 1e-10 per agent keeps the summed alignment slack within 1e-8
  const double tol = 1e-10;

  MarginReport report;
  RngStream rng(seed, kThetaInitStream);
  report.worst_alignment_slack = 0.0;
  bool first = true;
  for (int t = 0; t < num_thetas; ++t) {
    const Vec theta = env.sample_initial(rng);
    GradientSet gs{env.block_gradients(theta)};
    const ConsensusOutcome out = solve_consensus_qp(gs, tol, 100000);
    const double usq = norm_sq(out.u_star);

    double slack = -static_cast<double>(agents) * usq;
    double first_order_unit = 0.0;  // sum ||g_i||^2 + sum g_i'u*
    Vec d(static_cast<std::size_t>(agents) * bs);
    for (int i = 0; i < agents; ++i) {
      slack += dot(gs.g[i], out.u_star);
      first_order_unit += norm_sq(gs.g[i]) + dot(gs.g[i], out.u_star);
      for (int p = 0; p < bs; ++p)
        d[static_cast<std::size_t>(i) * bs + p] =
            gs.g[i][p] + out.u_star[p];
    }
    const double j0 = env.objective(theta);
    const double curvature_cap = 0.5 * env.lambda_max() * norm_sq(d);

    for (double eta : etas) {
      Vec shifted = theta;
      axpy(eta, d, shifted);
      const double actual = env.objective(shifted) - j0;
      const double residual = std::abs(actual - eta * first_order_unit);
      const double bound = curvature_cap * eta * eta + 1e-12;
      const double excess = residual - bound;
      ++report.cases;
      if (first || excess > report.worst_expansion_excess)
        report.worst_expansion_excess = excess;
      if (first || slack < report.worst_alignment_slack)
        report.worst_alignment_slack = slack;
      first = false;
      if (excess > 0.0 || slack < -1e-8) ++report.failures;
    }
  }
  report.pass = report.failures == 0;
  return report;
}

}  // namespace congrad
