#pragma once

#include "congrad/numerics.hpp"
#include "congrad/rng.hpp"

namespace congrad {

enum class PolicyKind { Tabular, Mlp };

// Discrete index for table lookups plus a feature vector for function
// approximation; environments fill whichever applies (id = -1 when the
// observation space is not enumerable).
struct Observation {
  int id = 0;
  Vec features;
};

struct PolicyLayout {
  PolicyKind kind = PolicyKind::Tabular;
  int num_agents = 0;
  int num_actions = 0;
  int obs_count = 0;  // tabular rows
  int obs_dim = 0;    // mlp input width
  int hidden = 0;     // mlp backbone width

  int head_size() const {
    return kind == PolicyKind::Tabular ? obs_count * num_actions
                                       : num_actions * (hidden + 1);
  }
  int backbone_size() const {
    return kind == PolicyKind::Tabular ? 0 : hidden * (obs_dim + 1);
  }
  int total_size() const { return backbone_size() + num_agents * head_size(); }
};

// Shared backbone plus identically shaped per-agent heads. Tabular policies
// have an empty backbone and one logit row per discrete observation.
struct PolicyParams {
  PolicyLayout layout;
  Vec backbone;
  std::vector<Vec> heads;
};

PolicyParams make_tabular_policy(int num_agents, int obs_count, int num_actions);
// weights drawn uniformly from [-0.1, 0.1] in a fixed traversal order
PolicyParams make_mlp_policy(int num_agents, int obs_dim, int num_actions,
                             int hidden, RngStream& rng);

Vec action_probs(const PolicyParams& p, int agent, const Observation& obs);
double log_prob(const PolicyParams& p, int agent, const Observation& obs,
                int action);

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;
};

SampledAction sample_action(const PolicyParams& p, int agent,
                            const Observation& obs, RngStream& rng);

struct PolicyGrad {
  Vec head;
  Vec backbone;
};

// d log pi(action | obs) / d params, split into the agent's head block and
// the shared backbone block
PolicyGrad logprob_grad(const PolicyParams& p, int agent, const Observation& obs,
                        int action);

// Read-only view over one agent's samples; idx selects a subset when not null.
struct AgentBatchView {
  const Observation* obs = nullptr;
  const int* actions = nullptr;
  const double* logp_old = nullptr;
  const double* advantages = nullptr;
  const int* idx = nullptr;
  std::size_t n = 0;

  std::size_t sample(std::size_t k) const {
    return idx ? static_cast<std::size_t>(idx[k]) : k;
  }
};

// mean_t advantage_t * d log pi / d params (the vanilla policy-gradient
// estimate over the batch)
PolicyGrad local_policy_gradient(const PolicyParams& p, int agent,
                                 const AgentBatchView& view,
                                 ExecMode mode = ExecMode::Serial);

// max relative error between the analytic gradient of
// mean_t advantage_t * log pi and central finite differences
double fd_max_rel_error(const PolicyParams& p, int agent,
                        const AgentBatchView& view, double h = 1e-5);

Vec flatten(const PolicyParams& p);
void unflatten(const Vec& flat, PolicyParams& p);

}  // namespace congrad
