#include "congrad/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace congrad {

namespace {

void check_agent(const PolicyParams& p, int agent) {
  if (agent < 0 || agent >= p.layout.num_agents)
    throw std::invalid_argument("policy: agent index " + std::to_string(agent) +
                                " out of range");
}

void check_action(const PolicyLayout& l, int action) {
  if (action < 0 || action >= l.num_actions)
    throw std::invalid_argument("policy: action " + std::to_string(action) +
                                " out of range");
}

// logits for one agent at one observation
Vec logits_of(const PolicyParams& p, int agent, const Observation& obs,
              Vec* hidden_out) {
  const PolicyLayout& l = p.layout;
  const Vec& head = p.heads[agent];
  if (l.kind == PolicyKind::Tabular) {
    if (obs.id < 0 || obs.id >= l.obs_count)
      throw std::invalid_argument("policy: observation id " +
                                  std::to_string(obs.id) + " out of range");
    Vec z(l.num_actions);
    for (int a = 0; a < l.num_actions; ++a)
      z[a] = head[static_cast<std::size_t>(obs.id) * l.num_actions + a];
    return z;
  }
  if (static_cast<int>(obs.features.size()) != l.obs_dim)
    throw std::invalid_argument("policy: expected " + std::to_string(l.obs_dim) +
                                " features, got " +
                                std::to_string(obs.features.size()));
  Vec h(l.hidden);
  for (int j = 0; j < l.hidden; ++j) {
    double s = p.backbone[static_cast<std::size_t>(l.hidden) * l.obs_dim + j];
    for (int k = 0; k < l.obs_dim; ++k)
      s += p.backbone[static_cast<std::size_t>(j) * l.obs_dim + k] * obs.features[k];
    h[j] = std::tanh(s);
  }
  Vec z(l.num_actions);
  for (int a = 0; a < l.num_actions; ++a) {
    double s = head[static_cast<std::size_t>(l.num_actions) * l.hidden + a];
    for (int j = 0; j < l.hidden; ++j)
      s += head[static_cast<std::size_t>(a) * l.hidden + j] * h[j];
    z[a] = s;
  }
  if (hidden_out) *hidden_out = std::move(h);
  return z;
}

double log_sum_exp(const Vec& z, double zmax) {
  double s = 0.0;
  for (double x : z) s += std::exp(x - zmax);
  return std::log(s);
}

}  // namespace

PolicyParams make_tabular_policy(int num_agents, int obs_count, int num_actions) {
  if (num_agents < 1 || obs_count < 1 || num_actions < 1)
    throw std::invalid_argument("make_tabular_policy: sizes must be positive");
  PolicyParams p;
  p.layout = {PolicyKind::Tabular, num_agents, num_actions, obs_count, 0, 0};
  p.heads.assign(num_agents, Vec(p.layout.head_size(), 0.0));
  return p;
}

PolicyParams make_mlp_policy(int num_agents, int obs_dim, int num_actions,
                             int hidden, RngStream& rng) {
  if (num_agents < 1 || obs_dim < 1 || num_actions < 1 || hidden < 1)
    throw std::invalid_argument("make_mlp_policy: sizes must be positive");
  PolicyParams p;
  p.layout = {PolicyKind::Mlp, num_agents, num_actions, 0, obs_dim, hidden};
  p.backbone.resize(p.layout.backbone_size());
  for (double& w : p.backbone) w = rng.uniform(-0.1, 0.1);
  p.heads.assign(num_agents, Vec(p.layout.head_size()));
  for (Vec& head : p.heads)
    for (double& w : head) w = rng.uniform(-0.1, 0.1);
  return p;
}

Vec action_probs(const PolicyParams& p, int agent, const Observation& obs) {
  check_agent(p, agent);
  Vec z = logits_of(p, agent, obs, nullptr);
  const double zmax = *std::max_element(z.begin(), z.end());
  const double lse = log_sum_exp(z, zmax);
  Vec probs(z.size());
  for (std::size_t a = 0; a < z.size(); ++a)
    probs[a] = std::exp(z[a] - zmax - lse);
  return probs;
}

double log_prob(const PolicyParams& p, int agent, const Observation& obs,
                int action) {
  check_agent(p, agent);
  check_action(p.layout, action);
  Vec z = logits_of(p, agent, obs, nullptr);
  const double zmax = *std::max_element(z.begin(), z.end());
  return z[action] - zmax - log_sum_exp(z, zmax);
}

SampledAction sample_action(const PolicyParams& p, int agent,
                            const Observation& obs, RngStream& rng) {
  Vec probs = action_probs(p, agent, obs);
  const double u = rng.uniform();
  double acc = 0.0;
  int action = static_cast<int>(probs.size()) - 1;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    acc += probs[a];
    if (u < acc) {
      action = static_cast<int>(a);
      break;
    }
  }
  return {action, log_prob(p, agent, obs, action)};
}

PolicyGrad logprob_grad(const PolicyParams& p, int agent, const Observation& obs,
                        int action) {
  check_agent(p, agent);
  check_action(p.layout, action);
  const PolicyLayout& l = p.layout;
  PolicyGrad g;
  g.head.assign(l.head_size(), 0.0);
  g.backbone.assign(l.backbone_size(), 0.0);

  Vec h;
  Vec z = logits_of(p, agent, obs, &h);
  const double zmax = *std::max_element(z.begin(), z.end());
  const double lse = log_sum_exp(z, zmax);
  Vec dlogits(l.num_actions);
  for (int a = 0; a < l.num_actions; ++a)
    dlogits[a] = (a == action ? 1.0 : 0.0) - std::exp(z[a] - zmax - lse);

  if (l.kind == PolicyKind::Tabular) {
    for (int a = 0; a < l.num_actions; ++a)
      g.head[static_cast<std::size_t>(obs.id) * l.num_actions + a] = dlogits[a];
    return g;
  }

  const Vec& head = p.heads[agent];
  for (int a = 0; a < l.num_actions; ++a) {
    for (int j = 0; j < l.hidden; ++j)
      g.head[static_cast<std::size_t>(a) * l.hidden + j] = dlogits[a] * h[j];
    g.head[static_cast<std::size_t>(l.num_actions) * l.hidden + a] = dlogits[a];
  }
  for (int j = 0; j < l.hidden; ++j) {
    double dz = 0.0;
    for (int a = 0; a < l.num_actions; ++a)
      dz += dlogits[a] * head[static_cast<std::size_t>(a) * l.hidden + j];
    const double dpre = (1.0 - h[j] * h[j]) * dz;
    for (int k = 0; k < l.obs_dim; ++k)
      g.backbone[static_cast<std::size_t>(j) * l.obs_dim + k] =
          dpre * obs.features[k];
    g.backbone[static_cast<std::size_t>(l.hidden) * l.obs_dim + j] = dpre;
  }
  return g;
}

PolicyGrad local_policy_gradient(const PolicyParams& p, int agent,
                                 const AgentBatchView& view, ExecMode mode) {
  check_agent(p, agent);
  if (view.n == 0)
    throw std::invalid_argument("local_policy_gradient: empty batch");
  const std::size_t hs = p.layout.head_size();
  const std::size_t bs = p.layout.backbone_size();
  Vec combined(hs + bs);
  accumulate_chunked(
      view.n, hs + bs,
      [&](std::size_t k, double* acc) {
        const std::size_t t = view.sample(k);
        PolicyGrad g = logprob_grad(p, agent, view.obs[t], view.actions[t]);
        const double adv = view.advantages[t];
        for (std::size_t i = 0; i < hs; ++i) acc[i] += adv * g.head[i];
        for (std::size_t i = 0; i < bs; ++i) acc[hs + i] += adv * g.backbone[i];
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

namespace {

double surrogate_scalar(const PolicyParams& p, int agent,
                        const AgentBatchView& view) {
  double s = 0.0;
  for (std::size_t k = 0; k < view.n; ++k) {
    const std::size_t t = view.sample(k);
    s += view.advantages[t] * log_prob(p, agent, view.obs[t], view.actions[t]);
  }
  return s / static_cast<double>(view.n);
}

}  // namespace

double fd_max_rel_error(const PolicyParams& p, int agent,
                        const AgentBatchView& view, double h) {
  PolicyGrad analytic = local_policy_gradient(p, agent, view, ExecMode::Serial);
  PolicyParams work = p;
  double worst = 0.0;
  auto probe = [&](double* coord, double a) {
    const double saved = *coord;
    *coord = saved + h;
    const double up = surrogate_scalar(work, agent, view);
    *coord = saved - h;
    const double dn = surrogate_scalar(work, agent, view);
    *coord = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double rel =
        std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
    worst = std::max(worst, rel);
  };
  for (std::size_t i = 0; i < analytic.head.size(); ++i)
    probe(&work.heads[agent][i], analytic.head[i]);
  for (std::size_t i = 0; i < analytic.backbone.size(); ++i)
    probe(&work.backbone[i], analytic.backbone[i]);
  return worst;
}

Vec flatten(const PolicyParams& p) {
  Vec flat;
  flat.reserve(p.layout.total_size());
  flat.insert(flat.end(), p.backbone.begin(), p.backbone.end());
  for (const Vec& head : p.heads)
    flat.insert(flat.end(), head.begin(), head.end());
  return flat;
}

void unflatten(const Vec& flat, PolicyParams& p) {
  if (static_cast<int>(flat.size()) != p.layout.total_size())
    throw std::invalid_argument("unflatten: expected " +
                                std::to_string(p.layout.total_size()) +
                                " values, got " + std::to_string(flat.size()));
  std::size_t off = 0;
  p.backbone.assign(flat.begin(), flat.begin() + p.layout.backbone_size());
  off += p.backbone.size();
  p.heads.assign(p.layout.num_agents, Vec());
  for (int i = 0; i < p.layout.num_agents; ++i) {
    p.heads[i].assign(flat.begin() + off,
                      flat.begin() + off + p.layout.head_size());
    off += p.layout.head_size();
  }
}

}  // namespace congrad
