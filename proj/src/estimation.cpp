#include "congrad/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace congrad {

CriticParams make_tabular_critic(int state_count) {
  if (state_count < 1)
    throw std::invalid_argument("make_tabular_critic: state_count must be positive");
  CriticParams c;
  c.layout = {CriticKind::Tabular, state_count, 0, 0};
  c.w.assign(state_count, 0.0);
  return c;
}

CriticParams make_mlp_critic(int state_dim, int hidden, RngStream& rng) {
  if (state_dim < 1 || hidden < 1)
    throw std::invalid_argument("make_mlp_critic: sizes must be positive");
  CriticParams c;
  c.layout = {CriticKind::Mlp, 0, state_dim, hidden};
  c.w.resize(c.layout.size());
  for (double& x : c.w) x = rng.uniform(-0.1, 0.1);
  return c;
}

namespace {

// mlp layout: W1 (hidden x state_dim), b1, w2 (hidden), b2
Vec critic_hidden(const CriticParams& c, const Observation& s) {
  const CriticLayout& l = c.layout;
  if (static_cast<int>(s.features.size()) != l.state_dim)
    throw std::invalid_argument("critic: expected " + std::to_string(l.state_dim) +
                                " state features, got " +
                                std::to_string(s.features.size()));
  Vec h(l.hidden);
  const std::size_t b1 = static_cast<std::size_t>(l.hidden) * l.state_dim;
  for (int j = 0; j < l.hidden; ++j) {
    double acc = c.w[b1 + j];
    for (int k = 0; k < l.state_dim; ++k)
      acc += c.w[static_cast<std::size_t>(j) * l.state_dim + k] * s.features[k];
    h[j] = std::tanh(acc);
  }
  return h;
}

}  // namespace

double critic_value(const CriticParams& c, const Observation& state) {
  const CriticLayout& l = c.layout;
  if (l.kind == CriticKind::Tabular) {
    if (state.id < 0 || state.id >= l.state_count)
      throw std::invalid_argument("critic: state id " + std::to_string(state.id) +
                                  " out of range");
    return c.w[state.id];
  }
  Vec h = critic_hidden(c, state);
  const std::size_t w2 = static_cast<std::size_t>(l.hidden) * (l.state_dim + 1);
  double v = c.w[w2 + l.hidden];
  for (int j = 0; j < l.hidden; ++j) v += c.w[w2 + j] * h[j];
  return v;
}

Vec critic_value_grad(const CriticParams& c, const Observation& state) {
  const CriticLayout& l = c.layout;
  Vec g(c.w.size(), 0.0);
  if (l.kind == CriticKind::Tabular) {
    if (state.id < 0 || state.id >= l.state_count)
      throw std::invalid_argument("critic: state id " + std::to_string(state.id) +
                                  " out of range");
    g[state.id] = 1.0;
    return g;
  }
  Vec h = critic_hidden(c, state);
  const std::size_t b1 = static_cast<std::size_t>(l.hidden) * l.state_dim;
  const std::size_t w2 = b1 + l.hidden;
  g[w2 + l.hidden] = 1.0;
  for (int j = 0; j < l.hidden; ++j) {
    g[w2 + j] = h[j];
    const double dpre = (1.0 - h[j] * h[j]) * c.w[w2 + j];
    for (int k = 0; k < l.state_dim; ++k)
      g[static_cast<std::size_t>(j) * l.state_dim + k] = dpre * state.features[k];
    g[b1 + j] = dpre;
  }
  return g;
}

Vec td_errors(const Vec& rewards, const Vec& values,
              const std::vector<std::uint8_t>& terminal, double gamma) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1)
    throw std::invalid_argument("td_errors: values must have " +
                                std::to_string(n + 1) + " entries, got " +
                                std::to_string(values.size()));
  if (terminal.size() != n)
    throw std::invalid_argument("td_errors: terminal flag count mismatch");
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("td_errors: gamma must be in [0, 1]");
  Vec delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double boot = terminal[t] ? 0.0 : values[t + 1];
    delta[t] = rewards[t] + gamma * boot - values[t];
  }
  return delta;
}

Vec gae_advantages(const Vec& deltas, const std::vector<std::uint8_t>& terminal,
                   double gamma, double lambda) {
  if (terminal.size() != deltas.size())
    throw std::invalid_argument("gae_advantages: terminal flag count mismatch");
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("gae_advantages: gamma must be in [0, 1]");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("gae_advantages: lambda must be in [0, 1]");
  Vec adv(deltas.size());
  double next = 0.0;
  for (std::size_t i = deltas.size(); i-- > 0;) {
    const double carry = terminal[i] ? 0.0 : next;
    next = deltas[i] + gamma * lambda * carry;
    adv[i] = next;
  }
  return adv;
}

Vec return_targets(const Vec& advantages, const Vec& values) {
  if (advantages.size() != values.size())
    throw std::invalid_argument("return_targets: size mismatch " +
                                std::to_string(advantages.size()) + " vs " +
                                std::to_string(values.size()));
  Vec r(advantages.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = advantages[i] + values[i];
  return r;
}

CriticLossResult clipped_value_loss(const CriticParams& c,
                                    const CriticBatchView& view, double eps,
                                    ExecMode mode) {
  if (view.n == 0)
    throw std::invalid_argument("clipped_value_loss: empty batch");
  if (eps < 0.0)
    throw std::invalid_argument("clipped_value_loss: eps must be >= 0");
  const std::size_t dim = c.w.size();
  // last slot carries the scalar loss so one pass covers both
  Vec acc(dim + 1);
  accumulate_chunked(
      view.n, dim + 1,
      [&](std::size_t k, double* a) {
        const std::size_t t = view.sample(k);
        const double v = critic_value(c, view.states[t]);
        const double vo = view.values_old[t];
        const double target = view.targets[t];
        const double vc = std::clamp(v, vo - eps, vo + eps);
        const double lu = (v - target) * (v - target);
        const double lc = (vc - target) * (vc - target);
        a[dim] += std::max(lu, lc);
        const double dldv = lu >= lc ? 2.0 * (v - target) : 0.0;
        if (dldv != 0.0) {
          Vec dv = critic_value_grad(c, view.states[t]);
          for (std::size_t i = 0; i < dim; ++i) a[i] += dldv * dv[i];
        }
      },
      acc.data(), mode);
  CriticLossResult out;
  const double inv = 1.0 / static_cast<double>(view.n);
  out.loss = acc[dim] * inv;
  out.grad.assign(acc.begin(), acc.begin() + dim);
  for (double& x : out.grad) x *= inv;
  return out;
}

void adam_step(Vec& w, const Vec& grad, AdamState& st, double eta, double beta1,
               double beta2, double eps) {
  if (grad.size() != w.size())
    throw std::invalid_argument("adam_step: gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(w.size(), 0.0);
    st.v.assign(w.size(), 0.0);
  }
  if (st.m.size() != w.size())
    throw std::invalid_argument("adam_step: state size mismatch");
  st.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    w[i] -= eta * mhat / (std::sqrt(vhat) + eps);
  }
}

void sgd_step(Vec& w, const Vec& grad, double eta) {
  if (grad.size() != w.size())
    throw std::invalid_argument("sgd_step: gradient size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * grad[i];
}

void Optimizer::descend(Vec& w, const Vec& grad) {
  if (kind == OptimizerKind::Adam)
    adam_step(w, grad, state, eta);
  else
    sgd_step(w, grad, eta);
}

void Optimizer::ascend(Vec& w, const Vec& direction) {
  Vec neg(direction.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -direction[i];
  descend(w, neg);
}

}  // namespace congrad
