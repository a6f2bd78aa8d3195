#pragma once

#include <cstdint>

#include "congrad/numerics.hpp"
#include "congrad/policy.hpp"
#include "congrad/rng.hpp"

namespace congrad {

enum class CriticKind { Tabular, Mlp };

struct CriticLayout {
  CriticKind kind = CriticKind::Tabular;
  int state_count = 0;  // tabular entries
  int state_dim = 0;    // mlp input width
  int hidden = 0;

  int size() const {
    return kind == CriticKind::Tabular ? state_count
                                       : hidden * (state_dim + 2) + 1;
  }
};

struct CriticParams {
  CriticLayout layout;
  Vec w;
};

CriticParams make_tabular_critic(int state_count);
CriticParams make_mlp_critic(int state_dim, int hidden, RngStream& rng);

double critic_value(const CriticParams& c, const Observation& state);
Vec critic_value_grad(const CriticParams& c, const Observation& state);

// One-step bootstrapped errors over a trajectory segment. values must hold
// one extra trailing entry (the bootstrap value for the state after the last
// step); it is masked to zero wherever terminal is set.
Vec td_errors(const Vec& rewards, const Vec& values,
              const std::vector<std::uint8_t>& terminal, double gamma);

// Exponentially weighted advantage recursion, computed backward and cut at
// terminals.
Vec gae_advantages(const Vec& deltas, const std::vector<std::uint8_t>& terminal,
                   double gamma, double lambda);

// regression targets advantage + stale value, elementwise
Vec return_targets(const Vec& advantages, const Vec& values);

struct CriticBatchView {
  const Observation* states = nullptr;
  const double* values_old = nullptr;
  const double* targets = nullptr;
  const int* idx = nullptr;
  std::size_t n = 0;

  std::size_t sample(std::size_t k) const {
    return idx ? static_cast<std::size_t>(idx[k]) : k;
  }
};

struct CriticLossResult {
  double loss = 0.0;
  Vec grad;
};

// mean_t max((V - target)^2, (clip(V, V_old +- eps) - target)^2); ties take
// the unclipped branch, and the clipped branch has zero gradient outside the
// band.
CriticLossResult clipped_value_loss(const CriticParams& c,
                                    const CriticBatchView& view, double eps,
                                    ExecMode mode = ExecMode::Serial);

struct AdamState {
  Vec m, v;
  long t = 0;
};

void adam_step(Vec& w, const Vec& grad, AdamState& st, double eta,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
void sgd_step(Vec& w, const Vec& grad, double eta);

enum class OptimizerKind { Plain, Adam };

// gradient-descent wrapper owning per-block state
struct Optimizer {
  OptimizerKind kind = OptimizerKind::Adam;
  double eta = 5e-4;
  AdamState state;

  void descend(Vec& w, const Vec& grad);
  void ascend(Vec& w, const Vec& direction);
};

}  // namespace congrad
