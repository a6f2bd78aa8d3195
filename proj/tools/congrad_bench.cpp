// Timing comparison between the serial reference kernels and their
// OpenMP-parallel counterparts, with a bitwise equality check on each result.
#include <algorithm>
#include <chrono>
#include <cstdio>

#include "congrad/envs.hpp"
#include "congrad/estimation.hpp"
#include "congrad/numerics.hpp"
#include "congrad/policy.hpp"
#include "congrad/rng.hpp"
#include "congrad/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace congrad;

template <class F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   results %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              equal ? "bitwise equal" : "DIFFER");
}

}  // namespace

int main() {
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("worker threads: %d\n", threads);

  {
    RngStream rng(1, 100);
    std::vector<Vec> g(16, Vec(1 << 15));
    for (auto& v : g)
      for (auto& x : v) x = rng.normal();
    GramMatrix gs, gp;
    const double ts = best_ms(5, [&] { gs = gram_matrix(g, ExecMode::Serial); });
    const double tp = best_ms(5, [&] { gp = gram_matrix(g, ExecMode::Parallel); });
    report("gram 16 x 32768", ts, tp, gs.a == gp.a);
  }

  {
    RngStream rng(1, 101);
    const int obs_dim = 24, hidden = 16, actions = 5;
    PolicyParams p = make_mlp_policy(4, obs_dim, actions, hidden, rng);
    const std::size_t n = 8192;
    std::vector<Observation> obs(n);
    std::vector<int> acts(n);
    Vec logp(n, 0.0), adv(n);
    for (std::size_t t = 0; t < n; ++t) {
      obs[t].id = -1;
      obs[t].features.resize(obs_dim);
      for (auto& x : obs[t].features) x = rng.normal();
      acts[t] = rng.uniform_int(actions);
      adv[t] = rng.normal();
    }
    AgentBatchView view;
    view.obs = obs.data();
    view.actions = acts.data();
    view.logp_old = logp.data();
    view.advantages = adv.data();
    view.n = n;
    PolicyGrad gs, gp;
    const double ts =
        best_ms(5, [&] { gs = local_policy_gradient(p, 0, view, ExecMode::Serial); });
    const double tp =
        best_ms(5, [&] { gp = local_policy_gradient(p, 0, view, ExecMode::Parallel); });
    report("policy gradient 8192", ts, tp,
           gs.head == gp.head && gs.backbone == gp.backbone);
  }

  {
    const GridSpread env(4, 7, 40, 1.0);
    RngStream prng(1, 102);
    const PolicyParams policy =
        make_mlp_policy(4, env.spec().obs_dim, env.spec().num_actions, 16, prng);
    RngStream crng(1, 103);
    const CriticParams critic = make_mlp_critic(env.spec().state_dim, 16, crng);
    TrainConfig cfg;
    cfg.rollout_episodes = 256;
    cfg.seed = 7;
    RolloutBatch bs, bp;
    cfg.rollout_workers = 1;
    const double ts =
        best_ms(3, [&] { bs = collect_rollouts(env, policy, critic, cfg, 1); });
    cfg.rollout_workers = std::max(threads, 2);
    const double tp =
        best_ms(3, [&] { bp = collect_rollouts(env, policy, critic, cfg, 1); });
    const bool equal = bs.advantages == bp.advantages &&
                       bs.episode_returns == bp.episode_returns &&
                       bs.logp_old == bp.logp_old && bs.targets == bp.targets;
    report("rollouts 256 episodes", ts, tp, equal);
  }
  return 0;
}
