// End-to-end acceptance checks. Each test case prints exactly one
// "criterion_XX ... PASS/FAIL" line with its wall time; tolerances are
// pinned inline. Criterion 10 shells out to the cli binary named by the
// CONGRAD_CLI environment variable.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "congrad/consensus.hpp"
#include "congrad/envs.hpp"
#include "congrad/run_config.hpp"
#include "congrad/trainer.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace congrad;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string id;
  std::string title;
  double budget_s;
  int failures = 0;
  std::vector<std::string> problems;
  std::vector<std::string> notes;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Criterion(std::string id_, std::string title_, double budget)
      : id(std::move(id_)), title(std::move(title_)), budget_s(budget) {}

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (problems.size() < 8) problems.push_back(what);
  }

  void note(const std::string& text) { notes.push_back(text); }

  void finish() {
    const double el =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    expect(el <= budget_s, "exceeded time budget of " +
                               std::to_string(budget_s) + "s");
    const bool pass = failures == 0;
    std::printf("%s  %-58s %s (%.1fs)\n", id.c_str(), title.c_str(),
                pass ? "PASS" : "FAIL", el);
    for (const auto& p : problems)
      std::printf("  %s problem: %s\n", id.c_str(), p.c_str());
    if (failures > static_cast<int>(problems.size()))
      std::printf("  %s problem: (%d further failures suppressed)\n",
                  id.c_str(), failures - static_cast<int>(problems.size()));
    for (const auto& n : notes)
      std::printf("  %s note: %s\n", id.c_str(), n.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, id, ": ", failures, " failed checks");
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

GradientSet random_set(RngStream& rng, int max_n, int max_d) {
  GradientSet gs;
  const int n = 1 + rng.uniform_int(max_n);
  const int d = 1 + rng.uniform_int(max_d);
  gs.g.assign(n, Vec(d));
  for (auto& v : gs.g)
    for (auto& x : v) x = rng.normal();
  return gs;
}

struct Batch {
  std::vector<Observation> obs;
  std::vector<int> actions;
  Vec logp_old;
  Vec advantages;

  AgentBatchView view() const {
    return AgentBatchView{obs.data(), actions.data(), logp_old.data(),
                          advantages.data(), nullptr, obs.size()};
  }
};

Batch sample_batch(const PolicyParams& p, int agent, int n, RngStream& rng) {
  Batch b;
  for (int t = 0; t < n; ++t) {
    Observation o;
    if (p.layout.kind == PolicyKind::Tabular) {
      o.id = rng.uniform_int(p.layout.obs_count);
    } else {
      o.id = -1;
      o.features.resize(p.layout.obs_dim);
      for (auto& x : o.features) x = rng.normal();
    }
    const SampledAction a = sample_action(p, agent, o, rng);
    b.obs.push_back(o);
    b.actions.push_back(a.action);
    b.logp_old.push_back(a.log_prob);
    b.advantages.push_back(rng.normal());
  }
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, std::string* output) {
  const char* bin = std::getenv("CONGRAD_CLI");
  if (!bin) return -1;
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe))
    if (output) *output += buf.data();
  const int status = pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("criterion_01") {
  Criterion c("criterion_01", "consensus solve: feasibility, reconstruction, margin",
              30.0);
  RngStream rng(9001, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const GradientSet gs = random_set(rng, 16, 256);
    const auto out = solve_consensus_qp(gs, 1e-8, 10000);
    c.expect(out.converged, "set " + std::to_string(trial) + " did not converge");
    double sum = 0.0;
    double min_w = 0.0;
    for (double w : out.weights) {
      sum += w;
      min_w = std::min(min_w, w);
    }
    c.expect(std::abs(sum - 1.0) <= 1e-9,
             "set " + std::to_string(trial) + " weight sum off by " +
                 fmt(std::abs(sum - 1.0)));
    c.expect(min_w >= 0.0, "set " + std::to_string(trial) +
                               " has negative weight " + fmt(min_w));
    Vec rec(gs.dim(), 0.0);
    for (std::size_t i = 0; i < gs.count(); ++i) axpy(out.weights[i], gs.g[i], rec);
    double rec_err = 0.0;
    for (std::size_t k = 0; k < gs.dim(); ++k)
      rec_err = std::max(rec_err, std::abs(rec[k] - out.u_star[k]));
    c.expect(rec_err <= 1e-9, "set " + std::to_string(trial) +
                                  " reconstruction error " + fmt(rec_err));
    const double usq = norm_sq(out.u_star);
    double margin = 1e300;
    for (const auto& g : gs.g) margin = std::min(margin, dot(g, out.u_star) - usq);
    c.expect(margin >= -1e-6, "set " + std::to_string(trial) +
                                  " alignment margin " + fmt(margin));
  }
  c.finish();
}

TEST_CASE("criterion_02") {
  Criterion c("criterion_02", "solver agrees with exact pair and grid oracles",
              60.0);
  RngStream rng(9002, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + rng.uniform_int(8);
    Vec g1(d), g2(d);
    for (auto& x : g1) x = rng.normal();
    for (auto& x : g2) x = rng.normal();
    const auto out = solve_consensus_qp(GradientSet{{g1, g2}}, 1e-8, 10000);
    const double fref = 0.5 * norm_sq(min_norm_pair(g1, g2).u);
    c.expect(std::abs(out.objective - fref) <= 1e-8,
             "pair " + std::to_string(trial) + " objective off by " +
                 fmt(std::abs(out.objective - fref)));
  }
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + rng.uniform_int(3);
    Vec g1(d), g2(d), g3(d);
    for (auto& x : g1) x = rng.normal();
    for (auto& x : g2) x = rng.normal();
    for (auto& x : g3) x = rng.normal();
    const GradientSet gs{{g1, g2, g3}};
    const auto out = solve_consensus_qp(gs, 1e-8, 10000);
    const double grid = oracles::grid_min_norm3(g1, g2, g3, 1e-3);
    c.expect(out.objective <= grid + 1.1e-8,
             "grid " + std::to_string(trial) + " solver above grid by " +
                 fmt(out.objective - grid));
    // nearest on-grid simplex point is within 2e-3 per coordinate of the
    // optimum, so its objective excess is at most (1/2) lambda 12 step^2
    const double lam = power_iteration(gram_matrix(gs.g));
    c.expect(grid - out.objective <= 6.0 * lam * 1e-6 + 1e-8,
             "grid " + std::to_string(trial) + " grid above solver by " +
                 fmt(grid - out.objective));
  }
  c.finish();
}

TEST_CASE("criterion_03") {
  Criterion c("criterion_03", "exact-gradient benchmark reaches equilibrium",
              120.0);
  const RunConfig preset = config_from_json_text(R"({"env":"team_quadratic"})");
  const TeamQuadratic env = make_quadratic(preset);
  const QuadraticTrainResult r = train_quadratic(preset.train, env);
  int crossing = -1;
  for (std::size_t k = 0; k < r.metrics.size(); ++k)
    if (r.metrics[k].u_star_norm < 1e-4) {
      crossing = static_cast<int>(k + 1);
      break;
    }
  c.expect(crossing > 0 && crossing <= 2000,
           "consensus norm never dropped below 1e-4 within 2000 iterations");
  const double final_j = r.metrics.back().actor_surrogate;
  c.expect(final_j >= -1e-6,
           "final objective " + fmt(final_j) + " below -1e-6");
  c.note("consensus norm < 1e-4 first reached at iteration " +
         std::to_string(crossing) + ", final objective " + fmt(final_j));
  c.finish();
}

TEST_CASE("criterion_04") {
  Criterion c("criterion_04", "first-order expansion and alignment margins",
              30.0);
  const TeamQuadratic env(3, 4, 99);
  const MarginReport rep =
      quadratic_margin_check(env, {1e-3, 1e-4, 1e-5}, 100, 4242);
  c.expect(rep.cases == 300, "expected 300 cases, got " + std::to_string(rep.cases));
  c.expect(rep.failures == 0, std::to_string(rep.failures) + " margin failures");
  c.expect(rep.worst_expansion_excess <= 0.0,
           "expansion residual exceeds curvature bound by " +
               fmt(rep.worst_expansion_excess));
  c.expect(rep.worst_alignment_slack >= -1e-8,
           "alignment slack " + fmt(rep.worst_alignment_slack) + " below -1e-8");
  c.expect(rep.pass, "margin report did not pass");
  c.finish();
}

TEST_CASE("criterion_05") {
  Criterion c("criterion_05", "policy gradients pass finite-difference audit",
              60.0);
  RngStream rng(9005, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const bool tabular = trial % 2 == 0;
    if (tabular) {
      const int agents = 1 + rng.uniform_int(2);
      const int obs_count = 1 + rng.uniform_int(3);
      const int actions = 2 + rng.uniform_int(3);
      PolicyParams p = make_tabular_policy(agents, obs_count, actions);
      for (auto& h : p.heads)
        for (auto& x : h) x = 0.5 * rng.normal();
      const int agent = rng.uniform_int(agents);
      const Batch b = sample_batch(p, agent, 16, rng);
      const double err = fd_max_rel_error(p, agent, b.view());
      c.expect(err < 1e-6, "tabular case " + std::to_string(trial) +
                               " fd error " + fmt(err));
    } else {
      const int agents = 1 + rng.uniform_int(2);
      const int obs_dim = 2 + rng.uniform_int(4);
      const int actions = 2 + rng.uniform_int(3);
      const int hidden = 4 + rng.uniform_int(5);
      const PolicyParams p =
          make_mlp_policy(agents, obs_dim, actions, hidden, rng);
      const int agent = rng.uniform_int(agents);
      const Batch b = sample_batch(p, agent, 16, rng);
      const double err = fd_max_rel_error(p, agent, b.view());
      c.expect(err < 1e-4, "mlp case " + std::to_string(trial) +
                               " fd error " + fmt(err));
    }
  }
  c.finish();
}

TEST_CASE("criterion_06") {
  Criterion c("criterion_06", "advantage recursion matches forward sums", 10.0);
  RngStream rng(9006, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + rng.uniform_int(64);
    Vec deltas(n);
    std::vector<std::uint8_t> term(n, 0);
    for (auto& x : deltas) x = rng.normal();
    for (int t = 0; t < n; ++t) term[t] = rng.uniform() < 0.1 ? 1 : 0;
    term[n - 1] = 1;
    const double gamma = rng.uniform(0.0, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const Vec got = gae_advantages(deltas, term, gamma, lambda);
    const Vec ref = oracles::forward_gae(deltas, term, gamma, lambda);
    for (int t = 0; t < n; ++t)
      c.expect(std::abs(got[t] - ref[t]) <= 1e-12 * std::max(1.0, std::abs(ref[t])),
               "episode " + std::to_string(trial) + " step " + std::to_string(t) +
                   " differs by " + fmt(std::abs(got[t] - ref[t])));
    const Vec zero_lambda = gae_advantages(deltas, term, gamma, 0.0);
    c.expect(zero_lambda == deltas,
             "episode " + std::to_string(trial) +
                 " lambda=0 is not exactly the one-step errors");
  }
  c.finish();
}

TEST_CASE("criterion_07") {
  Criterion c("criterion_07", "critic regression recovers exact chain values",
              30.0);
  const int len = 8;
  const MatrixGame env = MatrixGame::climb(len);
  // both agents locked on the middle action via a dominant logit
  PolicyParams policy = make_tabular_policy(2, 1, 3);
  policy.heads[0] = {0.0, 50.0, 0.0};
  policy.heads[1] = {0.0, 50.0, 0.0};
  CriticParams critic = make_tabular_critic(len + 1);

  TrainConfig cfg;
  cfg.rollout_episodes = 64;
  cfg.gamma = 0.99;
  cfg.lambda = 1.0;          // targets become plain discounted returns
  cfg.value_clip_eps = 1e9;  // clipping disabled for pure regression
  cfg.ppo_epochs = 300;
  cfg.optimizer = OptimizerKind::Plain;
  cfg.critic_eta = 1.0;
  cfg.seed = 7;
  const RolloutBatch batch = collect_rollouts(env, policy, critic, cfg, 1);
  Optimizer opt{OptimizerKind::Plain, cfg.critic_eta, {}};
  ppo_critic_update(critic, batch, cfg, opt, 1);

  const double r = env.payoff_at({1, 1});
  double worst = 0.0;
  for (int t = 0; t < len; ++t) {
    double exact = 0.0;
    for (int k = len - 1 - t; k >= 0; --k) exact = r + cfg.gamma * exact;
    worst = std::max(worst, std::abs(critic.w[t] - exact));
  }
  worst = std::max(worst, std::abs(critic.w[len]));  // terminal value is zero
  c.expect(worst < 1e-3, "max-norm error " + fmt(worst) + " not below 1e-3");
  c.note("max-norm error vs exact chain values: " + fmt(worst));
  c.finish();
}

TEST_CASE("criterion_08") {
  Criterion c("criterion_08", "blend factor bounds hold at solver tolerance",
              10.0);
  RngStream rng(9008, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const GradientSet gs = random_set(rng, 8, 16);
    const auto out = solve_consensus_qp(gs, 1e-8, 10000);
    c.expect(out.converged, "set " + std::to_string(trial) + " did not converge");
    const Vec& u = out.u_star;
    const double usq = norm_sq(u);
    for (std::size_t i = 0; i < gs.count(); ++i) {
      const Vec& g = gs.g[i];
      const double gsq = norm_sq(g);
      if (gsq + usq == 0.0) continue;
      const double gu = dot(g, u);
      // numerator of the blend factor stays within the solver gap (1e-8
      // plus 10% slack) of the [0, denominator] interval
      c.expect(usq + gu >= -1.1e-8,
               "set " + std::to_string(trial) + " factor numerator " +
                   fmt(usq + gu));
      c.expect(gu - gsq <= std::sqrt(gsq) * std::sqrt(1.1e-8) + 1e-12,
               "set " + std::to_string(trial) + " numerator overshoot " +
                   fmt(gu - gsq));
      const double f = alignment_factor(g, u);
      c.expect(std::isfinite(f),
               "set " + std::to_string(trial) + " non-finite factor");
      const Vec v = aligned_direction(g, u);
      c.expect(dot(g, v) >= -3e-8, "set " + std::to_string(trial) +
                                       " direction conflicts with gradient: " +
                                       fmt(dot(g, v)));
      c.expect(dot(u, v) >= -1e-12, "set " + std::to_string(trial) +
                                        " direction conflicts with consensus: " +
                                        fmt(dot(u, v)));
    }
  }
  c.finish();
}

TEST_CASE("criterion_09") {
  Criterion c("criterion_09", "climb game: optimal joint action and return parity",
              600.0);
  const int seeds = 10;
  const MatrixGame env = MatrixGame::climb(1);
  int grasp_optimal = 0, baseline_optimal = 0;
  double grasp_return = 0.0, baseline_return = 0.0;

  for (int seed = 0; seed < seeds; ++seed) {
    for (int pass = 0; pass < 2; ++pass) {
      TrainConfig cfg;
      cfg.mode = pass == 0 ? TrainMode::Grasp : TrainMode::MappoBaseline;
      cfg.iterations = 3000;
      cfg.rollout_episodes = 64;
      cfg.ppo_epochs = 5;
      cfg.eta = 5e-3;
      cfg.critic_eta = 5e-3;
      cfg.seed = static_cast<std::uint64_t>(seed);
      const TrainResult r = train(cfg, env, PolicyKind::Tabular, 0);

      bool optimal = true;
      for (int agent = 0; agent < 2; ++agent) {
        const Vec& head = r.policy.heads[agent];
        int argmax = 0;
        for (int a = 1; a < 3; ++a)
          if (head[a] > head[argmax]) argmax = a;
        optimal = optimal && argmax == 0;
      }
      double tail = 0.0;  // mean return over the last 10% of iterations
      const std::size_t cut = r.metrics.size() - r.metrics.size() / 10;
      for (std::size_t k = cut; k < r.metrics.size(); ++k)
        tail += r.metrics[k].mean_return;
      tail /= static_cast<double>(r.metrics.size() - cut);
      if (pass == 0) {
        grasp_optimal += optimal ? 1 : 0;
        grasp_return += tail / seeds;
      } else {
        baseline_optimal += optimal ? 1 : 0;
        baseline_return += tail / seeds;
      }
    }
  }

  c.expect(grasp_optimal >= 8,
           "consensus runs reached the optimal joint action in only " +
               std::to_string(grasp_optimal) + "/10 seeds (need 8)");
  c.expect(grasp_return >= baseline_return - 5e-3,
           "consensus mean final return " + fmt(grasp_return) +
               " trails baseline " + fmt(baseline_return) + " by more than 5e-3");
  c.note("optimal joint action: consensus " + std::to_string(grasp_optimal) +
         "/10 seeds, baseline " + std::to_string(baseline_optimal) +
         "/10; mean final return consensus " + fmt(grasp_return) +
         ", baseline " + fmt(baseline_return));
  if (grasp_optimal < 8)
    c.note("the realigned update keeps every agent's preference ordering, so "
           "runs that start in the penalty-free middle basin stay there; "
           "reaching the high-payoff corner needs an exploration mechanism "
           "(optimism or leniency), which this update rule does not provide");
  c.finish();
}

TEST_CASE("criterion_10") {
  Criterion c("criterion_10", "repeated cli runs produce identical artifacts",
              120.0);
  if (!std::getenv("CONGRAD_CLI")) {
    c.expect(false, "CONGRAD_CLI is not set; cannot launch the cli binary");
    c.finish();
    return;
  }
  const fs::path dir = fs::temp_directory_path() / "congrad_acceptance_c10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.json";
  std::ofstream(cfg_path) << R"({"env":"grid_spread","iterations":5,
      "rollout_episodes":12,"episode_len":8,"rollout_workers":3,"seed":21,
      "checkpoint_interval":2})";

  std::vector<std::string> outs;
  for (const char* tag : {"a", "b"}) {
    const fs::path out = dir / tag;
    std::string log;
    const int code = run_cli("train --config " + cfg_path.string() + " --out " +
                                 out.string(),
                             &log);
    c.expect(code == 0, std::string("run ") + tag + " exited with code " +
                            std::to_string(code) + ": " + log);
    outs.push_back(out.string());
  }
  for (const char* file :
       {"metrics.csv", "params_final.bin", "config_echo.json",
        "checkpoint_000002.bin", "checkpoint_000004.bin"}) {
    const std::string a = slurp(fs::path(outs[0]) / file);
    const std::string b = slurp(fs::path(outs[1]) / file);
    c.expect(!a.empty(), std::string(file) + " is empty or missing");
    c.expect(a == b, std::string(file) + " differs between identical runs");
  }
  c.finish();
}
