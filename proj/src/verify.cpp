#include "congrad/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "congrad/consensus.hpp"
#include "congrad/envs.hpp"
#include "congrad/estimation.hpp"
#include "congrad/policy.hpp"
#include "congrad/rng.hpp"
#include "congrad/trainer.hpp"

namespace congrad {

namespace {

// Standard normal sets with structural edge cases mixed in: duplicates,
// opposed pairs, zero rows, fully zero sets and near-degenerate hulls.
GradientSet random_gradient_set(RngStream& rng) {
  const int n = 1 + rng.uniform_int(8);
  const int d = 1 + rng.uniform_int(16);
  GradientSet gs;
  gs.g.assign(n, Vec(d));
  for (auto& g : gs.g)
    for (auto& x : g) x = rng.normal();
  switch (rng.uniform_int(6)) {
    case 1:
      if (n >= 2) gs.g[1] = gs.g[0];
      break;
    case 2:
      if (n >= 2) {
        gs.g[1] = gs.g[0];
        for (auto& x : gs.g[1]) x = -x;
      }
      break;
    case 3:
      for (auto& x : gs.g[0]) x = 0.0;
      break;
    case 4:
      for (auto& g : gs.g)
        for (auto& x : g) x = 0.0;
      break;
    case 5:
      // exactly dependent row: the Gram matrix is singular but the flat
      // directions carry no duality-gap mass
      if (n >= 3)
        for (int k = 0; k < d; ++k)
          gs.g[2][k] = 0.5 * (gs.g[0][k] + gs.g[1][k]);
      break;
    default:
      break;
  }
  return gs;
}

void track(VerifyReport& r, double residual, double limit, const char* what) {
  if (residual > r.worst) {
    r.worst = residual;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s residual %.3g (limit %.3g)", what,
                  residual, limit);
    r.detail = buf;
  }
  if (residual > limit) ++r.failures;
}

VerifyReport verify_qp(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "qp";
  RngStream rng(seed, 0x71);
  for (int c = 0; c < cases; ++c) {
    const GradientSet gs = random_gradient_set(rng);
    const ConsensusOutcome out =
        solve_consensus_qp(gs, 1e-8, 10000);
    ++r.cases;
    double wsum = 0.0, wmin = 0.0;
    for (double w : out.weights) {
      wsum += w;
      wmin = std::min(wmin, w);
    }
    track(r, std::abs(wsum - 1.0), 1e-9, "weight sum");
    track(r, -wmin, 0.0, "negative weight");
    Vec recon(gs.dim(), 0.0);
    for (std::size_t i = 0; i < gs.count(); ++i)
      axpy(out.weights[i], gs.g[i], recon);
    double rec = 0.0;
    for (std::size_t k = 0; k < recon.size(); ++k)
      rec = std::max(rec, std::abs(recon[k] - out.u_star[k]));
    track(r, rec, 1e-9, "reconstruction");
    const double usq = norm_sq(out.u_star);
    for (const Vec& g : gs.g)
      track(r, usq - dot(g, out.u_star), 1e-6, "pareto margin");
    track(r, out.converged ? 0.0 : 1.0, 0.0, "convergence flag");
  }
  r.pass = r.failures == 0;
  return r;
}

VerifyReport verify_kkt_suite(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "kkt";
  RngStream rng(seed, 0x72);
  for (int c = 0; c < cases; ++c) {
    const GradientSet gs = random_gradient_set(rng);
    const ConsensusOutcome out =
        solve_consensus_qp(gs, 1e-8, 10000);
    const KktReport k = verify_kkt(gs, out, 1e-6);
    ++r.cases;
    track(r, k.max_violation, 1e-6, "kkt violation");
  }
  r.pass = r.failures == 0;
  return r;
}

VerifyReport verify_gamma(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "gamma_factor";
  RngStream rng(seed, 0x73);
  for (int c = 0; c < cases; ++c) {
    const GradientSet gs = random_gradient_set(rng);
    const ConsensusOutcome out =
        solve_consensus_qp(gs, 1e-8, 10000);
    ++r.cases;
    const double usq = norm_sq(out.u_star);
    for (const Vec& g : gs.g) {
      const double den = norm_sq(g) + usq;
      if (den == 0.0) continue;
      // scale-free bounds: with duality gap <= 1e-8 the factor numerator
      // u'u + g'u can only undershoot zero by the gap, and can only exceed
      // the denominator by |g| sqrt(gap); u'v is a square and stays exact
      const double gu = dot(g, out.u_star);
      track(r, -(usq + gu), 1.1e-8, "factor numerator below zero");
      track(r, gu - norm_sq(g),
            norm(g) * std::sqrt(1.1e-8) + 1e-12, "factor numerator above den");
      const Vec v = aligned_direction(g, out.u_star);
      track(r, -dot(g, v), 3e-8, "own-gradient conflict");
      track(r, -dot(out.u_star, v), 1e-12, "consensus conflict");
    }
  }
  r.pass = r.failures == 0;
  return r;
}

VerifyReport verify_gradcheck(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "gradcheck";
  RngStream rng(seed, 0x74);
  for (int c = 0; c < cases; ++c) {
    const bool mlp = c % 2 == 1;
    const int agents = 1 + rng.uniform_int(3);
    const int actions = 2 + rng.uniform_int(4);
    PolicyParams p;
    if (mlp) {
      const int obs_dim = 1 + rng.uniform_int(4);
      const int hidden = 2 + rng.uniform_int(6);
      p = make_mlp_policy(agents, obs_dim, actions, hidden, rng);
    } else {
      const int obs_count = 1 + rng.uniform_int(4);
      p = make_tabular_policy(agents, obs_count, actions);
      for (auto& head : p.heads)
        for (auto& x : head) x = 0.5 * rng.normal();
    }
    const std::size_t n = 16;
    std::vector<Observation> obs(n);
    std::vector<int> acts(n);
    Vec logp(n, 0.0), adv(n);
    for (std::size_t t = 0; t < n; ++t) {
      if (mlp) {
        obs[t].id = -1;
        obs[t].features.resize(p.layout.obs_dim);
        for (auto& x : obs[t].features) x = rng.normal();
      } else {
        obs[t].id = rng.uniform_int(p.layout.obs_count);
      }
      acts[t] = rng.uniform_int(actions);
      adv[t] = rng.normal();
    }
    AgentBatchView view;
    view.obs = obs.data();
    view.actions = acts.data();
    view.logp_old = logp.data();
    view.advantages = adv.data();
    view.n = n;
    const int agent = rng.uniform_int(agents);
    const double err = fd_max_rel_error(p, agent, view);
    ++r.cases;
    track(r, err, mlp ? 1e-4 : 1e-6, mlp ? "mlp gradient" : "tabular gradient");
  }
  r.pass = r.failures == 0;
  return r;
}

// direct truncated sums; the recursion under test must match them
Vec forward_gae(const Vec& deltas, const std::vector<std::uint8_t>& term,
                double gamma, double lambda) {
  const std::size_t n = deltas.size();
  Vec adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0, w = 1.0;
    for (std::size_t s = t; s < n; ++s) {
      acc += w * deltas[s];
      if (term[s]) break;
      w *= gamma * lambda;
    }
    adv[t] = acc;
  }
  return adv;
}

VerifyReport verify_gae(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "gae";
  RngStream rng(seed, 0x75);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(64));
    Vec deltas(n);
    std::vector<std::uint8_t> term(n, 0);
    for (auto& d : deltas) d = rng.normal();
    for (auto& t : term) t = rng.uniform() < 0.15 ? 1 : 0;
    const double gamma = rng.uniform();
    const double lambda = rng.uniform();
    const Vec a = gae_advantages(deltas, term, gamma, lambda);
    const Vec b = forward_gae(deltas, term, gamma, lambda);
    ++r.cases;
    double diff = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      diff = std::max(diff,
                      std::abs(a[t] - b[t]) / std::max(1.0, std::abs(b[t])));
    track(r, diff, 1e-12, "backward vs forward");
    const Vec a0 = gae_advantages(deltas, term, gamma, 0.0);
    double d0 = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      d0 = std::max(d0, std::abs(a0[t] - deltas[t]));
    track(r, d0, 0.0, "lambda zero identity");
  }
  r.pass = r.failures == 0;
  return r;
}

VerifyReport verify_margin(int cases, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "margin";
  const std::vector<double> etas = {1e-3, 1e-4, 1e-5};
  for (int c = 0; c < cases; ++c) {
    const TeamQuadratic env(3, 4, seed + static_cast<std::uint64_t>(c));
    const MarginReport m = quadratic_margin_check(env, etas, 10, seed + c);
    r.cases += m.cases;
    track(r, m.worst_expansion_excess, 0.0, "expansion bound excess");
    track(r, -m.worst_alignment_slack, 1e-8, "alignment slack");
  }
  r.pass = r.failures == 0;
  return r;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  return {"qp", "kkt", "gamma_factor", "gradcheck", "gae", "margin"};
}

VerifyReport run_verify_suite(const std::string& suite, int cases,
                              std::uint64_t seed) {
  if (cases < 1)
    throw std::invalid_argument("verify: cases must be >= 1");
  if (suite == "qp") return verify_qp(cases, seed);
  if (suite == "kkt") return verify_kkt_suite(cases, seed);
  if (suite == "gamma_factor") return verify_gamma(cases, seed);
  if (suite == "gradcheck") return verify_gradcheck(cases, seed);
  if (suite == "gae") return verify_gae(cases, seed);
  if (suite == "margin") return verify_margin(std::max(1, cases / 10), seed);
  throw std::invalid_argument("unknown verify suite '" + suite + "'");
}

std::string format_report(const VerifyReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "suite %-12s %6d cases  %d failures  worst %.3g  [%s]%s%s",
                r.suite.c_str(), r.cases, r.failures, r.worst,
                r.pass ? "pass" : "FAIL", r.detail.empty() ? "" : "  ",
                r.detail.c_str());
  return buf;
}

}  // namespace congrad
