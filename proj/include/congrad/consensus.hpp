#pragma once

#include "congrad/numerics.hpp"

namespace congrad {

// Per-agent gradients sharing one parameter space.
struct GradientSet {
  std::vector<Vec> g;

  std::size_t count() const { return g.size(); }
  std::size_t dim() const { return g.empty() ? 0 : g[0].size(); }
};

enum class QpAlgorithm { ProjectedGradient, FrankWolfe };

// Minimum-norm point of the convex hull of the gradients, as simplex weights
// over the inputs. objective = (1/2)||u*||^2; gap is the final Frank-Wolfe
// duality gap max_j (c'Pc - (Pc)_j).
struct ConsensusOutcome {
  Vec u_star;
  Vec weights;
  int iterations = 0;
  double objective = 0.0;
  double gap = 0.0;
  bool converged = false;
};

ConsensusOutcome solve_consensus_qp(const GradientSet& gs, double tol = 1e-8,
                                    int max_iter = 10000,
                                    QpAlgorithm alg = QpAlgorithm::ProjectedGradient,
                                    ExecMode mode = ExecMode::Serial);

// Stationarity certificate: lambda = ||u*||^2 and mu_j = g_j'u* - lambda must
// be nonnegative with w_j mu_j ~= 0. max_violation aggregates dual
// feasibility, complementary slackness and simplex feasibility residuals.
struct KktReport {
  double lambda = 0.0;
  Vec mu;
  double max_violation = 0.0;
  bool pass = false;
};

KktReport verify_kkt(const GradientSet& gs, const ConsensusOutcome& out,
                     double eps = 1e-6);

// Exact two-gradient solution; used as an independent oracle in tests.
struct PairSolution {
  Vec u;
  double w1 = 0.0;
  double w2 = 0.0;
};

PairSolution min_norm_pair(const Vec& g1, const Vec& g2);

// Blend factor (||u||^2 + g'u) / (||g||^2 + ||u||^2); throws if both inputs
// are zero. In [0,1] whenever g'u >= ||u||^2 and ||g|| >= ||u||.
double alignment_factor(const Vec& g, const Vec& u);

// factor * (g + u)
Vec aligned_direction(const Vec& g, const Vec& u);

bool equilibrium_reached(const Vec& u_star, double tol);

}  // namespace congrad
