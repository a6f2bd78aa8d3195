#include "congrad/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace congrad {

namespace {

void validate_set(const GradientSet& gs) {
  if (gs.g.empty())
    throw std::invalid_argument("solve_consensus_qp: empty gradient set");
  const std::size_t d = gs.g[0].size();
  if (d == 0) throw std::invalid_argument("solve_consensus_qp: zero-dimensional gradients");
  for (std::size_t i = 0; i < gs.g.size(); ++i) {
    if (gs.g[i].size() != d)
      throw std::invalid_argument("solve_consensus_qp: dimension mismatch at index " +
                                  std::to_string(i));
    if (!all_finite(gs.g[i]))
      throw std::invalid_argument("solve_consensus_qp: non-finite gradient at index " +
                                  std::to_string(i));
  }
}

Vec mat_vec(const GramMatrix& p, const Vec& c) {
  Vec out(p.n, 0.0);
  for (int i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < p.n; ++j) s += p.at(i, j) * c[j];
    out[i] = s;
  }
  return out;
}

double fw_gap(const Vec& c, const Vec& pc) {
  double ctpc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) ctpc += c[i] * pc[i];
  double mn = pc[0];
  for (double x : pc) mn = std::min(mn, x);
  return ctpc - mn;
}

Vec combine(const GradientSet& gs, const Vec& c) {
  Vec u(gs.dim(), 0.0);
  for (std::size_t i = 0; i < gs.count(); ++i) axpy(c[i], gs.g[i], u);
  return u;
}

// Equality-constrained face problem min (1/2) x'P_S x with sum x = 1, via
// full-pivot Gauss-Jordan on the KKT system. Rank-deficient pivots leave the
// corresponding variables at zero (any face solution is acceptable; the
// caller re-checks the objective).
bool solve_face_kkt(const GramMatrix& p, const std::vector<int>& sup, Vec& x) {
  const int m = static_cast<int>(sup.size());
  const int dim = m + 1;
  std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
  Vec b(dim, 0.0);
  for (int r = 0; r < m; ++r) {
    for (int c2 = 0; c2 < m; ++c2)
      a[static_cast<std::size_t>(r) * dim + c2] = p.at(sup[r], sup[c2]);
    a[static_cast<std::size_t>(r) * dim + m] = 1.0;
    a[static_cast<std::size_t>(m) * dim + r] = 1.0;
  }
  b[m] = 1.0;

  double scale = 1.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  const double pivot_floor = scale * 1e-14;

  std::vector<int> colperm(dim);
  for (int i = 0; i < dim; ++i) colperm[i] = i;
  Vec sol(dim, 0.0);
  int rank = dim;
  for (int k = 0; k < dim; ++k) {
    int pr = k, pcn = k;
    double best = 0.0;
    for (int r = k; r < dim; ++r)
      for (int c2 = k; c2 < dim; ++c2) {
        const double v = std::abs(a[static_cast<std::size_t>(r) * dim + c2]);
        if (v > best) {
          best = v;
          pr = r;
          pcn = c2;
        }
      }
    if (best <= pivot_floor) {
      rank = k;
      break;
    }
    if (pr != k) {
      for (int c2 = 0; c2 < dim; ++c2)
        std::swap(a[static_cast<std::size_t>(pr) * dim + c2],
                  a[static_cast<std::size_t>(k) * dim + c2]);
      std::swap(b[pr], b[k]);
    }
    if (pcn != k) {
      for (int r = 0; r < dim; ++r)
        std::swap(a[static_cast<std::size_t>(r) * dim + pcn],
                  a[static_cast<std::size_t>(r) * dim + k]);
      std::swap(colperm[pcn], colperm[k]);
    }
    const double piv = a[static_cast<std::size_t>(k) * dim + k];
    for (int c2 = k; c2 < dim; ++c2) a[static_cast<std::size_t>(k) * dim + c2] /= piv;
    b[k] /= piv;
    for (int r = 0; r < dim; ++r) {
      if (r == k) continue;
      const double fct = a[static_cast<std::size_t>(r) * dim + k];
      if (fct == 0.0) continue;
      for (int c2 = k; c2 < dim; ++c2)
        a[static_cast<std::size_t>(r) * dim + c2] -=
            fct * a[static_cast<std::size_t>(k) * dim + c2];
      b[r] -= fct * b[k];
    }
  }
  for (int k = 0; k < rank; ++k) sol[colperm[k]] = b[k];
  if (!all_finite(sol)) return false;
  x.assign(sol.begin(), sol.begin() + m);
  return true;
}

// Exact solve on the active support with a ratio-test inner loop (Wolfe's
// minor cycle): step from the feasible weights toward the affine KKT
// solution only as far as nonnegativity allows and drop the coordinates
// that reach zero. The objective is monotone along each segment, so the
// polished point is never worse than the entry point.
bool face_polish(const GramMatrix& p, Vec& c, Vec& pc, double& f) {
  const int n = p.n;
  std::vector<int> sup;
  Vec w;
  for (int j = 0; j < n; ++j)
    if (c[j] > 0.0) {
      sup.push_back(j);
      w.push_back(c[j]);
    }
  for (int guard = 0; guard <= n + 1 && !sup.empty(); ++guard) {
    Vec x;
    if (!solve_face_kkt(p, sup, x)) return false;
    bool neg = false;
    for (double xi : x) neg = neg || xi < -1e-12;
    if (!neg) {
      Vec cand(n, 0.0);
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        cand[sup[i]] = std::max(x[i], 0.0);
        s += cand[sup[i]];
      }
      if (s <= 0.0) return false;
      for (double& v : cand) v /= s;
      Vec pcand = mat_vec(p, cand);
      const double fcand = 0.5 * dot(cand, pcand);
      if (!(fcand <= f + 1e-12 * std::max(1.0, std::abs(f)))) return false;
      c = std::move(cand);
      pc = std::move(pcand);
      f = fcand;
      return true;
    }
    double alpha = 1.0;
    std::size_t block = x.size();
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < 0.0 && w[i] - x[i] > 0.0) {
        const double r = w[i] / (w[i] - x[i]);
        if (r < alpha) {
          alpha = r;
          block = i;
        }
      }
    if (block == x.size()) return false;
    std::vector<int> nsup;
    Vec nw;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = w[i] + alpha * (x[i] - w[i]);
      if (i != block && v > 1e-14) {
        nsup.push_back(sup[i]);
        nw.push_back(v);
        s += v;
      }
    }
    if (nsup.empty() || s <= 0.0) return false;
    for (double& v : nw) v /= s;
    sup = std::move(nsup);
    w = std::move(nw);
  }
  return false;
}

}  // namespace

ConsensusOutcome solve_consensus_qp(const GradientSet& gs, double tol,
                                    int max_iter, QpAlgorithm alg,
                                    ExecMode mode) {
  validate_set(gs);
  if (tol < 0.0) throw std::invalid_argument("solve_consensus_qp: tol must be >= 0");
  if (max_iter < 0)
    throw std::invalid_argument("solve_consensus_qp: max_iter must be >= 0");

  const int n = static_cast<int>(gs.count());
  ConsensusOutcome out;
  if (n == 1) {
    out.weights = {1.0};
    out.u_star = gs.g[0];
    out.objective = 0.5 * norm_sq(out.u_star);
    out.converged = true;
    return out;
  }

  GramMatrix p = gram_matrix(gs.g, mode);
  if (!all_finite(p.a))
    throw std::runtime_error("solve_consensus_qp: non-finite Gram entries");

  double amax = 0.0;
  for (double x : p.a) amax = std::max(amax, std::abs(x));
  if (amax == 0.0) {
    // every gradient is zero; any weights are optimal
    out.weights.assign(n, 1.0 / n);
    out.u_star.assign(gs.dim(), 0.0);
    out.converged = true;
    return out;
  }

  double diag_max = 0.0;
  for (int i = 0; i < n; ++i) diag_max = std::max(diag_max, p.at(i, i));
  const double lam = 1.02 * std::max(power_iteration(p), diag_max);
  double step = 1.0 / lam;

  Vec c(n, 1.0 / n);
  Vec pc = mat_vec(p, c);
  double f = 0.5 * dot(c, pc);
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    if (fw_gap(c, pc) <= tol) {
      converged = true;
      break;
    }
    if (alg == QpAlgorithm::ProjectedGradient) {
      // periodic exact solve on the identified face; degenerate optima
      // (u* at or near zero) otherwise pin the gap above any useful tol
      if (it % 64 == 63 && face_polish(p, c, pc, f)) continue;
      Vec cand(n);
      for (int i = 0; i < n; ++i) cand[i] = c[i] - step * pc[i];
      cand = project_to_simplex(cand);
      Vec pcand = mat_vec(p, cand);
      const double fcand = 0.5 * dot(cand, pcand);
      // relative buffer: rounding jitter in f is ~1e-16 |f|, and rejecting
      // those phantom increases would halve the step into a stall
      if (fcand <= f + 1e-12 * std::max(1.0, std::abs(f))) {
        c = std::move(cand);
        pc = std::move(pcand);
        f = fcand;
      } else {
        step *= 0.5;  // lambda_max estimate was low; back off
      }
    } else {
      int j = 0;
      for (int k = 1; k < n; ++k)
        if (pc[k] < pc[j]) j = k;
      const double ctpc = dot(c, pc);
      const double dpd = ctpc - 2.0 * pc[j] + p.at(j, j);
      double gamma = 1.0;
      if (dpd > 0.0) gamma = std::clamp((ctpc - pc[j]) / dpd, 0.0, 1.0);
      for (int k = 0; k < n; ++k) c[k] *= 1.0 - gamma;
      c[j] += gamma;
      pc = mat_vec(p, c);
      f = 0.5 * dot(c, pc);
    }
  }

  out.weights = c;
  out.u_star = combine(gs, c);
  out.objective = 0.5 * norm_sq(out.u_star);
  out.gap = fw_gap(c, pc);
  out.iterations = it;
  out.converged = converged || out.gap <= tol;
  return out;
}

KktReport verify_kkt(const GradientSet& gs, const ConsensusOutcome& out,
                     double eps) {
  validate_set(gs);
  if (out.weights.size() != gs.count())
    throw std::invalid_argument("verify_kkt: weight count mismatch");
  if (out.u_star.size() != gs.dim())
    throw std::invalid_argument("verify_kkt: u_star dimension mismatch");

  KktReport rep;
  rep.lambda = norm_sq(out.u_star);
  rep.mu.resize(gs.count());
  double viol = 0.0;
  double wsum = 0.0;
  for (std::size_t j = 0; j < gs.count(); ++j) {
    rep.mu[j] = dot(gs.g[j], out.u_star) - rep.lambda;
    viol = std::max(viol, -rep.mu[j]);                       // dual feasibility
    viol = std::max(viol, std::abs(out.weights[j] * rep.mu[j]));  // slackness
    viol = std::max(viol, -out.weights[j]);                  // primal bounds
    wsum += out.weights[j];
  }
  viol = std::max(viol, std::abs(wsum - 1.0));
  rep.max_violation = viol;
  rep.pass = viol <= eps;
  return rep;
}

PairSolution min_norm_pair(const Vec& g1, const Vec& g2) {
  if (g1.size() != g2.size())
    throw std::invalid_argument("min_norm_pair: size mismatch");
  PairSolution s;
  Vec diff(g1.size());
  for (std::size_t i = 0; i < g1.size(); ++i) diff[i] = g1[i] - g2[i];
  const double den = norm_sq(diff);
  if (den == 0.0) {
    s.w1 = 1.0;
    s.w2 = 0.0;
    s.u = g1;
    return s;
  }
  double c = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) c += -diff[i] * g2[i];
  c = std::clamp(c / den, 0.0, 1.0);
  s.w1 = c;
  s.w2 = 1.0 - c;
  s.u.assign(g1.size(), 0.0);
  for (std::size_t i = 0; i < g1.size(); ++i) s.u[i] = c * g1[i] + (1.0 - c) * g2[i];
  return s;
}

double alignment_factor(const Vec& g, const Vec& u) {
  const double ips = dot(g, u);
  const double ng = norm_sq(g);
  const double nu = norm_sq(u);
  if (ng + nu == 0.0)
    throw std::invalid_argument("alignment_factor: both inputs are zero");
  return (nu + ips) / (ng + nu);
}

Vec aligned_direction(const Vec& g, const Vec& u) {
  const double f = alignment_factor(g, u);
  Vec v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f * (g[i] + u[i]);
  return v;
}

bool equilibrium_reached(const Vec& u_star, double tol) {
  if (tol < 0.0) throw std::invalid_argument("equilibrium_reached: tol must be >= 0");
  return norm(u_star) <= tol;
}

}  // namespace congrad
