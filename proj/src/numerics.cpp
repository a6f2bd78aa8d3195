#include "congrad/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace congrad {

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: size mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(const Vec& v) { return std::sqrt(norm_sq(v)); }

void axpy(double a, const Vec& x, Vec& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("axpy: size mismatch " + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

namespace detail {

void run_chunks(std::size_t num_chunks, ExecMode mode,
                const void* ctx, void (*body)(const void*, std::size_t)) {
  if (mode == ExecMode::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(num_chunks); ++c)
      body(ctx, static_cast<std::size_t>(c));
  } else {
    for (std::size_t c = 0; c < num_chunks; ++c) body(ctx, c);
  }
}

}  // namespace detail

GramMatrix gram_matrix(const std::vector<Vec>& g, ExecMode mode) {
  const int n = static_cast<int>(g.size());
  if (n == 0) throw std::invalid_argument("gram_matrix: empty gradient set");
  for (int i = 1; i < n; ++i)
    if (g[i].size() != g[0].size())
      throw std::invalid_argument("gram_matrix: dimension mismatch at index " +
                                  std::to_string(i));
  GramMatrix p;
  p.n = n;
  p.a.assign(static_cast<std::size_t>(n) * n, 0.0);
  // entries are independent dot products; no cross-thread reduction involved
  if (mode == ExecMode::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) p.at(i, j) = dot(g[i], g[j]);
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) p.at(i, j) = dot(g[i], g[j]);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) p.at(i, j) = p.at(j, i);
  return p;
}

Vec project_to_simplex(const Vec& v) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("project_to_simplex: empty input");
  if (!all_finite(v))
    throw std::invalid_argument("project_to_simplex: non-finite input");
  Vec u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < n; ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = j;
      tau = t;
    }
  }
  (void)rho;
  Vec w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::max(v[i] - tau, 0.0);
  return w;
}

double power_iteration(const GramMatrix& p, int max_iters) {
  const int n = p.n;
  if (n <= 0) throw std::invalid_argument("power_iteration: empty matrix");
  Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vec w(n);
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += p.at(i, j) * v[j];
      w[i] = s;
    }
    const double nw = norm(w);
    if (nw == 0.0) break;
    for (int i = 0; i < n; ++i) v[i] = w[i] / nw;
    double lam = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += p.at(i, j) * v[j];
      lam += v[i] * s;
    }
    if (std::abs(lam - lambda) <= 1e-13 * std::max(1.0, std::abs(lam))) {
      lambda = lam;
      break;
    }
    lambda = lam;
  }
  return lambda;
}

void cholesky_factor(std::vector<double>& a, int n) {
  if (n <= 0 || a.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("cholesky_factor: bad dimensions");
  for (int k = 0; k < n; ++k) {
    double d = a[static_cast<std::size_t>(k) * n + k];
    for (int j = 0; j < k; ++j) {
      const double l = a[static_cast<std::size_t>(k) * n + j];
      d -= l * l;
    }
    if (d <= 0.0)
      throw std::runtime_error("cholesky_factor: not positive definite at pivot " +
                               std::to_string(k));
    const double lkk = std::sqrt(d);
    a[static_cast<std::size_t>(k) * n + k] = lkk;
    for (int i = k + 1; i < n; ++i) {
      double s = a[static_cast<std::size_t>(i) * n + k];
      for (int j = 0; j < k; ++j)
        s -= a[static_cast<std::size_t>(i) * n + j] *
             a[static_cast<std::size_t>(k) * n + j];
      a[static_cast<std::size_t>(i) * n + k] = s / lkk;
    }
    for (int j = k + 1; j < n; ++j) a[static_cast<std::size_t>(k) * n + j] = 0.0;
  }
}

}  // namespace congrad
