#pragma once

#include <cstddef>
#include <vector>

namespace congrad {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm_sq(const Vec& v);
double norm(const Vec& v);
// y += a * x
void axpy(double a, const Vec& x, Vec& y);
bool all_finite(const Vec& v);

// Execution mode for the data-parallel kernels. Serial and Parallel use the
// same fixed chunking and the same chunk-ordered combine, so they produce
// bitwise-identical results for any thread count.
enum class ExecMode { Serial, Parallel };

inline constexpr std::size_t kReduceChunk = 256;

namespace detail {
void run_chunks(std::size_t num_chunks, ExecMode mode,
                const void* ctx, void (*body)(const void*, std::size_t));
}

// Deterministic sum of per-sample contributions: add(t, acc) must add sample
// t into acc[0..dim). Partial sums are kept per chunk and combined serially
// in chunk order.
template <class AddSample>
void accumulate_chunked(std::size_t n, std::size_t dim, const AddSample& add,
                        double* out, ExecMode mode) {
  const std::size_t num_chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partials(num_chunks * dim, 0.0);
  struct Ctx {
    std::size_t n, dim;
    const AddSample* add;
    double* partials;
  } ctx{n, dim, &add, partials.data()};
  detail::run_chunks(
      num_chunks, mode, &ctx, [](const void* p, std::size_t c) {
        const Ctx& cx = *static_cast<const Ctx*>(p);
        double* acc = cx.partials + c * cx.dim;
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi = lo + kReduceChunk < cx.n ? lo + kReduceChunk : cx.n;
        for (std::size_t t = lo; t < hi; ++t) (*cx.add)(t, acc);
      });
  for (std::size_t d = 0; d < dim; ++d) out[d] = 0.0;
  for (std::size_t c = 0; c < num_chunks; ++c)
    for (std::size_t d = 0; d < dim; ++d) out[d] += partials[c * dim + d];
}

// Symmetric matrix of pairwise inner products, row-major.
struct GramMatrix {
  int n = 0;
  Vec a;

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

GramMatrix gram_matrix(const std::vector<Vec>& g, ExecMode mode = ExecMode::Serial);

// Euclidean projection onto the probability simplex (sort-then-threshold).
// Output entries are exactly nonnegative and sum to 1 up to rounding.
Vec project_to_simplex(const Vec& v);

// Largest eigenvalue estimate for a symmetric PSD matrix.
double power_iteration(const GramMatrix& p, int max_iters = 200);

// In-place lower Cholesky factor of a row-major SPD matrix.
// Throws std::runtime_error naming the pivot if the matrix is not SPD.
void cholesky_factor(std::vector<double>& a, int n);

}  // namespace congrad
