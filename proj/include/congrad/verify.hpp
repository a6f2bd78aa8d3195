#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace congrad {

struct VerifyReport {
  std::string suite;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // largest residual seen (0 when every residual is exact)
  std::string detail;
  bool pass = false;
};

// Randomized property sweeps runnable from the command line:
//   qp            simplex feasibility, reconstruction and Pareto margin of
//                 the consensus solve on adversarial gradient sets
//   kkt           stationarity certificate residuals
//   gamma_factor  blend factor range and non-conflict of aligned directions
//   gradcheck     analytic policy gradients vs central finite differences
//   gae           backward advantage recursion vs direct forward sums
//   margin        quadratic first-order expansion and alignment bounds
std::vector<std::string> verify_suite_names();

VerifyReport run_verify_suite(const std::string& suite, int cases,
                              std::uint64_t seed);

std::string format_report(const VerifyReport& r);

}  // namespace congrad
