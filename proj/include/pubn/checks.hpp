#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pubn/model.hpp"
#include "pubn/risk.hpp"

namespace pubn {

// Randomised property suites shared by the `check` verb and the test binaries.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest observed deviation, where meaningful
  std::string detail;
};

// |lhs - rhs| of the sigma-weighted decomposition with h = sigma, over random
// discrete specs of at most 64 points.
CheckResult check_decomposition(std::uint64_t seed, std::size_t cases, double tolerance = 1e-12);

// |mean - truth| < 3 SE of the Monte-Carlo estimate on random configs.
// Estimator::UPU or Estimator::PUbN (true sigma, eta below the smallest
// positive sigma). Passes when at least min_pass configs pass.
CheckResult check_unbiased(Estimator estimator, std::uint64_t seed, std::size_t configs, std::size_t trials,
                           std::size_t n, std::size_t min_pass);

// risk_nnpu >= pi R_P^+ and risk_nnpu >= risk_upu, exactly.
CheckResult check_nnpu_ordering(std::uint64_t seed, std::size_t cases);

// PNU at gamma 0 and 1 against uPU and PN; PUbN\N against PUbN with rho = 0
// and no bN data.
CheckResult check_endpoints(std::uint64_t seed, std::size_t cases, double tolerance = 1e-12);

// Analytic against central-difference gradients on random batches.
CheckResult check_gradients(ScorerKind kind, std::uint64_t seed, std::size_t batches, double tolerance);

// Count of sigma_hat <= eta against the order-statistic rule.
CheckResult check_eta_rule(std::uint64_t seed, std::size_t cases);

}  // namespace pubn
