#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "pubn/core.hpp"
#include "pubn/model.hpp"
#include "pubn/risk.hpp"
#include "pubn/synthgen.hpp"

namespace pubn {

// Population risks under a discrete spec, by exact summation. Partials whose
// conditioning event has zero mass are reported as 0.
struct ExactRisks {
  double true_risk = 0.0;
  double p_pos = 0.0;  // R_P^+
  double p_neg = 0.0;  // R_P^-
  double n_neg = 0.0;  // R_N^-
  double u_neg = 0.0;  // R_U^-
  double bn_neg = 0.0; // R_bN^-
  double s_neg = 0.0;  // R_{s=-1}^-
  double pi = 0.0;
  double rho = 0.0;
};

// scores[i] = g(points[i]).
ExactRisks exact_risks(const DiscreteSpec& spec, std::span<const double> scores, Loss loss);
ExactRisks exact_risks(const DiscreteSpec& spec, const DecisionFunction& g, Loss loss);

std::vector<double> scores_on_support(const DiscreteSpec& spec, const DecisionFunction& g);

struct DecompositionGap {
  double lhs = 0.0;  // (1 - pi - rho) R_{s=-1}^-
  double rhs = 0.0;  // U-, P- and bN-weighted terms with the true sigma
  double gap = 0.0;
};

// h[i] = h(points[i]). Throws HypothesisViolated when h > eta at a support
// point of positive mass where sigma = 0.
DecompositionGap decomposition_gap(const DiscreteSpec& spec, std::span<const double> scores, Loss loss,
                                std::span<const double> h, double eta);

// Decision function defined on a finite support by exact lookup.
class SupportTable final : public DecisionFunction {
 public:
  SupportTable(const std::vector<Vector>& points, std::span<const double> values);
  double score(std::span<const double> x) const override;

 private:
  std::map<Vector, double> table_;
};

struct SampleSizes {
  std::size_t n_p = 0;
  std::size_t n_bn = 0;
  std::size_t n_u = 0;
};

struct BiasEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double truth = 0.0;
  std::vector<double> estimates;
};

// Monte-Carlo mean and standard error of an empirical estimator over
// `trials` independent draws, next to the exact true risk. PUbN estimators
// use sigma_hat (per support point; true sigma when empty) and spec.eta.
BiasEstimate estimator_bias(const DiscreteSpec& spec, const RiskSpec& estimator, std::span<const double> scores,
                            const SampleSizes& sizes, std::size_t trials, std::uint64_t seed,
                            std::span<const double> sigma_hat = {});

// Random spec over `points` support points in `dim` dimensions. Some points
// get zero labeled mass, so sigma vanishes on part of the support.
DiscreteSpec random_discrete_spec(std::mt19937_64& rng, std::size_t points, std::size_t dim, bool with_bn = true);

}  // namespace pubn
