#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pubn/core.hpp"
#include "pubn/model.hpp"

namespace pubn {

enum class Estimator { PN, UPU, NNPU, PNU, NNPNU, NNPUPlusPN, PUbN, PUbNNoN };

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view name);

// Whether training applies the non-negative correction branch.
bool is_non_negative(Estimator e);
bool uses_gamma(Estimator e);
bool uses_sigma(Estimator e);
bool uses_bn(Estimator e);

// sigma_hat: x -> estimate of p(s=+1 | x) in [0, 1].
class SigmaEstimate {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  SigmaEstimate() = default;
  explicit SigmaEstimate(Fn fn) : fn_(std::move(fn)) {}

  // sigmoid(g(x)) over a copy of the scorer.
  static SigmaEstimate from_scorer(const Scorer& scorer);

  // Throws InvalidSigma when the value leaves [0, 1].
  double operator()(std::span<const double> x) const;
  explicit operator bool() const noexcept { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

struct RiskSpec {
  Estimator estimator = Estimator::NNPU;
  Loss loss = kLogisticLoss;
  std::optional<double> gamma;  // PNU family
  double beta = 0.0;            // non-negative correction threshold
  std::optional<double> tau;    // PUbN family
  std::optional<double> eta;    // derived from tau by select_eta
  // uPU/nnPU only: the labeled class is P (mass pi) together with bN (mass
  // rho), i.e. the s = +1 population used to estimate sigma.
  bool pool_bn = false;

  // Throws Config when hyperparameters are missing, superfluous or out of range.
  void validate() const;
};

struct RiskBreakdown {
  double total = 0.0;
  double positive_part = 0.0;  // labeled terms that are never clamped
  double negative_part = 0.0;  // the remainder after any clamp
  double remainder = 0.0;      // the remainder before any clamp
  bool corrected = false;      // clamp fired (remainder < 0)
};

// Empirical partial risks; NaN where the split was not available.
struct PartialRisks {
  double p_pos = 0.0;   // R_P^+
  double p_neg = 0.0;   // R_P^-
  double n_neg = 0.0;   // R_N^- (or R_bN^- when bN stands in for N)
  double u_neg = 0.0;   // R_U^-
};

// Formula-level combinations of partial risks.
RiskBreakdown combine_pn(const PartialRisks& r, double pi);
RiskBreakdown combine_upu(const PartialRisks& r, double pi);
RiskBreakdown combine_nnpu(const PartialRisks& r, double pi);
RiskBreakdown combine_pnu(const PartialRisks& r, double pi, double gamma);

enum class NnpnuVariant { Joint, Split };
RiskBreakdown combine_nnpnu(const PartialRisks& r, double pi, double gamma, NnpnuVariant variant);

// The bN pool plays the role of N for the PN and PNU family.
RiskBreakdown risk_pn(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss);
RiskBreakdown risk_upu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss);
RiskBreakdown risk_nnpu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss);
// uPU/nnPU partials with P and bN pooled as the labeled class of prior
// pi + rho; each labeled partial is (pi R_P + rho R_bN) / (pi + rho).
PartialRisks pooled_pu_partials(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss);
RiskBreakdown risk_pnu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                       double gamma);
RiskBreakdown risk_nnpnu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                         double gamma, NnpnuVariant variant);

struct EtaSelection {
  double eta = 0.0;
  std::size_t target = 0;    // floor(tau * (1 - pi - rho) * n_U)
  std::size_t included = 0;  // #{x in U : sigma_hat(x) <= eta}
};

// floor(tau * (1 - pi - rho) * n_U), robust to representation error just
// below an integer.
std::size_t eta_target_count(double tau, const Priors& priors, std::size_t n_unlabeled);

EtaSelection select_eta(std::span<const double> sigma_values, const Priors& priors, double tau);
EtaSelection select_eta(const SigmaEstimate& sigma, std::span<const Sample> unlabeled, const Priors& priors,
                        double tau);

RiskBreakdown risk_pubn(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                        const SigmaEstimate& sigma, double eta);
// PUbN with no bN data: rho = 0 and the bN pool ignored.
RiskBreakdown risk_pubn_no_n(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                             const SigmaEstimate& sigma, double eta);

// Dispatch on spec.estimator. PUbN family requires spec.eta and sigma.
RiskBreakdown evaluate_risk(const RiskSpec& spec, const Partition& data, const Priors& priors,
                            const DecisionFunction& g, const SigmaEstimate* sigma = nullptr);

enum class TermGroup { Labeled, Remainder };

struct WeightedTerm {
  WeightedExample example;
  TermGroup group = TermGroup::Labeled;
};

// Every estimator flattened into sum_i w_i * loss(s_i * g(x_i)). Terms in
// the Remainder group make up the quantity that non-negative estimators
// clamp at zero. Zero-weight terms are omitted. Terms reference the features
// of `batch`, which must outlive the result.
struct WeightedBatch {
  std::vector<WeightedTerm> terms;
  bool correctable = false;

  double evaluate(const DecisionFunction& g, Loss loss) const;
  double evaluate(const DecisionFunction& g, Loss loss, TermGroup group) const;
  std::vector<WeightedExample> examples() const;
  std::vector<WeightedExample> examples(TermGroup group, double scale) const;
};

WeightedBatch assemble_weights(const RiskSpec& spec, const Partition& batch, const Priors& priors,
                               const SigmaEstimate* sigma = nullptr);

}  // namespace pubn
