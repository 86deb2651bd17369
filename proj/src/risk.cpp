#include "pubn/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pubn {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::PN: return "PN";
    case Estimator::UPU: return "uPU";
    case Estimator::NNPU: return "nnPU";
    case Estimator::PNU: return "PNU";
    case Estimator::NNPNU: return "nnPNU";
    case Estimator::NNPUPlusPN: return "nnPU+PN";
    case Estimator::PUbN: return "PUbN";
    case Estimator::PUbNNoN: return "PUbN\\N";
  }
  return "?";
}

Estimator estimator_from_string(std::string_view name) {
  if (name == "PN") return Estimator::PN;
  if (name == "uPU") return Estimator::UPU;
  if (name == "nnPU") return Estimator::NNPU;
  if (name == "PNU") return Estimator::PNU;
  if (name == "nnPNU") return Estimator::NNPNU;
  if (name == "nnPU+PN") return Estimator::NNPUPlusPN;
  if (name == "PUbN") return Estimator::PUbN;
  if (name == "PUbN\\N" || name == "PUbN-N" || name == "PUbN_no_N") return Estimator::PUbNNoN;
  throw Error(ErrorKind::Config, "unknown estimator '" + std::string(name) + "'");
}

bool is_non_negative(Estimator e) {
  return e == Estimator::NNPU || e == Estimator::NNPNU || e == Estimator::NNPUPlusPN;
}

bool uses_gamma(Estimator e) {
  return e == Estimator::PNU || e == Estimator::NNPNU || e == Estimator::NNPUPlusPN;
}

bool uses_sigma(Estimator e) { return e == Estimator::PUbN || e == Estimator::PUbNNoN; }

bool uses_bn(Estimator e) { return e == Estimator::PN || uses_gamma(e) || e == Estimator::PUbN; }

SigmaEstimate SigmaEstimate::from_scorer(const Scorer& scorer) {
  return SigmaEstimate([copy = scorer](std::span<const double> x) { return sigmoid(copy.forward(x)); });
}

double SigmaEstimate::operator()(std::span<const double> x) const {
  if (!fn_) throw Error(ErrorKind::InvalidSigma, "sigma estimate is not set");
  const double v = fn_(x);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorKind::InvalidSigma, "sigma estimate " + std::to_string(v) + " outside [0, 1]");
  }
  return v;
}

void RiskSpec::validate() const {
  const bool pnu = uses_gamma(estimator);
  const bool pubn = uses_sigma(estimator);
  if (pnu != gamma.has_value()) {
    throw Error(ErrorKind::Config, std::string(to_string(estimator)) +
                                       (pnu ? " requires gamma" : " does not take gamma"));
  }
  if (gamma && !(*gamma >= 0.0 && *gamma <= 1.0)) throw Error(ErrorKind::Config, "gamma must lie in [0, 1]");
  if (!pubn && (tau || eta)) {
    throw Error(ErrorKind::Config, std::string(to_string(estimator)) + " does not take tau/eta");
  }
  if (pubn && !tau && !eta) throw Error(ErrorKind::Config, std::string(to_string(estimator)) + " requires tau");
  if (tau && !(*tau > 0.0)) throw Error(ErrorKind::Config, "tau must be positive");
  if (!(beta >= 0.0)) throw Error(ErrorKind::Config, "beta must be nonnegative");
  if (pool_bn && estimator != Estimator::UPU && estimator != Estimator::NNPU) {
    throw Error(ErrorKind::Config, "pooled bN applies to uPU and nnPU only");
  }
}

RiskBreakdown combine_pn(const PartialRisks& r, double pi) {
  RiskBreakdown b;
  b.positive_part = pi * r.p_pos;
  b.negative_part = (1.0 - pi) * r.n_neg;
  b.remainder = b.negative_part;
  b.total = b.positive_part + b.negative_part;
  return b;
}

RiskBreakdown combine_upu(const PartialRisks& r, double pi) {
  RiskBreakdown b;
  b.positive_part = pi * r.p_pos;
  b.remainder = r.u_neg - pi * r.p_neg;
  b.negative_part = b.remainder;
  b.total = b.positive_part + b.negative_part;
  return b;
}

RiskBreakdown combine_nnpu(const PartialRisks& r, double pi) {
  RiskBreakdown b = combine_upu(r, pi);
  if (b.remainder < 0.0) {
    b.corrected = true;
    b.negative_part = 0.0;
  }
  b.total = b.positive_part + b.negative_part;
  return b;
}

namespace {

// gamma (1 - pi) R_N^-, skipped at gamma = 0 so a missing N split is allowed.
double labeled_negative_term(const PartialRisks& r, double pi, double gamma) {
  return gamma == 0.0 ? 0.0 : gamma * ((1.0 - pi) * r.n_neg);
}

// (1 - gamma) (R_U^- - pi R_P^-), skipped at gamma = 1.
double unlabeled_negative_term(const PartialRisks& r, double pi, double gamma) {
  return gamma == 1.0 ? 0.0 : (1.0 - gamma) * (r.u_neg - pi * r.p_neg);
}

}  // namespace

RiskBreakdown combine_pnu(const PartialRisks& r, double pi, double gamma) {
  RiskBreakdown b;
  b.positive_part = pi * r.p_pos;
  const double labeled = labeled_negative_term(r, pi, gamma);
  const double unlabeled = unlabeled_negative_term(r, pi, gamma);
  if (gamma == 0.0) {
    b.remainder = unlabeled;
  } else if (gamma == 1.0) {
    b.remainder = labeled;
  } else {
    b.remainder = labeled + unlabeled;
  }
  b.negative_part = b.remainder;
  b.total = b.positive_part + b.negative_part;
  return b;
}

RiskBreakdown combine_nnpnu(const PartialRisks& r, double pi, double gamma, NnpnuVariant variant) {
  if (variant == NnpnuVariant::Joint) {
    RiskBreakdown b = combine_pnu(r, pi, gamma);
    if (b.remainder < 0.0) {
      b.corrected = true;
      b.negative_part = 0.0;
    }
    b.total = b.positive_part + b.negative_part;
    return b;
  }
  RiskBreakdown b;
  const double labeled = labeled_negative_term(r, pi, gamma);
  b.positive_part = gamma == 0.0 ? pi * r.p_pos : pi * r.p_pos + labeled;
  b.remainder = unlabeled_negative_term(r, pi, gamma);
  b.negative_part = b.remainder;
  if (b.remainder < 0.0) {
    b.corrected = true;
    b.negative_part = 0.0;
  }
  b.total = b.positive_part + b.negative_part;
  return b;
}

namespace {

void require(const SampleList& list, const char* name) {
  if (list.empty()) throw Error(ErrorKind::EmptySplit, std::string(name) + " split is empty");
}

PartialRisks pu_partials(const Partition& data, const DecisionFunction& g, Loss loss) {
  require(data.p, "P");
  require(data.u, "U");
  PartialRisks r;
  r.p_pos = partial_risk(data.p, g, loss, +1);
  r.p_neg = partial_risk(data.p, g, loss, -1);
  r.u_neg = partial_risk(data.u, g, loss, -1);
  r.n_neg = std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace

RiskBreakdown risk_pn(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss) {
  require(data.p, "P");
  require(data.bn, "N");
  PartialRisks r;
  r.p_pos = partial_risk(data.p, g, loss, +1);
  r.n_neg = partial_risk(data.bn, g, loss, -1);
  return combine_pn(r, priors.pi());
}

RiskBreakdown risk_upu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss) {
  return combine_upu(pu_partials(data, g, loss), priors.pi());
}

RiskBreakdown risk_nnpu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss) {
  return combine_nnpu(pu_partials(data, g, loss), priors.pi());
}

PartialRisks pooled_pu_partials(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss) {
  PartialRisks r = pu_partials(data, g, loss);
  if (priors.rho() > 0.0) {
    require(data.bn, "bN");
    const double mass = priors.pi() + priors.rho();
    const double wp = priors.pi() / mass;
    const double wb = priors.rho() / mass;
    r.p_pos = wp * r.p_pos + wb * partial_risk(data.bn, g, loss, +1);
    r.p_neg = wp * r.p_neg + wb * partial_risk(data.bn, g, loss, -1);
  }
  return r;
}

namespace {

PartialRisks pnu_partials(const Partition& data, const DecisionFunction& g, Loss loss, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidInput, "gamma must lie in [0, 1]");
  require(data.p, "P");
  PartialRisks r;
  r.p_pos = partial_risk(data.p, g, loss, +1);
  r.n_neg = r.p_neg = r.u_neg = std::numeric_limits<double>::quiet_NaN();
  if (gamma > 0.0) {
    require(data.bn, "bN");
    r.n_neg = partial_risk(data.bn, g, loss, -1);
  }
  if (gamma < 1.0) {
    require(data.u, "U");
    r.p_neg = partial_risk(data.p, g, loss, -1);
    r.u_neg = partial_risk(data.u, g, loss, -1);
  }
  return r;
}

}  // namespace

RiskBreakdown risk_pnu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                       double gamma) {
  return combine_pnu(pnu_partials(data, g, loss, gamma), priors.pi(), gamma);
}

RiskBreakdown risk_nnpnu(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                         double gamma, NnpnuVariant variant) {
  return combine_nnpnu(pnu_partials(data, g, loss, gamma), priors.pi(), gamma, variant);
}

std::size_t eta_target_count(double tau, const Priors& priors, std::size_t n_unlabeled) {
  const double raw = tau * priors.remainder() * static_cast<double>(n_unlabeled);
  if (!(raw >= 0.0) || !std::isfinite(raw)) throw Error(ErrorKind::InfeasibleTau, "tau must be finite and nonnegative");
  // 0.7 * 0.5 * 20 evaluates to 6.9999999999999991; counts are integers, so
  // snap values within a relative 1e-9 of the next integer.
  return static_cast<std::size_t>(std::floor(raw * (1.0 + 1e-9) + 1e-12));
}

EtaSelection select_eta(std::span<const double> sigma_values, const Priors& priors, double tau) {
  const std::size_t n = sigma_values.size();
  EtaSelection sel;
  sel.target = eta_target_count(tau, priors, n);
  if (sel.target > n) {
    throw Error(ErrorKind::InfeasibleTau, "tau=" + std::to_string(tau) + " asks for " + std::to_string(sel.target) +
                                              " unlabeled samples, only " + std::to_string(n) + " available");
  }
  if (n == 0) {
    sel.eta = 0.0;
    return sel;
  }
  std::vector<double> sorted(sigma_values.begin(), sigma_values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sel.target == 0) {
    sel.eta = std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity());
    sel.included = 0;
    return sel;
  }
  // k-th order statistic; ties at that value are all included.
  sel.eta = sorted[sel.target - 1];
  sel.included = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), sel.eta) - sorted.begin());
  return sel;
}

EtaSelection select_eta(const SigmaEstimate& sigma, std::span<const Sample> unlabeled, const Priors& priors,
                        double tau) {
  std::vector<double> values;
  values.reserve(unlabeled.size());
  for (const Sample& s : unlabeled) values.push_back(sigma(s.features));
  return select_eta(values, priors, tau);
}

namespace {

void check_eta(double eta) {
  if (!(eta <= 1.0) || !std::isfinite(eta)) throw Error(ErrorKind::InvalidInput, "eta must be finite and at most 1");
}

// Corrective weight (1 - s) / s on the labeled branch.
double labeled_branch_weight(double s) {
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidSigma, "sigma estimate is zero on the labeled branch");
  return (1.0 - s) / s;
}

}  // namespace

namespace {

RiskBreakdown pubn_risk(const SampleList& p, std::span<const Sample> bn, const SampleList& u, const Priors& priors,
                        const DecisionFunction& g, Loss loss, const SigmaEstimate& sigma, double eta) {
  struct Pools {
    const SampleList& p;
    std::span<const Sample> bn;
    const SampleList& u;
  } data{p, bn, u};
  check_eta(eta);
  require(data.p, "P");
  require(data.u, "U");
  const bool with_bn = priors.rho() > 0.0;
  if (with_bn && data.bn.empty()) throw Error(ErrorKind::EmptySplit, "bN split is empty");
  const double pi = priors.pi();
  const double rho = priors.rho();

  CompensatedSum u_term;
  for (const Sample& x : data.u) {
    const double s = sigma(x.features);
    if (s <= eta) u_term.add(loss_value(loss, -g.score(x.features)) * (1.0 - s));
  }
  CompensatedSum p_term;
  for (const Sample& x : data.p) {
    const double s = sigma(x.features);
    if (s > eta) p_term.add(loss_value(loss, -g.score(x.features)) * labeled_branch_weight(s));
  }
  CompensatedSum bn_term;
  if (with_bn) {
    for (const Sample& x : data.bn) {
      const double s = sigma(x.features);
      if (s > eta) bn_term.add(loss_value(loss, -g.score(x.features)) * labeled_branch_weight(s));
    }
  }

  RiskBreakdown b;
  b.positive_part = pi * partial_risk(data.p, g, loss, +1);
  if (with_bn) b.positive_part += rho * partial_risk(data.bn, g, loss, -1);
  b.remainder = u_term.value() / static_cast<double>(data.u.size()) +
                pi * p_term.value() / static_cast<double>(data.p.size());
  if (with_bn) b.remainder += rho * bn_term.value() / static_cast<double>(data.bn.size());
  b.negative_part = b.remainder;
  b.total = b.positive_part + b.negative_part;
  return b;
}

}  // namespace

RiskBreakdown risk_pubn(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                        const SigmaEstimate& sigma, double eta) {
  return pubn_risk(data.p, data.bn, data.u, priors, g, loss, sigma, eta);
}

RiskBreakdown risk_pubn_no_n(const Partition& data, const Priors& priors, const DecisionFunction& g, Loss loss,
                             const SigmaEstimate& sigma, double eta) {
  return pubn_risk(data.p, {}, data.u, priors.with_rho(0.0), g, loss, sigma, eta);
}

RiskBreakdown evaluate_risk(const RiskSpec& spec, const Partition& data, const Priors& priors,
                            const DecisionFunction& g, const SigmaEstimate* sigma) {
  switch (spec.estimator) {
    case Estimator::PN: return risk_pn(data, priors, g, spec.loss);
    case Estimator::UPU:
      if (spec.pool_bn) return combine_upu(pooled_pu_partials(data, priors, g, spec.loss), priors.pi() + priors.rho());
      return risk_upu(data, priors, g, spec.loss);
    case Estimator::NNPU:
      if (spec.pool_bn) return combine_nnpu(pooled_pu_partials(data, priors, g, spec.loss), priors.pi() + priors.rho());
      return risk_nnpu(data, priors, g, spec.loss);
    case Estimator::PNU: return risk_pnu(data, priors, g, spec.loss, spec.gamma.value());
    case Estimator::NNPNU: return risk_nnpnu(data, priors, g, spec.loss, spec.gamma.value(), NnpnuVariant::Joint);
    case Estimator::NNPUPlusPN:
      return risk_nnpnu(data, priors, g, spec.loss, spec.gamma.value(), NnpnuVariant::Split);
    case Estimator::PUbN:
    case Estimator::PUbNNoN:
      if (!sigma || !spec.eta) throw Error(ErrorKind::InvalidInput, "PUbN risk needs sigma and eta");
      if (spec.estimator == Estimator::PUbN) return risk_pubn(data, priors, g, spec.loss, *sigma, *spec.eta);
      return risk_pubn_no_n(data, priors, g, spec.loss, *sigma, *spec.eta);
  }
  throw Error(ErrorKind::InvalidInput, "unknown estimator");
}

double WeightedBatch::evaluate(const DecisionFunction& g, Loss loss) const {
  CompensatedSum acc;
  for (const WeightedTerm& t : terms) acc.add(t.example.weight * loss_value(loss, t.example.sign * g.score(t.example.x)));
  return acc.value();
}

double WeightedBatch::evaluate(const DecisionFunction& g, Loss loss, TermGroup group) const {
  CompensatedSum acc;
  for (const WeightedTerm& t : terms) {
    if (t.group == group) acc.add(t.example.weight * loss_value(loss, t.example.sign * g.score(t.example.x)));
  }
  return acc.value();
}

std::vector<WeightedExample> WeightedBatch::examples() const {
  std::vector<WeightedExample> out;
  out.reserve(terms.size());
  for (const WeightedTerm& t : terms) out.push_back(t.example);
  return out;
}

std::vector<WeightedExample> WeightedBatch::examples(TermGroup group, double scale) const {
  std::vector<WeightedExample> out;
  for (const WeightedTerm& t : terms) {
    if (t.group != group) continue;
    WeightedExample e = t.example;
    e.weight *= scale;
    out.push_back(e);
  }
  return out;
}

namespace {

void push_all(WeightedBatch& out, const SampleList& list, int sign, double weight, TermGroup group) {
  if (weight == 0.0) return;
  for (const Sample& s : list) out.terms.push_back({{s.features, sign, weight}, group});
}

double inv(std::size_t n) { return 1.0 / static_cast<double>(n); }

}  // namespace

WeightedBatch assemble_weights(const RiskSpec& spec, const Partition& batch, const Priors& priors,
                               const SigmaEstimate* sigma) {
  WeightedBatch out;
  out.correctable = is_non_negative(spec.estimator);
  const double pi = priors.pi();
  const auto n_p = batch.p.size();
  const auto n_bn = batch.bn.size();
  const auto n_u = batch.u.size();
  require(batch.p, "P");

  switch (spec.estimator) {
    case Estimator::PN:
      require(batch.bn, "N");
      push_all(out, batch.p, +1, pi * inv(n_p), TermGroup::Labeled);
      push_all(out, batch.bn, -1, (1.0 - pi) * inv(n_bn), TermGroup::Remainder);
      break;
    case Estimator::UPU:
    case Estimator::NNPU:
      require(batch.u, "U");
      push_all(out, batch.p, +1, pi * inv(n_p), TermGroup::Labeled);
      push_all(out, batch.p, -1, -pi * inv(n_p), TermGroup::Remainder);
      if (spec.pool_bn && priors.rho() > 0.0) {
        require(batch.bn, "bN");
        const double rho = priors.rho();
        push_all(out, batch.bn, +1, rho * inv(n_bn), TermGroup::Labeled);
        push_all(out, batch.bn, -1, -rho * inv(n_bn), TermGroup::Remainder);
      }
      push_all(out, batch.u, -1, inv(n_u), TermGroup::Remainder);
      break;
    case Estimator::PNU:
    case Estimator::NNPNU:
    case Estimator::NNPUPlusPN: {
      const double gamma = spec.gamma.value();
      const TermGroup n_group =
          spec.estimator == Estimator::NNPUPlusPN ? TermGroup::Labeled : TermGroup::Remainder;
      push_all(out, batch.p, +1, pi * inv(n_p), TermGroup::Labeled);
      if (gamma > 0.0) {
        require(batch.bn, "bN");
        push_all(out, batch.bn, -1, gamma * (1.0 - pi) * inv(n_bn), n_group);
      }
      if (gamma < 1.0) {
        require(batch.u, "U");
        push_all(out, batch.p, -1, -(1.0 - gamma) * pi * inv(n_p), TermGroup::Remainder);
        push_all(out, batch.u, -1, (1.0 - gamma) * inv(n_u), TermGroup::Remainder);
      }
      break;
    }
    case Estimator::PUbN:
    case Estimator::PUbNNoN: {
      if (!sigma || !spec.eta) throw Error(ErrorKind::InvalidInput, "PUbN weights need sigma and eta");
      const double eta = *spec.eta;
      check_eta(eta);
      require(batch.u, "U");
      const bool with_bn = spec.estimator == Estimator::PUbN && priors.rho() > 0.0;
      const double rho = with_bn ? priors.rho() : 0.0;
      if (with_bn) require(batch.bn, "bN");
      push_all(out, batch.p, +1, pi * inv(n_p), TermGroup::Labeled);
      if (with_bn) push_all(out, batch.bn, -1, rho * inv(n_bn), TermGroup::Labeled);
      auto add = [&](const Sample& x, double weight) {
        if (weight != 0.0) out.terms.push_back({{x.features, -1, weight}, TermGroup::Remainder});
      };
      for (const Sample& x : batch.u) {
        const double s = (*sigma)(x.features);
        if (s <= eta) add(x, (1.0 - s) * inv(n_u));
      }
      for (const Sample& x : batch.p) {
        const double s = (*sigma)(x.features);
        if (s > eta) add(x, pi * labeled_branch_weight(s) * inv(n_p));
      }
      if (with_bn) {
        for (const Sample& x : batch.bn) {
          const double s = (*sigma)(x.features);
          if (s > eta) add(x, rho * labeled_branch_weight(s) * inv(n_bn));
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace pubn
