#include "pubn/oracle.hpp"

#include <cmath>
#include <memory>

namespace pubn {

namespace {

void check_scores(const DiscreteSpec& spec, std::span<const double> values, const char* what) {
  if (values.size() != spec.size()) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + " must have one value per support point");
  }
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::vector<double> scores_on_support(const DiscreteSpec& spec, const DecisionFunction& g) {
  std::vector<double> out;
  out.reserve(spec.size());
  for (const Vector& x : spec.points) out.push_back(g.score(x));
  return out;
}

ExactRisks exact_risks(const DiscreteSpec& spec, std::span<const double> scores, Loss loss) {
  spec.validate();
  check_scores(spec, scores, "scores");
  CompensatedSum pos_pos, pos_neg, neg_neg, all_neg, bn_neg, s_neg, risk;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double lp = loss_value(loss, scores[i]);
    const double ln = loss_value(loss, -scores[i]);
    const double mp = spec.mass_pos[i];
    const double mb = spec.mass_neg_labeled[i];
    const double mu = spec.mass_neg_unlabeled[i];
    pos_pos.add(mp * lp);
    pos_neg.add(mp * ln);
    neg_neg.add((mb + mu) * ln);
    all_neg.add((mp + mb + mu) * ln);
    bn_neg.add(mb * ln);
    s_neg.add(mu * ln);
    risk.add(mp * lp);
    risk.add((mb + mu) * ln);
  }
  ExactRisks r;
  r.pi = spec.pi();
  r.rho = spec.rho();
  r.true_risk = risk.value();
  r.p_pos = ratio(pos_pos.value(), r.pi);
  r.p_neg = ratio(pos_neg.value(), r.pi);
  r.n_neg = ratio(neg_neg.value(), 1.0 - r.pi);
  r.u_neg = all_neg.value();
  r.bn_neg = ratio(bn_neg.value(), r.rho);
  r.s_neg = ratio(s_neg.value(), 1.0 - r.pi - r.rho);
  return r;
}

ExactRisks exact_risks(const DiscreteSpec& spec, const DecisionFunction& g, Loss loss) {
  const auto scores = scores_on_support(spec, g);
  return exact_risks(spec, scores, loss);
}

DecompositionGap decomposition_gap(const DiscreteSpec& spec, std::span<const double> scores, Loss loss,
                                std::span<const double> h, double eta) {
  spec.validate();
  check_scores(spec, scores, "scores");
  check_scores(spec, h, "h");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorKind::InvalidInput, "eta must lie in [0, 1]");

  CompensatedSum lhs, u_term, p_term, bn_term;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double p = spec.marginal(i);
    if (p == 0.0) continue;
    const double sigma = spec.sigma(i);
    if (h[i] > eta && !(sigma > 0.0)) {
      throw Error(ErrorKind::HypothesisViolated, "h exceeds eta at a support point where sigma = 0");
    }
    const double ln = loss_value(loss, -scores[i]);
    lhs.add(spec.mass_neg_unlabeled[i] * ln);
    if (h[i] <= eta) {
      u_term.add(p * ln * (1.0 - sigma));
    } else {
      // pi E_P[.] = sum p(x, y=+1) [.], likewise for bN.
      const double w = (1.0 - sigma) / sigma;
      p_term.add(spec.mass_pos[i] * ln * w);
      bn_term.add(spec.mass_neg_labeled[i] * ln * w);
    }
  }
  DecompositionGap out;
  out.lhs = lhs.value();
  out.rhs = u_term.value() + p_term.value() + bn_term.value();
  out.gap = std::fabs(out.lhs - out.rhs);
  return out;
}

SupportTable::SupportTable(const std::vector<Vector>& points, std::span<const double> values) {
  if (points.size() != values.size()) throw Error(ErrorKind::InvalidInput, "one value per support point required");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!table_.emplace(points[i], values[i]).second) {
      throw Error(ErrorKind::InvalidSpec, "duplicate support point");
    }
  }
}

double SupportTable::score(std::span<const double> x) const {
  const auto it = table_.find(Vector(x.begin(), x.end()));
  if (it == table_.end()) throw Error(ErrorKind::InvalidInput, "point outside the support");
  return it->second;
}

BiasEstimate estimator_bias(const DiscreteSpec& spec, const RiskSpec& estimator, std::span<const double> scores,
                            const SampleSizes& sizes, std::size_t trials, std::uint64_t seed,
                            std::span<const double> sigma_hat) {
  if (trials < 100) throw Error(ErrorKind::InvalidInput, "estimator_bias needs at least 100 trials");
  const ExactRisks exact = exact_risks(spec, scores, estimator.loss);
  const DiscreteSampler sampler(spec);
  const SupportTable g(spec.points, scores);

  std::vector<double> sigma_values;
  if (sigma_hat.empty()) {
    for (std::size_t i = 0; i < spec.size(); ++i) sigma_values.push_back(spec.sigma(i));
  } else {
    check_scores(spec, sigma_hat, "sigma_hat");
    sigma_values.assign(sigma_hat.begin(), sigma_hat.end());
  }
  const auto sigma_table = std::make_shared<SupportTable>(spec.points, sigma_values);
  const SigmaEstimate sigma([sigma_table](std::span<const double> x) { return sigma_table->score(x); });

  const double rho = exact.rho;
  const bool need_bn = uses_bn(estimator.estimator) && !(estimator.estimator == Estimator::PUbN && rho == 0.0);
  const Priors priors(exact.pi, rho > 0.0 ? rho : 0.0);

  std::mt19937_64 rng(seed);
  BiasEstimate out;
  out.truth = exact.true_risk;
  out.estimates.reserve(trials);
  Partition data;
  for (std::size_t t = 0; t < trials; ++t) {
    data.p.clear();
    data.bn.clear();
    data.u.clear();
    for (std::size_t i = 0; i < sizes.n_p; ++i) data.p.push_back(Sample{spec.points[sampler.positive(rng)], {}, {}});
    if (need_bn) {
      for (std::size_t i = 0; i < sizes.n_bn; ++i) {
        data.bn.push_back(Sample{spec.points[sampler.biased_negative(rng)], {}, {}});
      }
    }
    for (std::size_t i = 0; i < sizes.n_u; ++i) data.u.push_back(Sample{spec.points[sampler.marginal(rng)], {}, {}});
    out.estimates.push_back(evaluate_risk(estimator, data, priors, g, &sigma).total);
  }
  CompensatedSum sum;
  for (double v : out.estimates) sum.add(v);
  out.mean = sum.value() / static_cast<double>(trials);
  CompensatedSum sq;
  for (double v : out.estimates) sq.add((v - out.mean) * (v - out.mean));
  const double variance = sq.value() / static_cast<double>(trials - 1);
  out.standard_error = std::sqrt(variance / static_cast<double>(trials));
  return out;
}

DiscreteSpec random_discrete_spec(std::mt19937_64& rng, std::size_t points, std::size_t dim, bool with_bn) {
  if (points < 2) throw Error(ErrorKind::InvalidInput, "need at least two support points");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  DiscreteSpec spec;
  while (true) {
    spec.points.clear();
    spec.mass_pos.assign(points, 0.0);
    spec.mass_neg_labeled.assign(points, 0.0);
    spec.mass_neg_unlabeled.assign(points, 0.0);
    for (std::size_t i = 0; i < points; ++i) {
      Vector x(dim);
      for (double& v : x) v = normal(rng);
      spec.points.push_back(std::move(x));
      // Each mass is zero with some probability so that sigma hits 0 and 1.
      if (unif(rng) < 0.7) spec.mass_pos[i] = unif(rng);
      if (with_bn && unif(rng) < 0.5) spec.mass_neg_labeled[i] = unif(rng);
      if (unif(rng) < 0.7) spec.mass_neg_unlabeled[i] = unif(rng);
    }
    double total = 0.0, pos = 0.0, unl = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      total += spec.mass_pos[i] + spec.mass_neg_labeled[i] + spec.mass_neg_unlabeled[i];
      pos += spec.mass_pos[i];
      unl += spec.mass_neg_unlabeled[i];
    }
    if (pos == 0.0 || unl == 0.0 || pos == total) continue;
    for (std::size_t i = 0; i < points; ++i) {
      spec.mass_pos[i] /= total;
      spec.mass_neg_labeled[i] /= total;
      spec.mass_neg_unlabeled[i] /= total;
    }
    if (with_bn && spec.rho() == 0.0) continue;
    return spec;
  }
}

}  // namespace pubn
