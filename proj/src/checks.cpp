#include "pubn/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "pubn/oracle.hpp"
#include "pubn/synthgen.hpp"

namespace pubn {

namespace {

Loss random_loss(std::mt19937_64& rng, bool differentiable_only = false) {
  static constexpr LossKind kinds[] = {LossKind::Logistic, LossKind::Sigmoid, LossKind::ZeroOne};
  std::uniform_int_distribution<int> pick(0, differentiable_only ? 1 : 2);
  return Loss{kinds[pick(rng)]};
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> out(n);
  for (double& v : out) v = normal(rng);
  return out;
}

SampleList random_samples(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.5);
  SampleList out(n);
  for (Sample& s : out) {
    s.features.resize(dim);
    for (double& v : s.features) v = normal(rng);
  }
  return out;
}

Priors random_priors(std::mt19937_64& rng, bool with_rho) {
  std::uniform_real_distribution<double> unif(0.05, 0.9);
  const double pi = unif(rng);
  if (!with_rho) return Priors(pi, 0.0);
  std::uniform_real_distribution<double> frac(0.0, 0.95);
  return Priors(pi, frac(rng) * (1.0 - pi));
}

Scorer random_linear(std::mt19937_64& rng, std::size_t dim) {
  Scorer g = Scorer::linear(dim);
  g.initialize(rng());
  // Spread the scores beyond the Glorot range.
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& w : g.parameters()) w = normal(rng);
  return g;
}

std::string format(const char* fmt, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

void finish(CheckResult& r) { r.passed = r.failures == 0 && r.cases > 0; }

}  // namespace

CheckResult check_decomposition(std::uint64_t seed, std::size_t cases, double tolerance) {
  CheckResult r;
  r.name = "decomposition";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> points(2, 64);
  std::uniform_int_distribution<std::size_t> dims(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < cases; ++c) {
    const DiscreteSpec spec = random_discrete_spec(rng, points(rng), dims(rng), unit(rng) < 0.8);
    const auto scores = random_scores(rng, spec.size());
    const Loss loss = random_loss(rng);
    double eta = 1.0 - unit(rng);  // (0, 1]
    std::vector<double> h(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) h[i] = spec.sigma(i);
    const DecompositionGap gap = decomposition_gap(spec, scores, loss, h, eta);
    r.worst = std::max(r.worst, gap.gap);
    ++r.cases;
    if (!(gap.gap < tolerance)) ++r.failures;
  }
  finish(r);
  r.detail = format("max gap %.3g (tolerance %.0e)", r.worst, tolerance);
  return r;
}

CheckResult check_unbiased(Estimator estimator, std::uint64_t seed, std::size_t configs, std::size_t trials,
                           std::size_t n, std::size_t min_pass) {
  if (estimator != Estimator::UPU && estimator != Estimator::PUbN) {
    throw Error(ErrorKind::InvalidInput, "unbiasedness check covers uPU and PUbN only");
  }
  CheckResult r;
  r.name = std::string("unbiased ") + std::string(to_string(estimator));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> points(2, 32);
  std::size_t passes = 0;
  for (std::size_t c = 0; c < configs; ++c) {
    const bool bn = estimator == Estimator::PUbN;
    const DiscreteSpec spec = random_discrete_spec(rng, points(rng), 2, bn);
    const auto scores = random_scores(rng, spec.size());
    RiskSpec rs;
    rs.estimator = estimator;
    rs.loss = random_loss(rng);
    if (bn) {
      double min_sigma = 1.0;
      for (std::size_t i = 0; i < spec.size(); ++i) {
        const double s = spec.sigma(i);
        if (s > 0.0) min_sigma = std::min(min_sigma, s);
      }
      rs.eta = 0.5 * min_sigma;
    }
    const BiasEstimate b = estimator_bias(spec, rs, scores, SampleSizes{n, bn ? n : 0, n}, trials, rng());
    const double z = b.standard_error > 0.0 ? std::fabs(b.mean - b.truth) / b.standard_error
                                            : (b.mean == b.truth ? 0.0 : std::numeric_limits<double>::infinity());
    r.worst = std::max(r.worst, z);
    ++r.cases;
    if (z < 3.0) ++passes;
  }
  r.failures = r.cases - passes;
  r.passed = passes >= min_pass;
  r.detail = std::to_string(passes) + "/" + std::to_string(r.cases) + " configs within 3 SE (need " +
             std::to_string(min_pass) + ")";
  return r;
}

CheckResult check_nnpu_ordering(std::uint64_t seed, std::size_t cases) {
  CheckResult r;
  r.name = "nnPU ordering";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t dim = 2;
    Partition data;
    data.p = random_samples(rng, size(rng), dim);
    data.u = random_samples(rng, size(rng), dim);
    const Priors priors = random_priors(rng, false);
    const Scorer g = random_linear(rng, dim);
    const Loss loss = random_loss(rng);
    const double nn = risk_nnpu(data, priors, g, loss).total;
    const double u = risk_upu(data, priors, g, loss).total;
    const double floor = priors.pi() * partial_risk(data.p, g, loss, +1);
    ++r.cases;
    if (!(nn >= floor) || !(nn >= u)) ++r.failures;
  }
  finish(r);
  r.detail = std::to_string(r.failures) + " violations in " + std::to_string(r.cases) + " cases";
  return r;
}

CheckResult check_endpoints(std::uint64_t seed, std::size_t cases, double tolerance) {
  CheckResult r;
  r.name = "endpoint identities";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t dim = 2;
    Partition data;
    data.p = random_samples(rng, size(rng), dim);
    data.bn = random_samples(rng, size(rng), dim);
    data.u = random_samples(rng, size(rng), dim);
    const Priors priors = random_priors(rng, true);
    const Scorer g = random_linear(rng, dim);
    const Loss loss = random_loss(rng);

    const double d0 = std::fabs(risk_pnu(data, priors, g, loss, 0.0).total - risk_upu(data, priors, g, loss).total);
    const double d1 = std::fabs(risk_pnu(data, priors, g, loss, 1.0).total - risk_pn(data, priors, g, loss).total);

    const Scorer s = random_linear(rng, dim);
    const SigmaEstimate sigma = SigmaEstimate::from_scorer(s);
    const double eta = unit(rng);
    Partition no_bn = data;
    no_bn.bn.clear();
    const double d2 = std::fabs(risk_pubn_no_n(data, priors, g, loss, sigma, eta).total -
                                risk_pubn(no_bn, priors.with_rho(0.0), g, loss, sigma, eta).total);
    const double worst = std::max({d0, d1, d2});
    r.worst = std::max(r.worst, worst);
    ++r.cases;
    if (!(worst <= tolerance)) ++r.failures;
  }
  finish(r);
  r.detail = format("max difference %.3g (tolerance %.0e)", r.worst, tolerance);
  return r;
}

CheckResult check_gradients(ScorerKind kind, std::uint64_t seed, std::size_t batches, double tolerance) {
  CheckResult r;
  r.name = std::string("gradient ") + to_string(kind);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(5, 30);
  std::uniform_int_distribution<int> sign(0, 1);
  std::uniform_real_distribution<double> weight(-0.2, 1.0);
  std::uniform_real_distribution<double> decay(0.0, 1e-2);
  constexpr double step = 1e-5;
  const std::size_t dim = 3;
  while (r.cases < batches) {
    Scorer g = kind == ScorerKind::Linear ? Scorer::linear(dim, decay(rng)) : Scorer::mlp(dim, {8, 6}, decay(rng));
    g.initialize(rng());
    const SampleList xs = random_samples(rng, size(rng), dim);
    // Central differences straddling a rectifier kink are meaningless.
    bool near_kink = false;
    for (const Sample& s : xs) near_kink = near_kink || g.min_abs_preactivation(s.features) < 1e-3;
    if (near_kink) continue;
    std::vector<WeightedExample> batch;
    for (const Sample& s : xs) batch.push_back({s.features, sign(rng) ? 1 : -1, weight(rng)});
    const double err = gradient_check(g, batch, random_loss(rng, true), step);
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (!(err < tolerance)) ++r.failures;
  }
  finish(r);
  r.detail = format("max relative error %.3g (tolerance %.0e)", r.worst, tolerance);
  return r;
}

CheckResult check_eta_rule(std::uint64_t seed, std::size_t cases) {
  CheckResult r;
  r.name = "eta rule";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(1, 300);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> levels(2, 12);
  std::size_t tied = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = size(rng);
    const Priors priors = random_priors(rng, unit(rng) < 0.7);
    const double tau = 1.0 / std::max(1e-3, 1.0 - priors.pi() - priors.rho()) * unit(rng);
    std::vector<double> sigma(n);
    // A third of the cases draw from a coarse grid to force ties.
    const bool coarse = unit(rng) < 0.33;
    const int lv = levels(rng);
    for (double& s : sigma) s = coarse ? std::floor(unit(rng) * lv) / lv : unit(rng);

    const auto k = static_cast<std::size_t>(std::floor(tau * (1.0 - priors.pi() - priors.rho()) * n + 1e-9));
    ++r.cases;
    if (k > n) {
      try {
        (void)select_eta(sigma, priors, tau);
        ++r.failures;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InfeasibleTau) ++r.failures;
      }
      continue;
    }
    const EtaSelection sel = select_eta(sigma, priors, tau);
    const auto count = static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s <= sel.eta; }));
    std::vector<double> sorted = sigma;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sel.target == k && sel.included == count;
    if (k == 0) {
      ok = ok && count == 0;
    } else {
      const auto expected = static_cast<std::size_t>(
          std::count_if(sorted.begin(), sorted.end(), [&](double s) { return s <= sorted[k - 1]; }));
      ok = ok && sel.eta == sorted[k - 1] && count == expected;
      if (expected == k) {
        ok = ok && count == k;
      } else {
        ++tied;
      }
    }
    if (!ok) ++r.failures;
  }
  finish(r);
  r.detail = std::to_string(r.failures) + " mismatches in " + std::to_string(r.cases) + " cases (" +
             std::to_string(tied) + " with ties at the cut)";
  return r;
}

}  // namespace pubn
