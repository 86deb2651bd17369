#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pubn/checks.hpp"
#include "pubn/oracle.hpp"
#include "pubn/risk.hpp"

using namespace pubn;

namespace {

SampleList random_samples(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.5);
  SampleList out(n);
  for (Sample& s : out) {
    s.features.resize(dim);
    for (double& v : s.features) v = normal(rng);
  }
  return out;
}

Scorer random_scorer(std::mt19937_64& rng, std::size_t dim) {
  Scorer g = Scorer::mlp(dim, {4});
  g.initialize(rng());
  return g;
}

Partition random_partition(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_int_distribution<std::size_t> size(1, 15);
  return Partition{random_samples(rng, size(rng), dim), random_samples(rng, size(rng), dim),
                   random_samples(rng, size(rng), dim)};
}

PartialRisks partials(double p_pos, double p_neg, double n_neg, double u_neg) {
  PartialRisks r;
  r.p_pos = p_pos;
  r.p_neg = p_neg;
  r.n_neg = n_neg;
  r.u_neg = u_neg;
  return r;
}

Partition one_each(double p, double bn, double u) {
  return Partition{{Sample{{p}, {}, {}}}, {Sample{{bn}, {}, {}}}, {Sample{{u}, {}, {}}}};
}

}  // namespace

TEST_CASE("estimator names round-trip") {
  for (Estimator e : {Estimator::PN, Estimator::UPU, Estimator::NNPU, Estimator::PNU, Estimator::NNPNU,
                      Estimator::NNPUPlusPN, Estimator::PUbN, Estimator::PUbNNoN}) {
    CHECK(estimator_from_string(to_string(e)) == e);
  }
  CHECK(estimator_from_string("PUbN-N") == Estimator::PUbNNoN);
  CHECK_THROWS_AS(estimator_from_string("SVM"), Error);
}

TEST_CASE("risk spec hyperparameter presence") {
  RiskSpec s;
  s.estimator = Estimator::PNU;
  CHECK_THROWS_AS(s.validate(), Error);
  s.gamma = 0.3;
  CHECK_NOTHROW(s.validate());
  s.tau = 0.5;
  CHECK_THROWS_AS(s.validate(), Error);
  RiskSpec p;
  p.estimator = Estimator::PUbN;
  CHECK_THROWS_AS(p.validate(), Error);
  p.tau = 0.7;
  CHECK_NOTHROW(p.validate());
  p.gamma = 0.1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("formula-level reference values") {
  CHECK(combine_pn(partials(0.2, NAN, 0.4, NAN), 0.5).total == doctest::Approx(0.3));

  const PartialRisks upu = partials(0.1, 0.9, NAN, 0.3);
  const RiskBreakdown u = combine_upu(upu, 0.5);
  CHECK(u.total == doctest::Approx(-0.10));
  CHECK_FALSE(u.corrected);
  const RiskBreakdown nn = combine_nnpu(upu, 0.5);
  CHECK(nn.total == doctest::Approx(0.05));
  CHECK(nn.corrected);

  const PartialRisks pnu = partials(0.2, 0.7, 0.6, 0.5);
  CHECK(combine_pnu(pnu, 0.4, 0.5).total == doctest::Approx(0.37));
  CHECK(combine_nnpnu(pnu, 0.4, 0.5, NnpnuVariant::Joint).total == doctest::Approx(0.37));
  CHECK(combine_nnpnu(pnu, 0.4, 0.5, NnpnuVariant::Split).total == doctest::Approx(0.37));

  const PartialRisks neg = partials(0.2, 0.7, 0.6, 0.1);
  CHECK(combine_nnpnu(neg, 0.4, 0.5, NnpnuVariant::Joint).total == doctest::Approx(0.17));
  CHECK(combine_nnpnu(neg, 0.4, 0.5, NnpnuVariant::Split).total == doctest::Approx(0.26));
}

TEST_CASE("zero scorer gives the midpoint for every PU-type estimator") {
  std::mt19937_64 rng(1);
  const Partition data = random_partition(rng, 2);
  const ConstantScore zero(0.0);
  const Priors priors(0.3, 0.2);
  CHECK(risk_pn(data, priors, zero, kSigmoidLoss).total == doctest::Approx(0.5));
  CHECK(risk_upu(data, priors, zero, kSigmoidLoss).total == doctest::Approx(0.5));
  const RiskBreakdown nn = risk_nnpu(data, priors, zero, kSigmoidLoss);
  CHECK(nn.total == doctest::Approx(0.5));
  CHECK_FALSE(nn.corrected);
}

TEST_CASE("PN reduces to the positive partial as pi tends to one") {
  std::mt19937_64 rng(2);
  const Partition data = random_partition(rng, 2);
  const Scorer g = random_scorer(rng, 2);
  const double rp = partial_risk(data.p, g, kLogisticLoss, +1);
  CHECK(risk_pn(data, Priors(1.0 - 1e-12, 0.0), g, kLogisticLoss).total == doctest::Approx(rp).epsilon(1e-9));
}

TEST_CASE("nnPU ordering and equality when uncorrected") {
  CHECK(check_nnpu_ordering(7, 2000).passed);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Partition data = random_partition(rng, 2);
    const Scorer g = random_scorer(rng, 2);
    const Priors priors(0.4, 0.0);
    const RiskBreakdown nn = risk_nnpu(data, priors, g, kSigmoidLoss);
    const RiskBreakdown u = risk_upu(data, priors, g, kSigmoidLoss);
    if (!nn.corrected) CHECK(nn.total == u.total);
    if (nn.corrected) CHECK(nn.total > u.total);
  }
}

TEST_CASE("endpoint identities on random inputs") {
  const CheckResult r = check_endpoints(9, 500);
  CHECK(r.passed);
  CHECK(r.worst <= 1e-12);
}

TEST_CASE("nnPNU variants at gamma zero equal nnPU") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Partition data = random_partition(rng, 2);
    const Scorer g = random_scorer(rng, 2);
    const Priors priors(0.5, 0.1);
    const double nn = risk_nnpu(data, priors, g, kLogisticLoss).total;
    CHECK(risk_nnpnu(data, priors, g, kLogisticLoss, 0.0, NnpnuVariant::Joint).total == nn);
    CHECK(risk_nnpnu(data, priors, g, kLogisticLoss, 0.0, NnpnuVariant::Split).total == nn);
  }
}

TEST_CASE("select_eta reference enumeration") {
  const std::vector<double> sigma{0.05, 0.1, 0.2, 0.3, 0.9, 0.95};
  const Priors priors(0.4, 0.2);
  const EtaSelection sel = select_eta(sigma, priors, 0.5);
  CHECK(sel.target == 1);
  CHECK(sel.eta == 0.05);
  CHECK(sel.included == 1);

  // k = n_U: tau (1 - pi - rho) = 1.
  const EtaSelection full = select_eta(sigma, priors, 2.5);
  CHECK(full.target == 6);
  CHECK(full.eta == 0.95);
  CHECK(full.included == 6);

  const EtaSelection empty = select_eta(sigma, priors, 0.1);
  CHECK(empty.target == 0);
  CHECK(empty.included == 0);
  CHECK(empty.eta < 0.05);

  try {
    select_eta(sigma, priors, 3.0);
    FAIL("expected InfeasibleTau");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleTau);
  }
}

TEST_CASE("select_eta counts ties at the cut") {
  const std::vector<double> sigma{0.2, 0.2, 0.2, 0.5};
  const EtaSelection sel = select_eta(sigma, Priors(0.5, 0.0), 1.0);  // k = 2
  CHECK(sel.target == 2);
  CHECK(sel.eta == 0.2);
  CHECK(sel.included == 3);
}

TEST_CASE("eta partition is monotone in tau") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> sigma(97);
  for (double& s : sigma) s = unit(rng);
  const Priors priors(0.3, 0.1);
  std::size_t prev = 0;
  for (int i = 0; i <= 100; ++i) {
    const double tau = i / 100.0 / priors.remainder();
    const EtaSelection sel = select_eta(sigma, priors, tau);
    CHECK(sel.included >= prev);
    CHECK(sel.included == sel.target);
    prev = sel.included;
  }
}

TEST_CASE("eta rule on random vectors") { CHECK(check_eta_rule(13, 2000).passed); }

TEST_CASE("PUbN degenerate sigma cases") {
  std::mt19937_64 rng(6);
  const Partition data = random_partition(rng, 2);
  const Scorer g = random_scorer(rng, 2);
  const Priors priors(0.4, 0.2);
  const SigmaEstimate one([](std::span<const double>) { return 1.0; });
  const double labeled = priors.pi() * partial_risk(data.p, g, kLogisticLoss, +1) +
                         priors.rho() * partial_risk(data.bn, g, kLogisticLoss, -1);
  CHECK(risk_pubn(data, priors, g, kLogisticLoss, one, 0.5).total == doctest::Approx(labeled).epsilon(1e-12));
  CHECK(risk_pubn_no_n(data, priors, g, kLogisticLoss, one, 0.5).total ==
        doctest::Approx(priors.pi() * partial_risk(data.p, g, kLogisticLoss, +1)).epsilon(1e-12));

  const SigmaEstimate half([](std::span<const double>) { return 0.5; });
  CompensatedSum u;
  for (const Sample& s : data.u) u.add(loss_value(kLogisticLoss, -g.score(s.features)) * 0.5);
  const double expected = labeled + u.value() / static_cast<double>(data.u.size());
  CHECK(risk_pubn(data, priors, g, kLogisticLoss, half, 1.0).total == doctest::Approx(expected).epsilon(1e-12));

  const SigmaEstimate bad([](std::span<const double>) { return 1.5; });
  try {
    risk_pubn(data, priors, g, kLogisticLoss, bad, 0.5);
    FAIL("expected InvalidSigma");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSigma);
  }
}

TEST_CASE("PUbN on an exhaustive two-point sample equals the true risk") {
  // x = a carries p(a, +1, +1) = 1/2; x = b carries p(b, -1, +1) = p(b, -1, -1) = 1/4.
  const Vector a{0.0}, b{1.0};
  const std::vector<Vector> points{a, b};
  const std::vector<double> scores{0.8, -0.3};
  const SupportTable g(points, scores);
  const std::vector<double> sig{1.0, 0.5};
  const SupportTable sigma_table(points, sig);
  const SigmaEstimate sigma([&](std::span<const double> x) { return sigma_table.score(x); });
  const Partition data{{Sample{a, {}, {}}}, {Sample{b, {}, {}}}, {Sample{a, {}, {}}, Sample{b, {}, {}}}};
  const Priors priors(0.5, 0.25);
  for (Loss loss : {kSigmoidLoss, kLogisticLoss, kZeroOneLoss}) {
    const double truth = 0.5 * loss_value(loss, scores[0]) + 0.5 * loss_value(loss, -scores[1]);
    for (double eta : {0.3, 0.5, 0.9, 1.0}) {
      CHECK(risk_pubn(data, priors, g, loss, sigma, eta).total == doctest::Approx(truth).epsilon(1e-10));
    }
    // PUbN\N with sigma_hat = p(y=+1 | x).
    const std::vector<double> post{1.0, 0.0};
    const SupportTable post_table(points, post);
    const SigmaEstimate posterior([&](std::span<const double> x) { return post_table.score(x); });
    CHECK(risk_pubn_no_n(data, priors, g, loss, posterior, 0.5).total == doctest::Approx(truth).epsilon(1e-10));
    // uPU on the exact pi-mixture equals PN with the true negatives.
    const Partition pn{{Sample{a, {}, {}}}, {Sample{b, {}, {}}}, {Sample{a, {}, {}}, Sample{b, {}, {}}}};
    CHECK(risk_upu(pn, Priors(0.5, 0.0), g, loss).total ==
          doctest::Approx(risk_pn(pn, Priors(0.5, 0.0), g, loss).total).epsilon(1e-12));
  }
}

TEST_CASE("weighted flattening matches every estimator") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Estimator all[] = {Estimator::PN,  Estimator::UPU,        Estimator::NNPU, Estimator::PNU,
                           Estimator::NNPNU, Estimator::NNPUPlusPN, Estimator::PUbN, Estimator::PUbNNoN};
  double worst = 0.0;
  for (int t = 0; t < 300; ++t) {
    const Partition data = random_partition(rng, 3);
    const Scorer g = random_scorer(rng, 3);
    Scorer s = random_scorer(rng, 3);
    const SigmaEstimate sigma = SigmaEstimate::from_scorer(s);
    const Priors priors(0.1 + 0.5 * unit(rng), 0.3 * unit(rng));
    const Loss loss = unit(rng) < 0.5 ? kSigmoidLoss : kLogisticLoss;
    for (Estimator e : all) {
      RiskSpec spec;
      spec.estimator = e;
      spec.loss = loss;
      if (uses_gamma(e)) spec.gamma = unit(rng);
      if (uses_sigma(e)) spec.eta = unit(rng);
      const WeightedBatch w = assemble_weights(spec, data, priors, &sigma);
      const RiskBreakdown r = evaluate_risk(spec, data, priors, g, &sigma);
      const double pre = r.positive_part + r.remainder;
      worst = std::max(worst, std::fabs(w.evaluate(g, loss) - pre));
      if (w.correctable) worst = std::max(worst, std::fabs(w.evaluate(g, loss, TermGroup::Remainder) - r.remainder));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("uPU and PUbN weight layouts") {
  const Partition data = one_each(1.0, 2.0, 3.0);
  const Priors priors(0.4, 0.2);
  RiskSpec u;
  u.estimator = Estimator::UPU;
  const WeightedBatch w = assemble_weights(u, data, priors);
  REQUIRE(w.terms.size() == 3);
  CHECK(w.terms[0].example.sign == 1);
  CHECK(w.terms[0].example.weight == doctest::Approx(0.4));
  CHECK(w.terms[1].example.sign == -1);
  CHECK(w.terms[1].example.weight == doctest::Approx(-0.4));
  CHECK(w.terms[2].example.weight == doctest::Approx(1.0));
  CHECK_FALSE(w.correctable);

  RiskSpec p;
  p.estimator = Estimator::PUbN;
  p.eta = 0.5;
  const SigmaEstimate one([](std::span<const double>) { return 1.0; });
  const WeightedBatch wp = assemble_weights(p, data, priors, &one);
  REQUIRE(wp.terms.size() == 2);
  CHECK(wp.terms[0].example.sign == 1);
  CHECK(wp.terms[0].example.weight == doctest::Approx(0.4));
  CHECK(wp.terms[1].example.sign == -1);
  CHECK(wp.terms[1].example.weight == doctest::Approx(0.2));
}

TEST_CASE("nnPU remainder group marks the corrected terms") {
  // P scored high and U scored low drives r below zero.
  const Partition data{{Sample{{4.0}, {}, {}}}, {}, {Sample{{-4.0}, {}, {}}}};
  class Id final : public DecisionFunction {
   public:
    double score(std::span<const double> x) const override { return x[0]; }
  } g;
  const Priors priors(0.5, 0.0);
  RiskSpec spec;
  spec.estimator = Estimator::NNPU;
  spec.loss = kSigmoidLoss;
  const WeightedBatch w = assemble_weights(spec, data, priors);
  const RiskBreakdown r = risk_nnpu(data, priors, g, kSigmoidLoss);
  CHECK(r.corrected);
  CHECK(w.correctable);
  CHECK(w.evaluate(g, kSigmoidLoss, TermGroup::Remainder) == doctest::Approx(r.remainder));
  CHECK(w.evaluate(g, kSigmoidLoss, TermGroup::Remainder) < 0.0);
  CHECK(w.evaluate(g, kSigmoidLoss, TermGroup::Labeled) == doctest::Approx(r.positive_part));
}

TEST_CASE("pooled labeled class for sigma estimation") {
  std::mt19937_64 rng(19);
  const Partition data = random_partition(rng, 2);
  const Scorer g = random_scorer(rng, 2);
  const Priors priors(0.3, 0.2);
  RiskSpec spec;
  spec.estimator = Estimator::UPU;
  spec.pool_bn = true;
  const double expected = 0.3 * partial_risk(data.p, g, kLogisticLoss, +1) +
                          0.2 * partial_risk(data.bn, g, kLogisticLoss, +1) +
                          partial_risk(data.u, g, kLogisticLoss, -1) -
                          0.3 * partial_risk(data.p, g, kLogisticLoss, -1) -
                          0.2 * partial_risk(data.bn, g, kLogisticLoss, -1);
  CHECK(evaluate_risk(spec, data, priors, g).total == doctest::Approx(expected).epsilon(1e-12));
  CHECK(assemble_weights(spec, data, priors).evaluate(g, kLogisticLoss) ==
        doctest::Approx(expected).epsilon(1e-12));
  spec.estimator = Estimator::PN;
  CHECK_THROWS_AS(spec.validate(), Error);
}
