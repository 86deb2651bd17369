#include <cmath>
#include <limits>

#include "doctest.h"
#include "pubn/synthgen.hpp"
#include "pubn/train.hpp"

using namespace pubn;

namespace {

// Two well separated 1-D clusters: labeled mass at +3, the rest at -3.
Dataset separable(std::uint64_t seed, double pi = 0.3, double rho = 0.2) {
  LatentMixtureSpec spec;
  spec.dim = 1;
  spec.pi = pi;
  spec.rho = rho;
  const double neg = 1.0 - pi;
  spec.categories = {
      {{3.0}, 0.5, +1, 1.0, 0.0},
      {{3.0}, 0.5, -1, rho / neg, 1.0},
      {{-3.0}, 0.5, -1, 1.0 - rho / neg, 0.0},
  };
  const std::size_t bn = rho > 0.0 ? 200 : 0;
  return generate(spec, SplitSizes{200, bn, 1000, 100, bn / 2, 500, 500}, seed);
}

// Overlapping 1-D PU task with few positives and a flexible model.
Dataset overfit_prone(std::uint64_t seed) {
  LatentMixtureSpec spec;
  spec.dim = 1;
  spec.pi = 0.4;
  spec.categories = {{{1.0}, 1.0, +1, 1.0, 0.0}, {{-1.0}, 1.0, -1, 1.0, 0.0}};
  return generate(spec, SplitSizes{20, 0, 300, 20, 0, 200, 500}, seed);
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 20;
  c.batch_p = 10;
  c.batch_bn = 10;
  c.batch_u = 50;
  c.learning_rate = 0.05;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("AMSGrad single scalar update") {
  Scorer s = Scorer::linear(1);
  s.set_parameters(std::vector<double>{1.0, 0.0});
  OptimizerState st = OptimizerState::fresh(2, 0.1);
  amsgrad_step(st, s, std::vector<double>{1.0, 0.0});
  CHECK(st.first_moment[0] == doctest::Approx(0.1));
  CHECK(st.second_moment[0] == doctest::Approx(0.001));
  CHECK(st.second_moment_max[0] == doctest::Approx(0.001));
  CHECK(s.parameters()[0] == doctest::Approx(1.0 - 0.01 / (std::sqrt(0.001) + 1e-8)).epsilon(1e-12));
  CHECK(s.parameters()[0] == doctest::Approx(0.68377).epsilon(1e-5));
  CHECK(s.parameters()[1] == 0.0);
  CHECK(st.step_count == 1);
}

TEST_CASE("AMSGrad zero gradient and max accumulator") {
  Scorer s = Scorer::linear(2);
  s.initialize(3);
  const std::vector<double> before(s.parameters().begin(), s.parameters().end());
  OptimizerState st = OptimizerState::fresh(3, 0.1);
  amsgrad_step(st, s, std::vector<double>(3, 0.0));
  CHECK(std::vector<double>(s.parameters().begin(), s.parameters().end()) == before);

  const std::vector<double> g{0.5, -2.0, 1.0};
  std::vector<double> prev = st.second_moment_max;
  for (int i = 0; i < 5; ++i) {
    amsgrad_step(st, s, i % 2 ? g : std::vector<double>{0.01, 0.0, 3.0});
    for (std::size_t j = 0; j < 3; ++j) CHECK(st.second_moment_max[j] >= prev[j]);
    prev = st.second_moment_max;
  }
  CHECK_THROWS_AS(amsgrad_step(st, s, std::vector<double>{1.0, NAN, 0.0}), Error);
  CHECK_THROWS_AS(amsgrad_step(st, s, std::vector<double>{1.0}), Error);
}

TEST_CASE("train config validation and decay") {
  TrainConfig c;
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.epochs = 5;
  c.batch_u = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.batch_u = 1;
  c.learning_rate = 0.1;
  c.lr_decay_epochs = {2, 4};
  CHECK(c.learning_rate_at(1) == doctest::Approx(0.1));
  CHECK(c.learning_rate_at(2) == doctest::Approx(0.1));
  CHECK(c.learning_rate_at(3) == doctest::Approx(0.01));
  CHECK(c.learning_rate_at(5) == doctest::Approx(0.001));
}

TEST_CASE("sigma validation loss reference values") {
  const Dataset d = separable(1);
  const Priors priors(0.4, 0.2);
  CHECK(validation_loss_sigma(d.valid, SigmaEstimate([](std::span<const double>) { return 0.0; }), priors) == 0.0);
  CHECK(validation_loss_sigma(d.valid, SigmaEstimate([](std::span<const double>) { return 1.0; }), priors) ==
        doctest::Approx(-0.2));
  Partition no_bn = d.valid;
  no_bn.bn.clear();
  CHECK_THROWS_AS(
      validation_loss_sigma(no_bn, SigmaEstimate([](std::span<const double>) { return 1.0; }), priors), Error);
}

TEST_CASE("g validation loss") {
  const Dataset d = separable(2);
  CHECK(validation_loss_g(d.valid, ConstantScore(0.0), d.priors) == doctest::Approx(0.5));
  Partition twice = d.valid;
  twice.p.insert(twice.p.end(), d.valid.p.begin(), d.valid.p.end());
  twice.u.insert(twice.u.end(), d.valid.u.begin(), d.valid.u.end());
  class Id final : public DecisionFunction {
   public:
    double score(std::span<const double> x) const override { return x[0]; }
  } g;
  CHECK(validation_loss_g(twice, g, d.priors) == doctest::Approx(validation_loss_g(d.valid, g, d.priors)).epsilon(1e-12));
}

TEST_CASE("separable data give near-zero uPU validation loss for a large-margin separator") {
  // U is exactly pi-mixed: 4 positives at +10, 6 negatives at -10.
  Partition v;
  for (int i = 0; i < 4; ++i) v.p.push_back(Sample{{10.0}, {}, {}});
  for (int i = 0; i < 4; ++i) v.u.push_back(Sample{{10.0}, {}, {}});
  for (int i = 0; i < 6; ++i) v.u.push_back(Sample{{-10.0}, {}, {}});
  class Id final : public DecisionFunction {
   public:
    double score(std::span<const double> x) const override { return x[0]; }
  } g;
  CHECK(std::fabs(validation_loss_g(v, g, Priors(0.4, 0.0))) < 1e-4);
}

TEST_CASE("PN training never corrects") {
  const Dataset d = separable(3, 0.5, 0.0);
  Dataset pn = d;
  pn.train.bn = pn.train.u;  // stand-in negatives are irrelevant for the count
  pn.priors = Priors(0.5, 0.1);
  RiskSpec spec;
  spec.estimator = Estimator::PN;
  const TrainedModel m = train_estimator(pn, ModelSpec{}, small_config(4), spec);
  for (const EpochStats& e : m.report.epochs) CHECK(e.corrected_steps == 0);
}

TEST_CASE("nnPU with correction disabled retraces uPU") {
  const Dataset d = overfit_prone(5);
  TrainConfig cfg = small_config(6);
  cfg.beta_threshold = std::numeric_limits<double>::infinity();
  RiskSpec u;
  u.estimator = Estimator::UPU;
  u.loss = kSigmoidLoss;
  RiskSpec nn = u;
  nn.estimator = Estimator::NNPU;
  ModelSpec mlp{ScorerKind::Mlp, {16}};
  const TrainedModel a = train_estimator(d, mlp, cfg, u);
  const TrainedModel b = train_estimator(d, mlp, cfg, nn);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i) {
    CHECK(a.report.epochs[i].validation_loss == b.report.epochs[i].validation_loss);
    CHECK(b.report.epochs[i].corrected_steps == 0);
  }
  CHECK(a.report.best_parameters == b.report.best_parameters);
}

TEST_CASE("nnPU correction engages on an overfit-prone task") {
  const Dataset d = overfit_prone(7);
  TrainConfig cfg = small_config(8);
  cfg.epochs = 60;
  cfg.batch_p = 5;
  cfg.batch_u = 75;
  cfg.learning_rate = 0.01;
  RiskSpec nn;
  nn.estimator = Estimator::NNPU;
  nn.loss = kSigmoidLoss;
  const TrainedModel m = train_estimator(d, ModelSpec{ScorerKind::Mlp, {64, 64}}, cfg, nn);
  std::size_t late = 0;
  for (std::size_t e = 30; e < m.report.epochs.size(); ++e) late += m.report.epochs[e].corrected_steps;
  CHECK(late > 0);
}

TEST_CASE("epoch-best selection and determinism") {
  const Dataset d = overfit_prone(9);
  RiskSpec spec;
  spec.estimator = Estimator::NNPU;
  spec.loss = kSigmoidLoss;
  const TrainConfig cfg = small_config(10);
  const TrainedModel a = train_estimator(d, ModelSpec{ScorerKind::Mlp, {8}}, cfg, spec);
  const TrainedModel b = train_estimator(d, ModelSpec{ScorerKind::Mlp, {8}}, cfg, spec);
  CHECK(a.report.best_parameters == b.report.best_parameters);
  CHECK(a.report.best_epoch >= 1);
  double min_loss = std::numeric_limits<double>::infinity();
  for (std::size_t e = 1; e < a.report.epochs.size(); ++e) min_loss = std::min(min_loss, a.report.epochs[e].validation_loss);
  CHECK(a.report.best_validation_loss == min_loss);
  CHECK(a.report.epochs[a.report.best_epoch].validation_loss == min_loss);
  CHECK(std::fabs(validation_loss_g(d.valid, a.scorer, d.priors) - min_loss) <= 1e-12);
}

TEST_CASE("sigma estimate on separated clusters") {
  const Dataset d = separable(11);
  TrainConfig cfg = small_config(12);
  cfg.epochs = 30;
  const SigmaFit fit = estimate_sigma(d.train, d.valid, d.priors, ModelSpec{}, 1, cfg);
  const std::vector<double> plus{3.0}, minus{-3.0};
  CHECK(fit.sigma(plus) > 0.9);
  CHECK(fit.sigma(minus) < 0.1);
  CHECK(fit.report.epochs[fit.report.best_epoch].validation_loss < fit.report.epochs[0].validation_loss);
  for (double x = -20.0; x <= 20.0; x += 0.5) {
    const std::vector<double> v{x};
    const double s = fit.sigma(v);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("sigma estimate on a symmetric problem") {
  LatentMixtureSpec spec;
  spec.dim = 1;
  spec.pi = 0.3;
  spec.rho = 0.2;
  spec.categories = {{{2.0}, 1.0, +1, 1.0, 0.0},
                     {{2.0}, 1.0, -1, 0.2 / 0.7, 1.0},
                     {{-2.0}, 1.0, -1, 0.5 / 0.7, 0.0}};
  const Dataset d = generate(spec, SplitSizes{300, 300, 2000, 100, 100, 500, 100}, 13);
  const SigmaFit fit = estimate_sigma(d.train, d.valid, d.priors, ModelSpec{}, 1, small_config(14));
  const std::vector<double> mid{0.0};
  CHECK(fit.sigma(mid) >= 0.3);
  CHECK(fit.sigma(mid) <= 0.7);
}

TEST_CASE("sigma estimation rejects a full labeled mass") {
  const Dataset d = separable(15);
  CHECK_THROWS_AS(estimate_sigma(d.train, d.valid, Priors(0.6, 0.4), ModelSpec{}, 1, small_config(1)), Error);
}

TEST_CASE("PUbN pipeline") {
  const Dataset d = separable(16);
  const TrainConfig cfg = small_config(17);

  SUBCASE("infeasible tau surfaces before training") {
    PubnOptions o;
    o.tau = 3.0;
    try {
      run_pubn(d, ModelSpec{}, cfg, o);
      FAIL("expected InfeasibleTau");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InfeasibleTau);
    }
  }

  SUBCASE("without bN, PUbN equals PUbN\\N") {
    Dataset no_bn = d;
    no_bn.train.bn.clear();
    no_bn.valid.bn.clear();
    no_bn.priors = d.priors.with_rho(0.0);
    PubnOptions a;
    a.estimator = Estimator::PUbN;
    PubnOptions b;
    b.estimator = Estimator::PUbNNoN;
    const PubnRun ra = run_pubn(no_bn, ModelSpec{}, cfg, a);
    const PubnRun rb = run_pubn(d, ModelSpec{}, cfg, b);
    CHECK(ra.eta.eta == rb.eta.eta);
    CHECK(ra.model.report.best_parameters == rb.model.report.best_parameters);
  }

  SUBCASE("shared and split sigma step agree") {
    PubnOptions o;
    const PubnRun whole = run_pubn(d, ModelSpec{}, cfg, o);
    const PubnRun split = pubn_second_step(d, ModelSpec{}, cfg, o, pubn_sigma_step(d, ModelSpec{}, cfg, o.estimator));
    CHECK(whole.model.report.best_parameters == split.model.report.best_parameters);
    CHECK(whole.eta.included == whole.eta.target);
  }

  SUBCASE("disjoint halves still train") {
    TrainConfig dj = cfg;
    dj.disjoint_sigma = true;
    PubnOptions o;
    const PubnRun r = run_pubn(d, ModelSpec{}, dj, o);
    CHECK(r.eta.target == eta_target_count(0.7, d.priors, d.train.u.size() - d.train.u.size() / 2));
  }
}

TEST_CASE("derive_seed spreads nearby inputs") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
}
