#include "pubn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pubn {

OptimizerState OptimizerState::fresh(std::size_t parameter_count, double learning_rate) {
  OptimizerState s;
  s.first_moment.assign(parameter_count, 0.0);
  s.second_moment.assign(parameter_count, 0.0);
  s.second_moment_max.assign(parameter_count, 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void amsgrad_step(OptimizerState& state, Scorer& scorer, std::span<const double> gradient) {
  const std::size_t n = scorer.parameter_count();
  if (gradient.size() != n || state.first_moment.size() != n || state.second_moment.size() != n ||
      state.second_moment_max.size() != n) {
    throw Error(ErrorKind::InvalidInput, "optimizer state and gradient must match the scorer");
  }
  for (double g : gradient) {
    if (!std::isfinite(g)) throw Error(ErrorKind::DivergedTraining, "non-finite gradient");
  }
  auto theta = scorer.parameters();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    double& vmax = state.second_moment_max[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    vmax = std::max(vmax, v);
    theta[i] -= state.learning_rate * m / (std::sqrt(vmax) + state.epsilon);
  }
  ++state.step_count;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be at least 1");
  if (batch_p < 1 || batch_bn < 1 || batch_u < 1) throw Error(ErrorKind::Config, "batch sizes must be at least 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
  if (!(beta_threshold >= 0.0)) throw Error(ErrorKind::Config, "beta must be nonnegative");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::Config, "weight decay must be nonnegative");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  double lr = learning_rate;
  for (std::size_t d : lr_decay_epochs) {
    if (epoch > d) lr /= 10.0;
  }
  return lr;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void gather(SampleList& out, const SampleList& pool, const std::vector<std::size_t>& order, std::size_t begin,
            std::size_t count) {
  out.clear();
  for (std::size_t i = begin; i < begin + count; ++i) out.push_back(pool[order[i]]);
}

}  // namespace

EpochStats train_epoch(const Partition& train, const Priors& priors, Scorer& scorer, const RiskSpec& spec,
                       const SigmaEstimate* sigma, const TrainConfig& config, OptimizerState& state,
                       std::mt19937_64& rng) {
  const bool use_bn = (uses_bn(spec.estimator) || spec.pool_bn) && !train.bn.empty();
  const bool use_u = spec.estimator != Estimator::PN;
  if (train.p.empty()) throw Error(ErrorKind::EmptySplit, "P split is empty");
  if (use_u && train.u.empty()) throw Error(ErrorKind::EmptySplit, "U split is empty");

  const std::size_t bp = std::min(config.batch_p, train.p.size());
  const std::size_t bbn = use_bn ? std::min(config.batch_bn, train.bn.size()) : 0;
  const std::size_t bu = use_u ? std::min(config.batch_u, train.u.size()) : 0;
  std::size_t batches = train.p.size() / bp;
  if (use_bn) batches = std::min(batches, train.bn.size() / bbn);
  if (use_u) batches = std::min(batches, train.u.size() / bu);

  // Shuffle order is fixed (P, bN, U) so the stream is seed-reproducible.
  const auto order_p = shuffled_indices(train.p.size(), rng);
  const auto order_bn = use_bn ? shuffled_indices(train.bn.size(), rng) : std::vector<std::size_t>{};
  const auto order_u = use_u ? shuffled_indices(train.u.size(), rng) : std::vector<std::size_t>{};

  EpochStats stats;
  Partition batch;
  for (std::size_t j = 0; j < batches; ++j) {
    gather(batch.p, train.p, order_p, j * bp, bp);
    if (use_bn) gather(batch.bn, train.bn, order_bn, j * bbn, bbn);
    if (use_u) gather(batch.u, train.u, order_u, j * bu, bu);

    const WeightedBatch weighted = assemble_weights(spec, batch, priors, sigma);
    Gradient grad;
    bool ascend = false;
    if (weighted.correctable) {
      const double r = weighted.evaluate(scorer, spec.loss, TermGroup::Remainder);
      ascend = r < -config.beta_threshold;
    }
    if (ascend) {
      const auto examples = weighted.examples(TermGroup::Remainder, -1.0);
      grad = scorer.backward_weighted(examples, spec.loss);
      ++stats.corrected_steps;
    } else {
      const auto examples = weighted.examples();
      grad = scorer.backward_weighted(examples, spec.loss);
    }
    amsgrad_step(state, scorer, grad);
    ++stats.steps;
  }
  for (double p : scorer.parameters()) {
    if (!std::isfinite(p)) throw Error(ErrorKind::DivergedTraining, "parameters became non-finite");
  }
  return stats;
}

TrainReport fit(const Partition& train, const Priors& priors, Scorer& scorer, const RiskSpec& spec,
                const SigmaEstimate* sigma, const TrainConfig& config, const ScorerMetric& validation,
                const ScorerMetric& monitor) {
  config.validate();
  spec.validate();
  scorer.set_weight_decay(config.weight_decay);
  OptimizerState state = OptimizerState::fresh(scorer.parameter_count(), config.learning_rate);
  std::mt19937_64 rng(config.seed);

  TrainReport report;
  auto record = [&](EpochStats stats) {
    const RiskBreakdown risk = evaluate_risk(spec, train, priors, scorer, sigma);
    stats.train_risk = risk.total;
    stats.train_remainder = risk.remainder;
    stats.validation_loss = validation(scorer);
    if (monitor) stats.monitor = monitor(scorer);
    report.epochs.push_back(stats);
    return stats.validation_loss;
  };
  record(EpochStats{});
  report.best_validation_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    state.learning_rate = config.learning_rate_at(epoch);
    EpochStats stats = train_epoch(train, priors, scorer, spec, sigma, config, state, rng);
    stats.epoch = epoch;
    const double vloss = record(stats);
    if (vloss < report.best_validation_loss) {
      report.best_validation_loss = vloss;
      report.best_epoch = epoch;
      report.best_parameters.assign(scorer.parameters().begin(), scorer.parameters().end());
    }
  }
  if (report.best_parameters.empty()) {
    // Every validation loss was NaN.
    throw Error(ErrorKind::DivergedTraining, "validation loss never finite");
  }
  scorer.set_parameters(report.best_parameters);
  return report;
}

double validation_loss_g(const Partition& valid, const DecisionFunction& g, const Priors& priors) {
  return risk_upu(valid, priors, g, kSigmoidLoss).total;
}

double validation_loss_sigma(const Partition& valid, const SigmaEstimate& sigma, const Priors& priors) {
  if (valid.p.empty() || valid.u.empty()) throw Error(ErrorKind::EmptySplit, "validation P and U must be non-empty");
  CompensatedSum u2;
  for (const Sample& x : valid.u) {
    const double s = sigma(x.features);
    u2.add(s * s);
  }
  CompensatedSum p1;
  for (const Sample& x : valid.p) p1.add(sigma(x.features));
  double j = u2.value() / static_cast<double>(valid.u.size()) -
             2.0 * priors.pi() * p1.value() / static_cast<double>(valid.p.size());
  if (priors.rho() > 0.0) {
    if (valid.bn.empty()) throw Error(ErrorKind::EmptySplit, "validation bN is empty while rho > 0");
    CompensatedSum bn1;
    for (const Sample& x : valid.bn) bn1.add(sigma(x.features));
    j -= 2.0 * priors.rho() * bn1.value() / static_cast<double>(valid.bn.size());
  }
  return j;
}

Scorer ModelSpec::build(std::size_t dim, double weight_decay, std::uint64_t seed) const {
  Scorer s = kind == ScorerKind::Linear ? Scorer::linear(dim, weight_decay) : Scorer::mlp(dim, hidden, weight_decay);
  s.initialize(seed);
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

namespace {

// Halves used in disjoint mode: first half for sigma_hat, second for g.
Partition half(const Partition& src, bool second) {
  auto cut = [second](const SampleList& list) {
    const std::size_t mid = list.size() / 2;
    return second ? SampleList(list.begin() + static_cast<std::ptrdiff_t>(mid), list.end())
                  : SampleList(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(mid));
  };
  return Partition{cut(src.p), cut(src.bn), cut(src.u)};
}

}  // namespace

SigmaFit estimate_sigma(const Partition& train, const Partition& valid, const Priors& priors, const ModelSpec& model,
                        std::size_t dim, const TrainConfig& config) {
  const double labeled_mass = priors.pi() + priors.rho();
  if (!(labeled_mass < 1.0)) throw Error(ErrorKind::InvalidPrior, "sigma estimation needs pi + rho < 1");
  const bool with_bn = priors.rho() > 0.0;
  if (with_bn && train.bn.empty()) throw Error(ErrorKind::EmptySplit, "bN split is empty");
  const Partition pu{train.p, with_bn ? train.bn : SampleList{}, train.u};

  TrainConfig cfg = config;
  cfg.seed = derive_seed(config.seed, 1);

  // P and bN keep their own masses pi and rho; concatenating them would
  // weight the two by their sample counts instead.
  RiskSpec spec;
  spec.estimator = Estimator::NNPU;
  spec.loss = kLogisticLoss;
  spec.beta = config.beta_threshold;
  spec.pool_bn = with_bn;

  Scorer scorer = model.build(dim, config.weight_decay, derive_seed(config.seed, 2));
  const Priors& vpriors = priors;
  TrainReport report = fit(pu, priors, scorer, spec, nullptr, cfg, [&](const Scorer& g) {
    return validation_loss_sigma(valid, SigmaEstimate::from_scorer(g), vpriors);
  });
  SigmaEstimate sigma = SigmaEstimate::from_scorer(scorer);
  return SigmaFit{std::move(scorer), std::move(sigma), std::move(report)};
}

namespace {

struct PubnInputs {
  Priors priors;
  Partition sigma_train;
  Partition g_train;
  Partition valid;
};

PubnInputs pubn_inputs(const Dataset& data, const TrainConfig& config, Estimator estimator) {
  if (!uses_sigma(estimator)) throw Error(ErrorKind::Config, "the two-step pipeline needs PUbN or PUbN\\N");
  const bool no_n = estimator == Estimator::PUbNNoN;
  PubnInputs in{no_n ? data.priors.with_rho(0.0) : data.priors, data.train, data.train, data.valid};
  if (data.train.p.empty() || data.train.u.empty()) throw Error(ErrorKind::EmptySplit, "P and U must be non-empty");
  if (!no_n && in.priors.rho() > 0.0 && data.train.bn.empty()) throw Error(ErrorKind::EmptySplit, "bN split is empty");
  if (no_n) {
    in.sigma_train.bn.clear();
    in.g_train.bn.clear();
    in.valid.bn.clear();
  }
  if (config.disjoint_sigma) {
    in.sigma_train = half(in.sigma_train, false);
    in.g_train = half(in.g_train, true);
  }
  return in;
}

Priors eta_priors_for(const PubnInputs& in, const PubnOptions& options) {
  if (options.estimator == Estimator::PUbNNoN) return in.priors;
  return in.priors.with_rho(options.eta_rho.value_or(in.priors.rho()));
}

void check_tau(const PubnInputs& in, const PubnOptions& options) {
  const std::size_t n = in.g_train.u.size();
  const std::size_t k = eta_target_count(options.tau, eta_priors_for(in, options), n);
  if (k > n) {
    throw Error(ErrorKind::InfeasibleTau, "tau=" + std::to_string(options.tau) + " needs " + std::to_string(k) +
                                              " unlabeled samples, only " + std::to_string(n) + " available");
  }
}

}  // namespace

SigmaFit pubn_sigma_step(const Dataset& data, const ModelSpec& model, const TrainConfig& config, Estimator estimator) {
  const PubnInputs in = pubn_inputs(data, config, estimator);
  return estimate_sigma(in.sigma_train, in.valid, in.priors, model, data.dim, config);
}

PubnRun pubn_second_step(const Dataset& data, const ModelSpec& model, const TrainConfig& config,
                         const PubnOptions& options, SigmaFit sigma) {
  const PubnInputs in = pubn_inputs(data, config, options.estimator);
  check_tau(in, options);
  const EtaSelection eta = select_eta(sigma.sigma, in.g_train.u, eta_priors_for(in, options), options.tau);

  RiskSpec spec;
  spec.estimator = options.estimator;
  spec.loss = options.loss;
  spec.tau = options.tau;
  spec.eta = eta.eta;
  spec.beta = config.beta_threshold;

  TrainConfig cfg = config;
  cfg.seed = derive_seed(config.seed, 3);
  Scorer g = model.build(data.dim, config.weight_decay, derive_seed(config.seed, 4));
  const Priors priors = in.priors;
  TrainReport report = fit(in.g_train, priors, g, spec, &sigma.sigma, cfg,
                           [&](const Scorer& s) { return validation_loss_g(in.valid, s, priors); }, options.monitor);
  return PubnRun{std::move(sigma), eta, TrainedModel{std::move(g), std::move(report)}};
}

PubnRun run_pubn(const Dataset& data, const ModelSpec& model, const TrainConfig& config, const PubnOptions& options) {
  // An infeasible tau must surface before either step trains.
  check_tau(pubn_inputs(data, config, options.estimator), options);
  SigmaFit sigma = pubn_sigma_step(data, model, config, options.estimator);
  return pubn_second_step(data, model, config, options, std::move(sigma));
}

TrainedModel train_estimator(const Dataset& data, const ModelSpec& model, const TrainConfig& config,
                             const RiskSpec& spec, const ScorerMetric& monitor) {
  if (uses_sigma(spec.estimator)) throw Error(ErrorKind::Config, "use run_pubn for the PUbN family");
  Scorer g = model.build(data.dim, config.weight_decay, derive_seed(config.seed, 4));
  TrainConfig cfg = config;
  cfg.seed = derive_seed(config.seed, 3);
  TrainReport report = fit(data.train, data.priors, g, spec, nullptr, cfg,
                           [&](const Scorer& s) { return validation_loss_g(data.valid, s, data.priors); }, monitor);
  return TrainedModel{std::move(g), std::move(report)};
}

}  // namespace pubn
