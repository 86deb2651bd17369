#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pubn/core.hpp"
#include "pubn/model.hpp"
#include "pubn/risk.hpp"

namespace pubn {

// AMSGrad without bias correction:
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2;  vhat <- max(vhat, v)
//   theta <- theta - lr * m / (sqrt(vhat) + eps)
struct OptimizerState {
  Vector first_moment;
  Vector second_moment;
  Vector second_moment_max;
  std::size_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState fresh(std::size_t parameter_count, double learning_rate);
};

// Throws DivergedTraining on a non-finite gradient.
void amsgrad_step(OptimizerState& state, Scorer& scorer, std::span<const double> gradient);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_p = 10;
  std::size_t batch_bn = 10;
  std::size_t batch_u = 120;
  double learning_rate = 1e-3;
  std::vector<std::size_t> lr_decay_epochs;  // divide by 10 after each listed epoch
  double beta_threshold = 0.0;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  // Train sigma_hat and g on disjoint halves of the training pools.
  bool disjoint_sigma = false;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_risk = 0.0;       // estimator total on the full training pools
  double train_remainder = 0.0;  // unclamped remainder on the full training pools
  double validation_loss = 0.0;
  std::size_t steps = 0;
  std::size_t corrected_steps = 0;
  double monitor = 0.0;  // optional caller-defined series, e.g. test error
};

struct TrainReport {
  std::vector<EpochStats> epochs;  // epochs[0] is the untrained model
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  Vector best_parameters;
};

using ScorerMetric = std::function<double(const Scorer&)>;

// One pass over independently shuffled pools cut into aligned minibatches.
// Non-negative estimators take a descent step on -r whenever the minibatch
// remainder r falls below -beta_threshold.
EpochStats train_epoch(const Partition& train, const Priors& priors, Scorer& scorer, const RiskSpec& spec,
                       const SigmaEstimate* sigma, const TrainConfig& config, OptimizerState& state,
                       std::mt19937_64& rng);

// Runs config.epochs epochs and keeps the parameters with the lowest
// validation loss seen after any epoch. On return the scorer holds them.
TrainReport fit(const Partition& train, const Priors& priors, Scorer& scorer, const RiskSpec& spec,
                const SigmaEstimate* sigma, const TrainConfig& config, const ScorerMetric& validation,
                const ScorerMetric& monitor = {});

// uPU risk with the sigmoid loss on validation P and U.
double validation_loss_g(const Partition& valid, const DecisionFunction& g, const Priors& priors);

// J(sigma_hat) = mean_U s^2 - 2 pi mean_P s - 2 rho mean_bN s.
double validation_loss_sigma(const Partition& valid, const SigmaEstimate& sigma, const Priors& priors);

struct ModelSpec {
  ScorerKind kind = ScorerKind::Linear;
  std::vector<std::size_t> hidden;

  Scorer build(std::size_t dim, double weight_decay, std::uint64_t seed) const;
};

struct SigmaFit {
  Scorer scorer;
  SigmaEstimate sigma;
  TrainReport report;
};

// nnPU with the logistic loss, P and bN pooled as positives with prior
// pi + rho, U as unlabeled; sigma_hat = sigmoid(g_sigma).
SigmaFit estimate_sigma(const Partition& train, const Partition& valid, const Priors& priors, const ModelSpec& model,
                        std::size_t dim, const TrainConfig& config);

struct PubnOptions {
  Estimator estimator = Estimator::PUbN;  // PUbN or PUbN\N
  double tau = 0.7;
  Loss loss = kLogisticLoss;
  // rho used for tau -> eta; defaults to the rho of the priors in use.
  std::optional<double> eta_rho;
  ScorerMetric monitor;  // recorded per epoch of the second step
};

struct TrainedModel {
  Scorer scorer;
  TrainReport report;
};

struct PubnRun {
  SigmaFit sigma;
  EtaSelection eta;
  TrainedModel model;
};

// Two-step pipeline: estimate sigma_hat, fix eta from tau, then minimise the
// PUbN risk with epoch-best selection on validation_loss_g.
PubnRun run_pubn(const Dataset& data, const ModelSpec& model, const TrainConfig& config, const PubnOptions& options);

// The two halves of run_pubn; the first step does not depend on tau, so a
// grid over tau can share one sigma fit.
SigmaFit pubn_sigma_step(const Dataset& data, const ModelSpec& model, const TrainConfig& config, Estimator estimator);
PubnRun pubn_second_step(const Dataset& data, const ModelSpec& model, const TrainConfig& config,
                         const PubnOptions& options, SigmaFit sigma);

// Any single-step estimator, selected on validation_loss_g.
TrainedModel train_estimator(const Dataset& data, const ModelSpec& model, const TrainConfig& config,
                             const RiskSpec& spec, const ScorerMetric& monitor = {});

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace pubn
