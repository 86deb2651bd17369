#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pubn/core.hpp"
#include "pubn/synthgen.hpp"
#include "pubn/train.hpp"

namespace pubn {

struct Metrics {
  double fpr = 0.0;
  double fnr = 0.0;
  double error = 0.0;
};

// FPR = FP / #negatives, FNR = FN / #positives, error = (FP + FN) / n. A rate
// whose denominator is zero is reported as 0.
Metrics evaluate_metrics(std::span<const int> predictions, std::span<const int> truths);

// Strict sign; a zero score is a negative prediction.
int predict(double score);
Metrics evaluate_on(const SampleList& test, const DecisionFunction& g);

struct TaskSpec {
  std::optional<LatentMixtureSpec> synthetic;
  SplitSizes sizes;
  std::string csv_path;
};

// Name of the two-classifier baseline (nnPU on s, PN on P vs bN, positive
// only when both agree).
inline constexpr const char* kPuToPn = "PU->PN";

struct ExperimentConfig {
  TaskSpec task;
  std::optional<Priors> priors;  // overrides the synthetic spec; required for CSV tasks
  std::vector<std::string> estimators{"nnPU", "PUbN\\N"};
  ModelSpec model;
  std::optional<ModelSpec> sigma_model;  // model of g_sigma; defaults to `model`
  TrainConfig train;
  Loss loss = kLogisticLoss;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<double> tau_grid{0.5, 0.7, 0.9};
  std::vector<double> gamma_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> learning_rate_grid;  // empty: train.learning_rate only
  std::size_t jobs = 1;
  std::string out;

  void validate() const;
  std::vector<double> learning_rates() const;
  Priors effective_priors() const;
};

// Parses the JSON config document; relative CSV paths resolve against base_dir.
ExperimentConfig load_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_config_file(const std::string& path);

struct EpochPoint {
  std::size_t epoch = 0;
  double train_risk = 0.0;
  double validation_loss = 0.0;
  double test_error = 0.0;
  std::size_t corrected_steps = 0;
};

struct ResultRow {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  std::optional<double> tau;
  std::optional<double> gamma;
  double learning_rate = 0.0;
  Metrics metrics;
  double validation_loss = 0.0;
  std::size_t best_epoch = 0;
  std::string data_hash;
  std::vector<EpochPoint> series;  // selected configuration only
};

struct SummaryRow {
  std::string estimator;
  std::size_t trials = 0;
  double mean_error = 0.0, std_error = 0.0;
  double mean_fpr = 0.0, std_fpr = 0.0;
  double mean_fnr = 0.0, std_fnr = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // ordered by (trial, estimator)
  std::vector<SummaryRow> summary;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& estimators);

// Builds the data of one trial (synthetic draw or the CSV file).
Dataset trial_dataset(const ExperimentConfig& config, std::size_t trial);
std::string dataset_hash(const Dataset& data);

// Trains one estimator on one dataset over the hyperparameter grids and keeps
// the configuration with the lowest validation loss.
ResultRow run_single(const ExperimentConfig& config, const Dataset& data, const std::string& estimator,
                     std::uint64_t seed, std::optional<double> eta_rho = {});

struct NamedScorer {
  std::string name;
  Scorer scorer;
};

// run_single plus the selected models (g; for PUbN also sigma; for the
// PU->PN baseline both classifiers).
struct SingleRun {
  ResultRow row;
  std::vector<NamedScorer> models;
};
SingleRun run_single_detailed(const ExperimentConfig& config, const Dataset& data, const std::string& estimator,
                              std::uint64_t seed, std::optional<double> eta_rho = {});

ExperimentResult run_experiment(const ExperimentConfig& config);

enum class SweepKind { Tau, RhoMultiplier };

struct SweepBlock {
  double value = 0.0;
  std::optional<ExperimentResult> result;
  std::string error;  // set when the block failed
};

struct SweepResult {
  SweepKind kind = SweepKind::Tau;
  std::vector<SweepBlock> blocks;
};

SweepResult run_sweep(const ExperimentConfig& config, SweepKind kind, const std::vector<double>& values);

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::string summary_json(const ExperimentConfig& config, const ExperimentResult& result);
std::string sweep_json(const ExperimentConfig& config, const SweepResult& result);
void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace pubn
