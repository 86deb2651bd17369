#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pubn/core.hpp"

namespace pubn {

// Anything that maps a feature vector to a real-valued decision score.
class DecisionFunction {
 public:
  virtual ~DecisionFunction() = default;
  virtual double score(std::span<const double> x) const = 0;
};

// Constant decision function; g == 0 is the reference point for many risk
// identities.
class ConstantScore final : public DecisionFunction {
 public:
  explicit ConstantScore(double value) : value_(value) {}
  double score(std::span<const double>) const override { return value_; }

 private:
  double value_;
};

enum class ScorerKind { Linear, Mlp };

const char* to_string(ScorerKind kind);

// One term of a weighted margin objective: weight * loss(sign * g(x)).
struct WeightedExample {
  std::span<const double> x;
  int sign = 1;
  double weight = 0.0;
};

using Gradient = std::vector<double>;

// Fully connected network d -> h1 -> ... -> 1 with rectifier hidden units.
// The linear scorer is the special case with no hidden layer. Parameters are
// stored flat, layer by layer, each layer as a row-major weight matrix
// (out x in) followed by its bias vector.
class Scorer final : public DecisionFunction {
 public:
  static Scorer linear(std::size_t dim, double weight_decay = 0.0);
  static Scorer mlp(std::size_t dim, std::vector<std::size_t> hidden, double weight_decay = 0.0);

  // Glorot-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  ScorerKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  void set_parameters(std::span<const double> values);

  double weight_decay() const noexcept { return weight_decay_; }
  void set_weight_decay(double value);

  double forward(std::span<const double> x) const;
  double score(std::span<const double> x) const override { return forward(x); }

  // Gradient of sum_i w_i * loss(s_i * g(x_i)) + weight_decay * |theta|^2 / 2.
  // Contributions are summed; weights are expected to carry any 1/n factors.
  Gradient backward_weighted(std::span<const WeightedExample> batch, Loss loss) const;

  // The objective whose gradient backward_weighted returns.
  double weighted_objective(std::span<const WeightedExample> batch, Loss loss) const;

  // Smallest |pre-activation| over hidden units for input x; +inf for linear.
  double min_abs_preactivation(std::span<const double> x) const;

 private:
  Scorer(ScorerKind kind, std::vector<std::size_t> widths, double weight_decay);

  void check_input(std::span<const double> x) const;
  // Fills per-layer activations (post-rectifier for hidden layers).
  double forward_trace(std::span<const double> x, std::vector<Vector>& activations,
                       std::vector<Vector>* preactivations) const;

  ScorerKind kind_;
  std::vector<std::size_t> widths_;
  std::vector<double> params_;
  double weight_decay_ = 0.0;
};

// Largest relative discrepancy between backward_weighted and central finite
// differences of weighted_objective, taken over all parameters.
double gradient_check(const Scorer& scorer, std::span<const WeightedExample> batch, Loss loss, double step);

// Text checkpoint: versioned header, architecture, optional key=value config
// echo lines, then one parameter per line at round-trip precision.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;
};

void save_checkpoint(std::ostream& out, const Scorer& scorer, const Checkpoint& meta = {});
Scorer load_checkpoint(std::istream& in, Checkpoint* meta = nullptr);

}  // namespace pubn
