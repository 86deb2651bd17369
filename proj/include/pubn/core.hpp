#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pubn/error.hpp"

namespace pubn {

using Vector = std::vector<double>;

// Class priors. pi = p(y=+1), rho = p(y=-1, s=+1).
class Priors {
 public:
  Priors(double pi, double rho);

  double pi() const noexcept { return pi_; }
  double rho() const noexcept { return rho_; }
  // Mass of the region never covered by labeled data, p(s=-1).
  double remainder() const noexcept { return 1.0 - pi_ - rho_; }

  Priors with_rho(double rho) const { return Priors(pi_, rho); }

 private:
  double pi_;
  double rho_;
};

struct Sample {
  Vector features;
  std::optional<int> latent;  // synthetic provenance only
  std::optional<int> label;   // +1 / -1, held-out evaluation only
};

using SampleList = std::vector<Sample>;

// The three pools available for training (or for validation).
struct Partition {
  SampleList p;
  SampleList bn;
  SampleList u;
};

struct Dataset {
  std::size_t dim = 0;
  Priors priors{0.5, 0.0};
  Partition train;
  Partition valid;
  SampleList test;  // every sample carries a label

  // Throws InvalidInput when any sample disagrees with dim or a labeled
  // positive pool sample says otherwise.
  void validate() const;
};

enum class LossKind { ZeroOne, Sigmoid, Logistic };

struct Loss {
  LossKind kind = LossKind::Logistic;

  bool differentiable() const noexcept { return kind != LossKind::ZeroOne; }
};

inline constexpr Loss kZeroOneLoss{LossKind::ZeroOne};
inline constexpr Loss kSigmoidLoss{LossKind::Sigmoid};
inline constexpr Loss kLogisticLoss{LossKind::Logistic};

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

double loss_value(Loss loss, double z);
double loss_derivative(Loss loss, double z);

// Logistic sigmoid 1 / (1 + exp(-z)), evaluated without overflow.
double sigmoid(double z);

// Neumaier-compensated accumulator. Partial risks are sums of many small
// terms; compensation keeps them stable under reordering.
class CompensatedSum {
 public:
  void add(double value) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

class DecisionFunction;

// (1/n) sum_i loss(sign * g(x_i)).
double partial_risk(std::span<const Sample> samples, const DecisionFunction& g, Loss loss, int sign);

}  // namespace pubn
