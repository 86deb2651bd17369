#include "pubn/core.hpp"

#include <cmath>
#include <string>

#include "pubn/model.hpp"

namespace pubn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::EmptySplit: return "empty split";
    case ErrorKind::UnsupportedDerivative: return "unsupported derivative";
    case ErrorKind::InfeasibleTau: return "infeasible tau";
    case ErrorKind::InvalidSigma: return "invalid sigma";
    case ErrorKind::InvalidPrior: return "invalid prior";
    case ErrorKind::InvalidSpec: return "invalid spec";
    case ErrorKind::DivergedTraining: return "diverged training";
    case ErrorKind::HypothesisViolated: return "hypothesis violated";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

Priors::Priors(double pi, double rho) : pi_(pi), rho_(rho) {
  if (!(pi > 0.0 && pi < 1.0)) {
    throw Error(ErrorKind::InvalidPrior, "pi must lie in (0, 1), got " + std::to_string(pi));
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw Error(ErrorKind::InvalidPrior, "rho must lie in [0, 1), got " + std::to_string(rho));
  }
  if (pi + rho > 1.0) {
    throw Error(ErrorKind::InvalidPrior, "pi + rho exceeds 1");
  }
}

namespace {

void check_list(const SampleList& list, std::size_t dim, const char* name, int required_label) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Sample& s = list[i];
    if (s.features.size() != dim) {
      throw Error(ErrorKind::InvalidInput, std::string(name) + " sample " + std::to_string(i) +
                                               " has dimension " + std::to_string(s.features.size()) +
                                               ", expected " + std::to_string(dim));
    }
    if (required_label != 0 && s.label && *s.label != required_label) {
      throw Error(ErrorKind::InvalidInput, std::string(name) + " sample " + std::to_string(i) +
                                               " carries a contradicting label");
    }
  }
}

}  // namespace

void Dataset::validate() const {
  check_list(train.p, dim, "P", +1);
  check_list(train.bn, dim, "bN", -1);
  check_list(train.u, dim, "U", 0);
  check_list(valid.p, dim, "P_val", +1);
  check_list(valid.bn, dim, "bN_val", -1);
  check_list(valid.u, dim, "U_val", 0);
  check_list(test, dim, "test", 0);
  for (const Sample& s : test) {
    if (!s.label) throw Error(ErrorKind::InvalidInput, "test sample without a label");
  }
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ZeroOne: return "zero-one";
    case LossKind::Sigmoid: return "sigmoid";
    case LossKind::Logistic: return "logistic";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "zero-one" || name == "zero_one" || name == "01") return LossKind::ZeroOne;
  if (name == "sigmoid") return LossKind::Sigmoid;
  if (name == "logistic") return LossKind::Logistic;
  throw Error(ErrorKind::Config, "unknown loss '" + std::string(name) + "'");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double loss_value(Loss loss, double z) {
  if (!std::isfinite(z)) throw Error(ErrorKind::InvalidInput, "non-finite margin");
  switch (loss.kind) {
    case LossKind::ZeroOne:
      // sign(0) = 0 gives 1/2 at the boundary.
      if (z > 0.0) return 0.0;
      if (z < 0.0) return 1.0;
      return 0.5;
    case LossKind::Sigmoid:
      return sigmoid(-z);
    case LossKind::Logistic:
      if (z >= 0.0) return std::log1p(std::exp(-z));
      return -z + std::log1p(std::exp(z));
  }
  return 0.0;
}

double loss_derivative(Loss loss, double z) {
  if (!std::isfinite(z)) throw Error(ErrorKind::InvalidInput, "non-finite margin");
  switch (loss.kind) {
    case LossKind::ZeroOne:
      throw Error(ErrorKind::UnsupportedDerivative, "zero-one loss has no derivative");
    case LossKind::Sigmoid: {
      const double s = sigmoid(-z);
      return -s * (1.0 - s);
    }
    case LossKind::Logistic:
      return -sigmoid(-z);
  }
  return 0.0;
}

void CompensatedSum::add(double value) noexcept {
  const double t = sum_ + value;
  if (std::fabs(sum_) >= std::fabs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

double partial_risk(std::span<const Sample> samples, const DecisionFunction& g, Loss loss, int sign) {
  if (samples.empty()) throw Error(ErrorKind::EmptySplit, "partial risk over an empty split");
  CompensatedSum acc;
  for (const Sample& s : samples) acc.add(loss_value(loss, sign * g.score(s.features)));
  return acc.value() / static_cast<double>(samples.size());
}

}  // namespace pubn
