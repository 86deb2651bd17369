#include "pubn/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace pubn {

const char* to_string(ScorerKind kind) { return kind == ScorerKind::Linear ? "linear" : "mlp"; }

namespace {

std::size_t count_parameters(const std::vector<std::size_t>& widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

}  // namespace

Scorer::Scorer(ScorerKind kind, std::vector<std::size_t> widths, double weight_decay)
    : kind_(kind), widths_(std::move(widths)) {
  for (std::size_t w : widths_) {
    if (w == 0) throw Error(ErrorKind::InvalidInput, "layer width must be positive");
  }
  if (widths_.size() < 2 || widths_.back() != 1) {
    throw Error(ErrorKind::InvalidInput, "architecture must end in a scalar output");
  }
  params_.assign(count_parameters(widths_), 0.0);
  set_weight_decay(weight_decay);
}

Scorer Scorer::linear(std::size_t dim, double weight_decay) {
  return Scorer(ScorerKind::Linear, {dim, 1}, weight_decay);
}

Scorer Scorer::mlp(std::size_t dim, std::vector<std::size_t> hidden, double weight_decay) {
  if (hidden.empty()) throw Error(ErrorKind::InvalidInput, "mlp needs at least one hidden layer");
  std::vector<std::size_t> widths{dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return Scorer(ScorerKind::Mlp, std::move(widths), weight_decay);
}

void Scorer::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < in * out; ++i) params_[offset + i] = dist(rng);
    offset += in * out;
    for (std::size_t i = 0; i < out; ++i) params_[offset + i] = 0.0;
    offset += out;
  }
}

void Scorer::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw Error(ErrorKind::InvalidInput, "parameter vector has length " + std::to_string(values.size()) +
                                             ", expected " + std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

void Scorer::set_weight_decay(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw Error(ErrorKind::InvalidInput, "weight decay must be a nonnegative finite number");
  }
  weight_decay_ = value;
}

void Scorer::check_input(std::span<const double> x) const {
  if (x.size() != widths_.front()) {
    throw Error(ErrorKind::InvalidInput, "input has dimension " + std::to_string(x.size()) + ", scorer expects " +
                                             std::to_string(widths_.front()));
  }
}

double Scorer::forward_trace(std::span<const double> x, std::vector<Vector>& activations,
                             std::vector<Vector>* preactivations) const {
  const std::size_t layers = widths_.size() - 1;
  activations.resize(layers);
  if (preactivations) preactivations->resize(layers);
  std::span<const double> input = x;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = widths_[l];
    const std::size_t out = widths_[l + 1];
    const double* w = params_.data() + offset;
    const double* b = w + in * out;
    Vector& a = activations[l];
    a.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * input[i];
      a[o] = z;
    }
    if (preactivations) (*preactivations)[l] = a;
    if (l + 1 < layers) {
      for (double& v : a) v = v > 0.0 ? v : 0.0;
    }
    offset += in * out + out;
    input = a;
  }
  return activations.back()[0];
}

double Scorer::forward(std::span<const double> x) const {
  check_input(x);
  if (kind_ == ScorerKind::Linear) {
    const std::size_t d = widths_.front();
    double z = params_[d];
    for (std::size_t i = 0; i < d; ++i) z += params_[i] * x[i];
    return z;
  }
  std::vector<Vector> activations;
  return forward_trace(x, activations, nullptr);
}

double Scorer::min_abs_preactivation(std::span<const double> x) const {
  check_input(x);
  if (widths_.size() <= 2) return std::numeric_limits<double>::infinity();
  std::vector<Vector> activations;
  std::vector<Vector> pre;
  forward_trace(x, activations, &pre);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < pre.size(); ++l) {
    for (double v : pre[l]) best = std::min(best, std::fabs(v));
  }
  return best;
}

Gradient Scorer::backward_weighted(std::span<const WeightedExample> batch, Loss loss) const {
  if (!loss.differentiable()) {
    throw Error(ErrorKind::UnsupportedDerivative, "cannot differentiate the zero-one loss");
  }
  Gradient grad(params_.size(), 0.0);
  const std::size_t layers = widths_.size() - 1;
  std::vector<Vector> activations;
  std::vector<Vector> pre;
  Vector delta;
  Vector next_delta;
  for (const WeightedExample& item : batch) {
    if (!std::isfinite(item.weight)) throw Error(ErrorKind::InvalidInput, "non-finite example weight");
    if (item.weight == 0.0) continue;
    check_input(item.x);
    const double g = forward_trace(item.x, activations, &pre);
    // d/dg of w * loss(sign * g)
    delta.assign(1, item.weight * item.sign * loss_derivative(loss, item.sign * g));

    std::size_t offset = params_.size();
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      offset -= in * out + out;
      std::span<const double> input = l == 0 ? item.x : std::span<const double>(activations[l - 1]);
      double* gw = grad.data() + offset;
      double* gb = gw + in * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * input[i];
      }
      if (l == 0) break;
      const double* w = params_.data() + offset;
      next_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) next_delta[i] += d * row[i];
      }
      // Rectifier subgradient at 0 is 0.
      const Vector& z = pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) {
        if (!(z[i] > 0.0)) next_delta[i] = 0.0;
      }
      delta.swap(next_delta);
    }
  }
  if (weight_decay_ > 0.0) {
    for (std::size_t i = 0; i < params_.size(); ++i) grad[i] += weight_decay_ * params_[i];
  }
  return grad;
}

double Scorer::weighted_objective(std::span<const WeightedExample> batch, Loss loss) const {
  CompensatedSum acc;
  for (const WeightedExample& item : batch) {
    if (item.weight == 0.0) continue;
    acc.add(item.weight * loss_value(loss, item.sign * forward(item.x)));
  }
  if (weight_decay_ > 0.0) {
    double sq = 0.0;
    for (double p : params_) sq += p * p;
    acc.add(0.5 * weight_decay_ * sq);
  }
  return acc.value();
}

double gradient_check(const Scorer& scorer, std::span<const WeightedExample> batch, Loss loss, double step) {
  if (!(step > 0.0 && step <= 1e-2)) throw Error(ErrorKind::InvalidInput, "finite-difference step must lie in (0, 1e-2]");
  const Gradient analytic = scorer.backward_weighted(batch, loss);
  Scorer probe = scorer;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double original = probe.parameters()[i];
    probe.parameters()[i] = original + step;
    const double up = probe.weighted_objective(batch, loss);
    probe.parameters()[i] = original - step;
    const double down = probe.weighted_objective(batch, loss);
    probe.parameters()[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    // Floor keeps components that are zero on both sides from dividing 0 by 0.
    const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-6});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / scale);
  }
  return worst;
}

namespace {
constexpr const char* kCheckpointMagic = "pubn-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const Scorer& scorer, const Checkpoint& meta) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "kind " << to_string(scorer.kind()) << '\n';
  out << "widths";
  for (std::size_t w : scorer.widths()) out << ' ' << w;
  out << '\n';
  std::ostringstream wd;
  wd.precision(17);
  wd << scorer.weight_decay();
  out << "weight_decay " << wd.str() << '\n';
  for (const auto& [key, value] : meta.config) out << "config " << key << '=' << value << '\n';
  out << "parameters " << scorer.parameter_count() << '\n';
  const auto flags = out.flags();
  const auto precision = out.precision(17);
  for (double p : scorer.parameters()) out << p << '\n';
  out.precision(precision);
  out.flags(flags);
}

Scorer load_checkpoint(std::istream& in, Checkpoint* meta) {
  auto fail = [](const std::string& why) { return Error(ErrorKind::Parse, "checkpoint: " + why); };
  std::string line;
  if (!std::getline(in, line)) throw fail("missing header");
  {
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    header >> magic >> version;
    if (magic != kCheckpointMagic) throw fail("bad magic");
    if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));
  }
  std::string kind;
  std::vector<std::size_t> widths;
  double weight_decay = 0.0;
  std::size_t count = 0;
  Checkpoint parsed;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "kind") {
      fields >> kind;
    } else if (key == "widths") {
      std::size_t w;
      while (fields >> w) widths.push_back(w);
    } else if (key == "weight_decay") {
      fields >> weight_decay;
    } else if (key == "config") {
      std::string rest = line.substr(7);
      const auto eq = rest.find('=');
      if (eq == std::string::npos) throw fail("malformed config line");
      parsed.config.emplace_back(rest.substr(0, eq), rest.substr(eq + 1));
    } else if (key == "parameters") {
      fields >> count;
      break;
    } else {
      throw fail("unknown record '" + key + "'");
    }
  }
  if (widths.size() < 2) throw fail("missing architecture");
  Scorer scorer = [&] {
    if (kind == "linear") {
      if (widths.size() != 2) throw fail("linear scorer with hidden layers");
      return Scorer::linear(widths.front(), weight_decay);
    }
    if (kind == "mlp") {
      return Scorer::mlp(widths.front(), std::vector<std::size_t>(widths.begin() + 1, widths.end() - 1),
                         weight_decay);
    }
    throw fail("unknown scorer kind '" + kind + "'");
  }();
  if (count != scorer.parameter_count()) throw fail("parameter count mismatch");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> values[i])) throw fail("truncated parameter list");
  }
  scorer.set_parameters(values);
  if (meta) *meta = std::move(parsed);
  return scorer;
}

}  // namespace pubn
