#include "pubn/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace pubn {

namespace {

constexpr double kTolerance = 1e-9;

double log_gaussian(std::span<const double> x, const Category& c) {
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - c.mean[i];
    sq += d * d;
  }
  const double var = c.scale * c.scale;
  return -0.5 * sq / var - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var);
}

// log sum_k exp(a_k); -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

enum class Component { Positive, Negative, Biased };

// log of the class-conditional mixture density.
double log_density(const LatentMixtureSpec& spec, std::span<const double> x, Component which) {
  if (x.size() != spec.dim) throw Error(ErrorKind::InvalidInput, "point dimension differs from the spec");
  std::vector<double> terms;
  for (const Category& c : spec.categories) {
    double w = 0.0;
    if (which == Component::Positive && c.label == +1) w = c.weight;
    if (which == Component::Negative && c.label == -1) w = c.weight;
    if (which == Component::Biased && c.label == -1) w = c.labeled_weight;
    if (w > 0.0) terms.push_back(std::log(w) + log_gaussian(x, c));
  }
  return log_sum_exp(terms);
}

std::size_t pick_category(const LatentMixtureSpec& spec, Component which, std::mt19937_64& rng) {
  std::vector<double> w(spec.categories.size(), 0.0);
  for (std::size_t k = 0; k < spec.categories.size(); ++k) {
    const Category& c = spec.categories[k];
    if (which == Component::Positive && c.label == +1) w[k] = c.weight;
    if (which != Component::Positive && c.label == -1) w[k] = which == Component::Biased ? c.labeled_weight : c.weight;
  }
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return dist(rng);
}

Sample draw(const LatentMixtureSpec& spec, Component which, std::mt19937_64& rng) {
  const std::size_t k = pick_category(spec, which, rng);
  const Category& c = spec.categories[k];
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.features.resize(spec.dim);
  for (std::size_t i = 0; i < spec.dim; ++i) s.features[i] = c.mean[i] + c.scale * normal(rng);
  s.latent = static_cast<int>(k);
  return s;
}

}  // namespace

void LatentMixtureSpec::validate() const {
  auto fail = [](const std::string& why) { return Error(ErrorKind::InvalidSpec, why); };
  if (dim == 0) throw fail("dimension must be positive");
  if (!(pi > 0.0 && pi < 1.0)) throw fail("pi must lie in (0, 1)");
  if (!(rho >= 0.0 && pi + rho < 1.0)) throw fail("rho must satisfy 0 <= rho < 1 - pi");
  double pos = 0.0, neg = 0.0, lab = 0.0;
  for (const Category& c : categories) {
    if (c.mean.size() != dim) throw fail("category mean has the wrong dimension");
    if (!(c.scale > 0.0)) throw fail("category scale must be positive");
    if (c.label != 1 && c.label != -1) throw fail("category label must be +1 or -1");
    if (!(c.weight >= 0.0) || !(c.labeled_weight >= 0.0)) throw fail("category weights must be nonnegative");
    if (c.label == 1) {
      pos += c.weight;
    } else {
      neg += c.weight;
      lab += c.labeled_weight;
      if (rho * c.labeled_weight > (1.0 - pi) * c.weight + kTolerance) {
        throw fail("labeled negative mass exceeds the negative mass of a category");
      }
    }
  }
  if (std::fabs(pos - 1.0) > kTolerance) throw fail("p(z | y=+1) does not sum to 1");
  if (std::fabs(neg - 1.0) > kTolerance) throw fail("p(z | y=-1) does not sum to 1");
  if (rho > 0.0 && std::fabs(lab - 1.0) > kTolerance) throw fail("p(z | y=-1, s=+1) does not sum to 1");
}

double LatentMixtureSpec::density_positive(std::span<const double> x) const {
  return std::exp(log_density(*this, x, Component::Positive));
}
double LatentMixtureSpec::density_negative(std::span<const double> x) const {
  return std::exp(log_density(*this, x, Component::Negative));
}
double LatentMixtureSpec::density_biased(std::span<const double> x) const {
  return std::exp(log_density(*this, x, Component::Biased));
}

Sample draw_positive(const LatentMixtureSpec& spec, std::mt19937_64& rng) {
  Sample s = draw(spec, Component::Positive, rng);
  s.label = +1;
  return s;
}

Sample draw_negative(const LatentMixtureSpec& spec, std::mt19937_64& rng) {
  Sample s = draw(spec, Component::Negative, rng);
  s.label = -1;
  return s;
}

Sample draw_biased_negative(const LatentMixtureSpec& spec, std::mt19937_64& rng) {
  Sample s = draw(spec, Component::Biased, rng);
  s.label = -1;
  return s;
}

Sample draw_marginal(const LatentMixtureSpec& spec, std::mt19937_64& rng) {
  std::bernoulli_distribution positive(spec.pi);
  return positive(rng) ? draw_positive(spec, rng) : draw_negative(spec, rng);
}

Dataset generate(const LatentMixtureSpec& spec, const SplitSizes& sizes, std::uint64_t seed) {
  spec.validate();
  if ((sizes.n_bn > 0 || sizes.n_bn_val > 0) && spec.rho == 0.0) {
    throw Error(ErrorKind::InvalidSpec, "bN samples requested but rho = 0");
  }
  std::mt19937_64 rng(seed);
  Dataset data;
  data.dim = spec.dim;
  data.priors = spec.priors();
  auto fill = [&](SampleList& out, std::size_t n, auto&& drawer, bool keep_label) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Sample s = drawer(spec, rng);
      if (!keep_label) s.label.reset();
      out.push_back(std::move(s));
    }
  };
  fill(data.train.p, sizes.n_p, draw_positive, true);
  fill(data.train.bn, sizes.n_bn, draw_biased_negative, true);
  fill(data.train.u, sizes.n_u, draw_marginal, false);
  fill(data.valid.p, sizes.n_p_val, draw_positive, true);
  fill(data.valid.bn, sizes.n_bn_val, draw_biased_negative, true);
  fill(data.valid.u, sizes.n_u_val, draw_marginal, false);
  fill(data.test, sizes.n_test, draw_marginal, true);
  return data;
}

double true_sigma(const LatentMixtureSpec& spec, std::span<const double> x) {
  const double lp = std::log(spec.pi) + log_density(spec, x, Component::Positive);
  const double ln = std::log(1.0 - spec.pi) + log_density(spec, x, Component::Negative);
  const double lb = spec.rho > 0.0 ? std::log(spec.rho) + log_density(spec, x, Component::Biased)
                                   : -std::numeric_limits<double>::infinity();
  const double total = log_sum_exp({lp, ln});
  if (!std::isfinite(total)) return 0.0;
  const double labeled = log_sum_exp({lp, lb});
  return std::clamp(std::exp(labeled - total), 0.0, 1.0);
}

double true_posterior(const LatentMixtureSpec& spec, std::span<const double> x) {
  const double lp = std::log(spec.pi) + log_density(spec, x, Component::Positive);
  const double ln = std::log(1.0 - spec.pi) + log_density(spec, x, Component::Negative);
  const double total = log_sum_exp({lp, ln});
  if (!std::isfinite(total)) return 0.0;
  return std::clamp(std::exp(lp - total), 0.0, 1.0);
}

void DiscreteSpec::validate() const {
  auto fail = [](const std::string& why) { return Error(ErrorKind::InvalidSpec, why); };
  const std::size_t n = points.size();
  if (n == 0) throw fail("discrete spec has no support points");
  if (mass_pos.size() != n || mass_neg_labeled.size() != n || mass_neg_unlabeled.size() != n) {
    throw fail("mass vectors must match the support size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != points.front().size()) throw fail("support points differ in dimension");
    for (double m : {mass_pos[i], mass_neg_labeled[i], mass_neg_unlabeled[i]}) {
      if (!(m >= 0.0)) throw fail("masses must be nonnegative");
      total += m;
    }
  }
  if (std::fabs(total - 1.0) > kTolerance) throw fail("masses do not sum to 1");
  if (!(pi() > 0.0 && pi() < 1.0)) throw fail("positive mass must lie in (0, 1)");
}

double DiscreteSpec::pi() const {
  CompensatedSum s;
  for (double m : mass_pos) s.add(m);
  return s.value();
}

double DiscreteSpec::rho() const {
  CompensatedSum s;
  for (double m : mass_neg_labeled) s.add(m);
  return s.value();
}

double DiscreteSpec::marginal(std::size_t i) const {
  return mass_pos[i] + mass_neg_labeled[i] + mass_neg_unlabeled[i];
}

double DiscreteSpec::sigma(std::size_t i) const {
  const double p = marginal(i);
  return p > 0.0 ? (mass_pos[i] + mass_neg_labeled[i]) / p : 0.0;
}

double DiscreteSpec::posterior(std::size_t i) const {
  const double p = marginal(i);
  return p > 0.0 ? mass_pos[i] / p : 0.0;
}

DiscreteSampler::DiscreteSampler(const DiscreteSpec& spec) {
  spec.validate();
  cdf_pos_ = cdf(spec.mass_pos);
  cdf_bn_ = cdf(spec.mass_neg_labeled);
  std::vector<double> all(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) all[i] = spec.marginal(i);
  cdf_all_ = cdf(all);
}

std::vector<double> DiscreteSampler::cdf(std::span<const double> mass) {
  std::vector<double> c(mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    c[i] = acc;
  }
  if (acc > 0.0) {
    for (double& v : c) v /= acc;
  }
  return c;
}

std::size_t DiscreteSampler::invert(const std::vector<double>& cdf, std::mt19937_64& rng) {
  if (cdf.empty() || !(cdf.back() > 0.0)) throw Error(ErrorKind::InvalidSpec, "sampling from a zero-mass conditional");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  auto idx = static_cast<std::size_t>(it - cdf.begin());
  // Skip zero-mass points that share a cdf value with their predecessor.
  while (idx > 0 && cdf[idx] == cdf[idx - 1]) --idx;
  return idx;
}

std::size_t DiscreteSampler::positive(std::mt19937_64& rng) const { return invert(cdf_pos_, rng); }
std::size_t DiscreteSampler::biased_negative(std::mt19937_64& rng) const { return invert(cdf_bn_, rng); }
std::size_t DiscreteSampler::marginal(std::mt19937_64& rng) const { return invert(cdf_all_, rng); }

namespace {

void format_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void write_rows(std::ostream& out, const SampleList& list, const char* tag) {
  std::string line;
  for (const Sample& s : list) {
    line = tag;
    line += ',';
    if (s.latent) line += std::to_string(*s.latent);
    for (double v : s.features) {
      line += ',';
      format_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data) {
  out << "split,latent";
  for (std::size_t i = 1; i <= data.dim; ++i) out << ",f" << i;
  out << '\n';
  write_rows(out, data.train.p, "P");
  write_rows(out, data.train.bn, "bN");
  write_rows(out, data.train.u, "U");
  write_rows(out, data.valid.p, "P_val");
  write_rows(out, data.valid.bn, "bN_val");
  write_rows(out, data.valid.u, "U_val");
  for (const Sample& s : data.test) {
    write_rows(out, SampleList{s}, s.label.value_or(-1) == 1 ? "test_pos" : "test_neg");
  }
}

Dataset read_csv(std::istream& in, const Priors& priors) {
  auto fail = [](std::size_t row, const std::string& why) {
    return Error(ErrorKind::Parse, "row " + std::to_string(row) + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "split" || header[1] != "latent") {
    throw fail(1, "header must be split,latent,f1,...,fd");
  }
  Dataset data;
  data.priors = priors;
  data.dim = header.size() - 2;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw fail(row, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    if (!fields[1].empty()) {
      int latent = 0;
      const auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), latent);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) throw fail(row, "latent is not an integer");
      s.latent = latent;
    }
    s.features.resize(data.dim);
    for (std::size_t i = 0; i < data.dim; ++i) {
      std::string_view f = fields[i + 2];
      if (!f.empty() && f.front() == '+') f.remove_prefix(1);
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), s.features[i]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(s.features[i])) {
        throw fail(row, "feature f" + std::to_string(i + 1) + " is not a finite number");
      }
    }
    const std::string_view tag = fields[0];
    if (tag == "P") {
      s.label = 1;
      data.train.p.push_back(std::move(s));
    } else if (tag == "bN") {
      s.label = -1;
      data.train.bn.push_back(std::move(s));
    } else if (tag == "U") {
      data.train.u.push_back(std::move(s));
    } else if (tag == "P_val") {
      s.label = 1;
      data.valid.p.push_back(std::move(s));
    } else if (tag == "bN_val") {
      s.label = -1;
      data.valid.bn.push_back(std::move(s));
    } else if (tag == "U_val") {
      data.valid.u.push_back(std::move(s));
    } else if (tag == "test_pos") {
      s.label = 1;
      data.test.push_back(std::move(s));
    } else if (tag == "test_neg") {
      s.label = -1;
      data.test.push_back(std::move(s));
    } else {
      throw fail(row, "unknown split tag '" + std::string(tag) + "'");
    }
  }
  return data;
}

Dataset ingest_csv(const std::string& path, const Priors& priors) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open " + path);
  return read_csv(in, priors);
}

}  // namespace pubn
