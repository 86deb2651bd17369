#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pubn/core.hpp"

namespace pubn {

// One latent category: an isotropic Gaussian N(mean, scale^2 I) belonging to
// class `label`. `weight` is p(z | y=label); for negative categories
// `labeled_weight` is p(z | y=-1, s=+1) and is ignored for positives.
struct Category {
  Vector mean;
  double scale = 1.0;
  int label = -1;
  double weight = 0.0;
  double labeled_weight = 0.0;
};

// Biased negatives arise from a latent prior change: p(x | z, y=-1) is shared
// by labeled and unlabeled negatives, only the category weights differ.
struct LatentMixtureSpec {
  std::size_t dim = 0;
  std::vector<Category> categories;
  double pi = 0.5;
  double rho = 0.0;

  // Throws InvalidSpec. Besides normalisation this checks that the labeled
  // negative mass never exceeds the negative mass of any category:
  // rho * labeled_weight <= (1 - pi) * weight.
  void validate() const;
  Priors priors() const { return Priors(pi, rho); }

  double density_positive(std::span<const double> x) const;  // p(x | y=+1)
  double density_negative(std::span<const double> x) const;  // p(x | y=-1)
  double density_biased(std::span<const double> x) const;    // p(x | y=-1, s=+1)
};

struct SplitSizes {
  std::size_t n_p = 0;
  std::size_t n_bn = 0;
  std::size_t n_u = 0;
  std::size_t n_p_val = 0;
  std::size_t n_bn_val = 0;
  std::size_t n_u_val = 0;
  std::size_t n_test = 0;
};

Dataset generate(const LatentMixtureSpec& spec, const SplitSizes& sizes, std::uint64_t seed);

// Fresh draws from single conditionals, for tests and oracles.
Sample draw_positive(const LatentMixtureSpec& spec, std::mt19937_64& rng);
Sample draw_negative(const LatentMixtureSpec& spec, std::mt19937_64& rng);
Sample draw_biased_negative(const LatentMixtureSpec& spec, std::mt19937_64& rng);
Sample draw_marginal(const LatentMixtureSpec& spec, std::mt19937_64& rng);

// sigma(x) = p(s=+1 | x) = [pi p_P(x) + rho p_bN(x)] / p(x).
double true_sigma(const LatentMixtureSpec& spec, std::span<const double> x);
// p(y=+1 | x).
double true_posterior(const LatentMixtureSpec& spec, std::span<const double> x);

// Finite joint distribution p(x, y, s) with p(s=+1 | x, y=+1) = 1 built in:
// every support point carries the three masses p(x, +1, +1), p(x, -1, +1)
// and p(x, -1, -1).
struct DiscreteSpec {
  std::vector<Vector> points;
  std::vector<double> mass_pos;
  std::vector<double> mass_neg_labeled;
  std::vector<double> mass_neg_unlabeled;

  void validate() const;
  std::size_t size() const noexcept { return points.size(); }
  double pi() const;
  double rho() const;
  double marginal(std::size_t i) const;
  double sigma(std::size_t i) const;      // p(s=+1 | x_i); 0 where p(x_i) = 0
  double posterior(std::size_t i) const;  // p(y=+1 | x_i)
};

// Inverse-CDF draws of support indices from the conditionals.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const DiscreteSpec& spec);

  std::size_t positive(std::mt19937_64& rng) const;
  std::size_t biased_negative(std::mt19937_64& rng) const;
  std::size_t marginal(std::mt19937_64& rng) const;

 private:
  static std::vector<double> cdf(std::span<const double> mass);
  static std::size_t invert(const std::vector<double>& cdf, std::mt19937_64& rng);

  std::vector<double> cdf_pos_;
  std::vector<double> cdf_bn_;
  std::vector<double> cdf_all_;
};

// CSV with header `split,latent,f1,...,fd`.
void write_csv(std::ostream& out, const Dataset& data);
Dataset read_csv(std::istream& in, const Priors& priors);
Dataset ingest_csv(const std::string& path, const Priors& priors);

}  // namespace pubn
