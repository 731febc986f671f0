#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recorrupt/rng.hpp"
#include "recorrupt/tensor.hpp"

namespace recorrupt {

enum class DistFamily { Normal, Poisson, Gamma, Beta, Binomial, Hypergeometric, Bernoulli, Laplace, Rademacher };

/// A scalar law. Parameter slots by family:
///   normal(mu, sigma), poisson(lambda), gamma(shape, scale), beta(a, b),
///   binomial(n, p), hypergeometric(N, K, n), bernoulli(p), laplace(mu, b), rademacher.
struct DistSpec {
  DistFamily family = DistFamily::Normal;
  double p1 = 0.0;
  double p2 = 1.0;
  double p3 = 0.0;

  static DistSpec normal(double mu, double sigma) { return {DistFamily::Normal, mu, sigma, 0.0}; }
  static DistSpec poisson(double lambda) { return {DistFamily::Poisson, lambda, 0.0, 0.0}; }
  static DistSpec gamma(double shape, double scale) { return {DistFamily::Gamma, shape, scale, 0.0}; }
  static DistSpec beta(double a, double b) { return {DistFamily::Beta, a, b, 0.0}; }
  static DistSpec binomial(std::int64_t n, double p) { return {DistFamily::Binomial, double(n), p, 0.0}; }
  static DistSpec hypergeometric(std::int64_t N, std::int64_t K, std::int64_t n) {
    return {DistFamily::Hypergeometric, double(N), double(K), double(n)};
  }
  static DistSpec bernoulli(double p) { return {DistFamily::Bernoulli, p, 0.0, 0.0}; }
  static DistSpec laplace(double mu, double b) { return {DistFamily::Laplace, mu, b, 0.0}; }
  static DistSpec rademacher() { return {DistFamily::Rademacher, 0.0, 0.0, 0.0}; }

  /// Throws std::domain_error naming the offending parameter and its bound.
  void validate() const;
  std::string describe() const;

  double mean() const;
  double variance() const;
  /// E[X^k] where a closed form is implemented (normal, laplace, rademacher, bernoulli, gamma, poisson k <= 4).
  std::optional<double> raw_moment(int k) const;
  /// True when the law is symmetric about zero.
  bool centered_symmetric() const;
};

std::string family_name(DistFamily f);
/// Parses "normal", "laplace", ... (the names produced by family_name).
DistFamily parse_family(const std::string& name);

// Scalar variates. Discrete families return integer values.
double sample_normal(double mu, double sigma, RngStream& rng);
std::int64_t sample_poisson(double lambda, RngStream& rng);
double sample_gamma(double shape, double scale, RngStream& rng);
/// log of a Gamma(shape, 1) variate; stays finite for very small shapes.
double sample_log_gamma(double shape, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
std::int64_t sample_binomial(std::int64_t n, double p, RngStream& rng);
/// Number of successes among n draws without replacement from N items of which K are successes.
std::int64_t sample_hypergeometric(std::int64_t N, std::int64_t K, std::int64_t n, RngStream& rng);
double sample_laplace(double mu, double b, RngStream& rng);

double draw(const DistSpec& spec, RngStream& rng);
Tensor sample(const DistSpec& spec, const Shape& shape, RngStream& rng);

struct MomentEstimate {
  int order;
  double value;
  double se;
};

/// Empirical raw moments E[X^k], k = 1..max_order, with jackknife standard errors.
std::vector<MomentEstimate> moment_report(const DistSpec& spec, std::size_t n_samples, int max_order, RngStream& rng);

} // namespace recorrupt
