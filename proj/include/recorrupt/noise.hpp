#pragma once

#include <functional>
#include <string>
#include <utility>

#include "recorrupt/rng.hpp"
#include "recorrupt/samplers.hpp"
#include "recorrupt/tensor.hpp"

namespace recorrupt {

enum class NoiseFamily {
  Gaussian,
  Laplace,
  LogGamma,
  CorrelatedGaussian,
  Poisson,
  Gamma,
  Binomial,
  BernoulliMask,
  PoissonGaussian,
};

/// Corruption law y | x. Intensities are in image units, x in [0, 1].
///
/// Fields used per family:
///   gaussian(sigma), laplace(b), log_gamma(ell, sigma), correlated_gaussian(sigma, kernel),
///   poisson(gamma), gamma(ell), binomial(n_trials), bernoulli_mask(p0), poisson_gaussian(gamma, sigma).
struct NoiseModel {
  NoiseFamily family = NoiseFamily::Gaussian;
  double sigma = 0.1;
  double b = 0.1;
  double ell = 1.0;
  double gamma = 0.1;
  int n_trials = 16;
  double p0 = 0.5;
  /// 2-D (kh, kw) kernel for the correlated family.
  Tensor kernel;

  static NoiseModel gaussian(double sigma);
  static NoiseModel laplace(double b);
  static NoiseModel log_gamma(double ell, double sigma);
  static NoiseModel correlated_gaussian(double sigma, Tensor kernel);
  static NoiseModel poisson(double gamma);
  static NoiseModel gamma_noise(double ell);
  static NoiseModel binomial(int n_trials);
  static NoiseModel bernoulli_mask(double p0);
  static NoiseModel poisson_gaussian(double gamma, double sigma);

  void validate() const;
  std::string name() const;
  /// y = x + eps with eps independent of x.
  bool additive() const;
  /// Pixel-wise i.i.d. additive noise, so a scalar pushforward exists.
  bool iid_additive() const;
  bool is_nef() const;
};

std::string family_name(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& name);

/// Normalized (unit-sum) 2-D Gaussian kernel of odd extent.
Tensor gaussian_kernel(std::size_t size, double std);

/// One corrupted observation of x.
Tensor corrupt(const Tensor& x, const NoiseModel& model, RngStream& rng);

/// Additive noise field with the shape of x (additive families only).
Tensor sample_additive_noise(const Shape& shape, const NoiseModel& model, RngStream& rng);
/// One scalar draw of the noise for the i.i.d. additive families.
double draw_additive_noise(const NoiseModel& model, RngStream& rng);

/// Per-pixel noise standard deviation scale of the log-gamma construction, sigma / sqrt(psi_1(ell)).
double log_gamma_scale(double ell, double sigma);
/// Bias psi(ell) - ln(ell) removed by the log-gamma construction.
double log_gamma_bias(double ell);

/// g(w) = F^{-1}(Phi(w)) for the i.i.d. additive families.
double oracle_map(const NoiseModel& model, double w);
/// g applied to a standard-normal field; the correlated family also convolves with its kernel.
Tensor oracle_noise(const NoiseModel& model, const Tensor& w);

/// E[y|x] and V[y|x] for a scalar x.
std::pair<double, double> model_mean_var(const NoiseModel& model, double x);

/// NEF components. Count families work in count units.
struct NefSpec {
  std::string family;
  std::function<double(double)> eta;
  std::function<double(double)> phi;
  std::function<double(double)> log_h;
};

NefSpec nef_components(const NoiseModel& model);

/// Integer counts underlying a public observation (poisson, binomial, poisson_gaussian).
Tensor to_counts(const Tensor& y, const NoiseModel& model);

} // namespace recorrupt
