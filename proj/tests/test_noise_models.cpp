#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

#include "recorrupt/noise.hpp"

using namespace recorrupt;

namespace {

struct Stats {
  double mean, var, m4;
};

Stats stats(const Tensor& t) {
  double m = 0.0;
  for (double v : t.storage()) m += v;
  m /= double(t.size());
  double s2 = 0.0, s4 = 0.0;
  for (double v : t.storage()) {
    const double d = (v - m) * (v - m);
    s2 += d;
    s4 += d * d;
  }
  return {m, s2 / double(t.size() - 1), s4 / double(t.size())};
}

} // namespace

TEST_CASE("gaussian with vanishing sigma leaves x unchanged") {
  RngStream rng(1);
  Tensor x(Shape{1, 1, 8, 8});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 + 0.8 * double(i) / double(x.size());
  const Tensor y = corrupt(x, NoiseModel::gaussian(1e-30), rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("log-gamma noise at ell = 1 is centred with the configured std") {
  RngStream rng(2);
  const NoiseModel m = NoiseModel::log_gamma(1.0, 0.1);
  const Tensor x(Shape{1000000}, 0.5);
  const Tensor y = corrupt(x, m, rng);
  const Stats s = stats(y - x);
  CHECK(std::abs(s.mean) < 4.0 * std::sqrt(s.var / 1e6));
  CHECK(std::abs(std::sqrt(s.var) - 0.1) < 0.002);
  // Construction constants: Var(ln z) = psi_1(1) = pi^2 / 6 and psi(1) - ln 1 = -gamma_EM.
  CHECK(log_gamma_scale(1.0, 0.1) == doctest::Approx(0.1 / std::sqrt(boost::math::trigamma(1.0))).epsilon(1e-12));
  CHECK(log_gamma_bias(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-10));
}

TEST_CASE("poisson(0.1) at x = 0.5") {
  RngStream rng(3);
  const Tensor x(Shape{1000000}, 0.5);
  const Tensor y = corrupt(x, NoiseModel::poisson(0.1), rng);
  const Stats s = stats(y);
  CHECK(std::abs(s.mean - 0.5) < 4.0 * std::sqrt(0.05 / 1e6));
  // Poisson(5) scaled by 0.1: fourth central moment 0.1^4 * 5 (1 + 3 * 5).
  const double mu4 = 1e-4 * 5.0 * 16.0;
  CHECK(std::abs(s.var - 0.05) < 4.0 * std::sqrt((mu4 - 0.05 * 0.05) / 1e6));
  for (double v : y.storage()) CHECK(std::abs(v / 0.1 - std::round(v / 0.1)) < 1e-9);
}

TEST_CASE("NEF components") {
  const NefSpec g = nef_components(NoiseModel::gaussian(1.0));
  CHECK(g.eta(2.0) == doctest::Approx(2.0));
  CHECK(g.phi(2.0) == doctest::Approx(2.0));
  CHECK(nef_components(NoiseModel::poisson(0.5)).phi(1.0) == doctest::Approx(2.0));
  CHECK(nef_components(NoiseModel::gamma_noise(3.0)).eta(1.5) == doctest::Approx(-2.0));
  CHECK_THROWS(nef_components(NoiseModel::laplace(0.1)));
  CHECK_THROWS(nef_components(NoiseModel::log_gamma(1.0, 0.1)));
}

TEST_CASE("phi' equals the count-unit mean times eta'") {
  const double h = 1e-5;
  for (const NoiseModel& m : {NoiseModel::gaussian(0.3), NoiseModel::poisson(0.2), NoiseModel::gamma_noise(2.5)}) {
    const NefSpec nef = nef_components(m);
    for (double x : {0.2, 0.4, 0.6, 0.8}) {
      const double dphi = (nef.phi(x + h) - nef.phi(x - h)) / (2 * h);
      const double deta = (nef.eta(x + h) - nef.eta(x - h)) / (2 * h);
      const double mean_counts = m.family == NoiseFamily::Poisson ? x / m.gamma : x;
      INFO(m.name() << " x=" << x);
      CHECK(dphi == doctest::Approx(mean_counts * deta).epsilon(1e-7));
    }
  }
}

TEST_CASE("model_mean_var examples") {
  auto pg = model_mean_var(NoiseModel::poisson_gaussian(0.05, 0.05), 0.4);
  CHECK(pg.first == doctest::Approx(0.4));
  CHECK(pg.second == doctest::Approx(0.0225));
  CHECK(model_mean_var(NoiseModel::gamma_noise(4.0), 1.0).second == doctest::Approx(0.25));
  CHECK(model_mean_var(NoiseModel::laplace(0.1 / std::sqrt(2.0)), 0.5).second == doctest::Approx(0.01));
}

TEST_CASE("every family matches its textbook mean and variance") {
  const std::size_t n = 1000000;
  // Textbook values, written out independently of model_mean_var.
  struct Case {
    NoiseModel model;
    double mean, var;
  };
  for (double x : {0.15, 0.5, 0.85}) {
    const double lg_sigma = 0.08;
    std::vector<Case> cases = {
        {NoiseModel::gaussian(0.1), x, 0.01},
        {NoiseModel::laplace(0.07), x, 2 * 0.07 * 0.07},
        {NoiseModel::log_gamma(2.0, lg_sigma), x, lg_sigma * lg_sigma},
        {NoiseModel::poisson(0.02), x, 0.02 * x},
        {NoiseModel::gamma_noise(5.0), x, x * x / 5.0},
        {NoiseModel::binomial(20), x, x * (1 - x) / 20.0},
        {NoiseModel::bernoulli_mask(0.7), 0.7 * x, 0.7 * 0.3 * x * x},
        {NoiseModel::poisson_gaussian(0.03, 0.05), x, 0.03 * x + 0.0025},
        {NoiseModel::correlated_gaussian(0.1, gaussian_kernel(3, 0.5)), x, 0.0},
    };
    {
      // Correlated field variance is sigma^2 * sum k^2.
      const Tensor k = gaussian_kernel(3, 0.5);
      double s = 0.0;
      for (double v : k.storage()) s += v * v;
      cases.back().var = 0.01 * s;
    }
    for (const Case& c : cases) {
      RngStream rng(std::hash<std::string>{}(c.model.name()) + std::uint64_t(x * 100));
      const Tensor xs(Shape{1000, 1000}, x);
      const Tensor y = corrupt(xs, c.model, rng);
      const Stats s = stats(y);
      INFO(c.model.name() << " x=" << x);
      // A unit-sum kernel leaves the long-run variance of the field at sigma^2.
      const double mean_var = c.model.family == NoiseFamily::CorrelatedGaussian ? 0.01 : c.var;
      CHECK(std::abs(s.mean - c.mean) < 4.0 * std::sqrt(mean_var / n));
      if (c.model.family != NoiseFamily::CorrelatedGaussian)
        CHECK(std::abs(s.var - c.var) < 4.0 * std::sqrt((s.m4 - s.var * s.var) / n));
      else
        CHECK(std::abs(s.var - c.var) < 0.02 * c.var);
      auto mv = model_mean_var(c.model, x);
      CHECK(mv.first == doctest::Approx(c.mean).epsilon(1e-12));
      CHECK(mv.second == doctest::Approx(c.var).epsilon(1e-12));
    }
  }
}

TEST_CASE("correlated lag-1 autocovariance") {
  const double sigma = 0.1;
  // 3x3 Gaussian kernel with std 0.5, normalized to unit sum.
  Tensor k(Shape{3, 3});
  double total = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      k[i * 3 + j] = std::exp(-((i - 1) * (i - 1) + (j - 1) * (j - 1)) / (2 * 0.25));
      total += k[i * 3 + j];
    }
  for (double& v : k.storage()) v /= total;
  const Tensor kernel = gaussian_kernel(3, 0.5);
  for (std::size_t i = 0; i < 9; ++i) CHECK(kernel[i] == doctest::Approx(k[i]).epsilon(1e-12));
  double lag1 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) lag1 += k[i * 3 + j] * k[i * 3 + j + 1];
  lag1 *= sigma * sigma;

  RngStream rng(4);
  const Tensor x(Shape{4, 1, 500, 500}, 0.5);
  const Tensor y = corrupt(x, NoiseModel::correlated_gaussian(sigma, k), rng);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t r = 0; r < 500; ++r)
      for (std::size_t c = 0; c + 1 < 500; ++c) {
        acc += (y.at(n, 0, r, c) - 0.5) * (y.at(n, 0, r, c + 1) - 0.5);
        ++count;
      }
  CHECK(std::abs(acc / double(count) - lag1) < 0.05 * lag1);
}

TEST_CASE("domain violations are reported with a pixel count") {
  RngStream rng;
  Tensor x(Shape{4}, std::vector<double>{0.5, 0.0, -0.1, 0.3});
  for (const NoiseModel& m : {NoiseModel::poisson(0.1), NoiseModel::gamma_noise(2.0), NoiseModel::binomial(4)}) {
    try {
      corrupt(x, m, rng);
      FAIL("expected throw for " << m.name());
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
  Tensor one(Shape{2}, std::vector<double>{0.5, 1.0});
  CHECK_THROWS(corrupt(one, NoiseModel::binomial(4), rng));
  CHECK_THROWS(NoiseModel::gaussian(0.0).validate());
  CHECK_THROWS(NoiseModel::bernoulli_mask(1.0).validate());
  CHECK_THROWS(NoiseModel::binomial(0).validate());
  CHECK_THROWS(NoiseModel::correlated_gaussian(0.1, Tensor(Shape{2, 2}, 0.25)).validate());
}

TEST_CASE("oracle map of the gaussian family is sigma w") {
  const NoiseModel m = NoiseModel::gaussian(0.2);
  for (double w : {-2.0, -0.5, 0.0, 1.3}) CHECK(oracle_map(m, w) == doctest::Approx(0.2 * w).epsilon(1e-10));
  // Laplace: inverse CDF of Phi(w), written out.
  const double b = 0.1;
  const NoiseModel l = NoiseModel::laplace(b);
  for (double w : {-1.5, 0.3, 2.0}) {
    const double u = 0.5 * std::erfc(-w / std::sqrt(2.0));
    const double ref = u < 0.5 ? b * std::log(2 * u) : -b * std::log(2 * (1 - u));
    CHECK(oracle_map(l, w) == doctest::Approx(ref).epsilon(1e-10));
  }
}
