#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "recorrupt/samplers.hpp"
#include "recorrupt/special.hpp"

using namespace recorrupt;

namespace {

struct Stats {
  double mean, var, n;
};

Stats stats(const Tensor& t) {
  double m = 0.0;
  for (double v : t.storage()) m += v;
  const double n = static_cast<double>(t.size());
  m /= n;
  double s = 0.0;
  for (double v : t.storage()) s += (v - m) * (v - m);
  return {m, s / (n - 1.0), n};
}

// Mean within 4 SE, and sample variance within 4 SE, with SE of the variance from the fourth central moment.
void check_moments(const DistSpec& spec, double mean, double var, double mu4, std::uint64_t seed) {
  RngStream rng(seed);
  const std::size_t n = 1000000;
  const Tensor t = sample(spec, Shape{n}, rng);
  const Stats s = stats(t);
  INFO(spec.describe());
  CHECK(std::abs(s.mean - mean) < 4.0 * std::sqrt(var / s.n) + 1e-15);
  const double var_se = std::sqrt(std::max(mu4 - var * var, 0.0) / s.n + 2.0 * var * var / (s.n * (s.n - 1.0)));
  CHECK(std::abs(s.var - var) < 4.0 * var_se + 1e-15);
}

} // namespace

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  const Tensor ta = sample(DistSpec::normal(0, 1), Shape{64}, a);
  const Tensor tb = sample(DistSpec::normal(0, 1), Shape{64}, b);
  const Tensor tc = sample(DistSpec::normal(0, 1), Shape{64}, c);
  CHECK(ta.storage() == tb.storage());
  CHECK(ta.storage() != tc.storage());
  RngStream p(1);
  CHECK(p.split(3).next_u64() == RngStream(1).split(3).next_u64());
  CHECK(p.split(3).next_u64() != p.split(4).next_u64());
}

TEST_CASE("split streams are uncorrelated") {
  RngStream root(5);
  RngStream a = root.split(0), b = root.split(1);
  const std::size_t n = 200000;
  double sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) sab += a.normal() * b.normal();
  CHECK(std::abs(sab / n) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("degenerate laws") {
  RngStream rng(1);
  auto all_equal = [&](const DistSpec& spec, double expected) {
    const Tensor t = sample(spec, Shape{1000}, rng);
    for (double v : t.storage()) CHECK(v == expected);
  };
  all_equal(DistSpec::binomial(5, 0.0), 0.0);
  all_equal(DistSpec::hypergeometric(10, 10, 4), 4.0);
  all_equal(DistSpec::binomial(7, 1.0), 7.0);
  all_equal(DistSpec::poisson(0.0), 0.0);
}

TEST_CASE("gamma(2, 3) sample mean") {
  RngStream rng(7);
  const Tensor t = sample(DistSpec::gamma(2.0, 3.0), Shape{1000000}, rng);
  const double se = std::sqrt(2.0 * 9.0 / 1e6);
  CHECK(std::abs(stats(t).mean - 6.0) < 4.0 * se);
}

TEST_CASE("first two moments of every family match textbook values") {
  // Fourth central moments give the SE of the sample variance.
  check_moments(DistSpec::normal(1.0, 2.0), 1.0, 4.0, 3.0 * 16.0, 1);
  check_moments(DistSpec::laplace(-0.5, 0.7), -0.5, 2 * 0.49, 24 * std::pow(0.7, 4), 2);
  check_moments(DistSpec::rademacher(), 0.0, 1.0, 1.0, 3);
  check_moments(DistSpec::bernoulli(0.3), 0.3, 0.21, 0.21 * (1 - 3 * 0.21), 4);
  for (double lambda : {0.5, 4.0, 9.5, 30.0, 400.0})
    check_moments(DistSpec::poisson(lambda), lambda, lambda, lambda * (1 + 3 * lambda), 5 + std::uint64_t(lambda));
  for (double k : {0.3, 1.0, 2.0, 17.0}) {
    const double th = 0.5;
    check_moments(DistSpec::gamma(k, th), k * th, k * th * th, 3 * k * (k + 2) * std::pow(th, 4), 11 + std::uint64_t(k * 10));
  }
  {
    const double a = 2.5, b = 1.5, m = a / (a + b), v = a * b / ((a + b) * (a + b) * (a + b + 1));
    // Beta fourth central moment via raw moments.
    auto raw = [&](int r) {
      double p = 1.0;
      for (int i = 0; i < r; ++i) p *= (a + i) / (a + b + i);
      return p;
    };
    const double mu4 = raw(4) - 4 * m * raw(3) + 6 * m * m * raw(2) - 3 * std::pow(m, 4);
    check_moments(DistSpec::beta(a, b), m, v, mu4, 31);
  }
  for (auto [n, p] : {std::pair{10, 0.3}, std::pair{64, 0.5}, std::pair{200, 0.2}, std::pair{5000, 0.01}}) {
    const double m = n * p, v = n * p * (1 - p);
    const double mu4 = v * (1 + 3 * (n - 2) * p * (1 - p));
    check_moments(DistSpec::binomial(n, p), m, v, mu4, 41 + std::uint64_t(n));
  }
  {
    const double N = 50, K = 20, n = 12;
    const double m = n * K / N, v = n * (K / N) * (1 - K / N) * (N - n) / (N - 1);
    // Loose fourth-moment proxy: the binomial one bounds the hypergeometric from above.
    const double p = K / N, mu4 = n * p * (1 - p) * (1 + 3 * (n - 2) * p * (1 - p));
    check_moments(DistSpec::hypergeometric(50, 20, 12), m, v, mu4, 51);
  }
}

TEST_CASE("hypergeometric support bounds") {
  RngStream rng(13);
  for (auto [N, K, n] : {std::tuple{10, 3, 8}, std::tuple{20, 15, 12}, std::tuple{7, 0, 5}, std::tuple{30, 30, 0}}) {
    const double lo = std::max(0, n - (N - K)), hi = std::min(K, n);
    const Tensor t = sample(DistSpec::hypergeometric(N, K, n), Shape{20000}, rng);
    for (double v : t.storage()) {
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
  }
}

TEST_CASE("invalid parameters throw domain errors naming the parameter") {
  RngStream rng;
  auto message = [&](const DistSpec& s) {
    try {
      sample(s, Shape{1}, rng);
    } catch (const std::domain_error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(DistSpec::normal(0, -1)).find("sigma") != std::string::npos);
  CHECK(message(DistSpec::poisson(-1)).find("lambda") != std::string::npos);
  CHECK(message(DistSpec::gamma(0, 1)).find("shape") != std::string::npos);
  CHECK(message(DistSpec::gamma(1, 0)).find("scale") != std::string::npos);
  CHECK(!message(DistSpec::beta(-1, 1)).empty());
  CHECK(message(DistSpec::binomial(5, 1.5)).find("p") != std::string::npos);
  CHECK(message(DistSpec::hypergeometric(5, 6, 2)).find("K") != std::string::npos);
  CHECK(message(DistSpec::hypergeometric(5, 2, 6)).find("n") != std::string::npos);
  CHECK(!message(DistSpec::bernoulli(-0.1)).empty());
  CHECK(message(DistSpec::laplace(0, 0)).find("b") != std::string::npos);
}

TEST_CASE("digamma and trigamma") {
  CHECK(std::abs(digamma(1.0) + 0.5772156649015329) < 1e-10);
  CHECK(std::abs(trigamma(1.0) - std::numbers::pi * std::numbers::pi / 6.0) < 1e-10);
  for (double x : {0.5, 2.0, 7.0}) CHECK(std::abs(digamma(x + 1) - digamma(x) - 1.0 / x) < 1e-10);
  for (double x : {1e-3, 0.1, 0.75, 3.3, 5.99, 6.01, 12.0, 250.0}) {
    CHECK(std::abs(digamma(x) - boost::math::digamma(x)) < 1e-10 * std::max(1.0, std::abs(boost::math::digamma(x))));
    CHECK(std::abs(trigamma(x) - boost::math::trigamma(x)) < 1e-10 * std::max(1.0, boost::math::trigamma(x)));
  }
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(trigamma(-1.0), std::domain_error);
}

TEST_CASE("moment_report") {
  RngStream rng(17);
  SUBCASE("standard normal second moment") {
    const auto m = moment_report(DistSpec::normal(0, 1), 200000, 4, rng);
    CHECK(std::abs(m[1].value - 1.0) < 4.0 * m[1].se);
    // Jackknife SE of the mean of X^2 is sqrt(Var X^2 / n) = sqrt(2 / n).
    CHECK(m[1].se == doctest::Approx(std::sqrt(2.0 / 200000)).epsilon(0.05));
  }
  SUBCASE("laplace fourth moment") {
    const double b = 1.0 / std::sqrt(2.0);
    const auto m = moment_report(DistSpec::laplace(0, b), 1000000, 4, rng);
    CHECK(std::abs(m[3].value - 24.0 * std::pow(b, 4)) < 4.0 * m[3].se);
  }
  SUBCASE("rademacher even moments are exactly one") {
    const auto m = moment_report(DistSpec::rademacher(), 1000, 8, rng);
    for (int k : {2, 4, 6, 8}) CHECK(m[k - 1].value == 1.0);
  }
  CHECK_THROWS(moment_report(DistSpec::normal(0, 1), 99, 2, rng));
  CHECK_THROWS(moment_report(DistSpec::normal(0, 1), 1000, 9, rng));
}
