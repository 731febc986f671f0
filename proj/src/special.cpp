#include "recorrupt/special.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace recorrupt {

namespace {
void require_positive(const char* fn, double x) {
  if (!(x > 0.0)) throw std::domain_error(std::string(fn) + ": argument must be > 0 (got " + std::to_string(x) + ")");
}
} // namespace

double digamma(double x) {
  require_positive("digamma", x);
  double acc = 0.0;
  while (x <= 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Asymptotic series, Bernoulli terms through B_12.
  const double tail =
      r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12))))));
  return acc + std::log(x) - 0.5 / x - tail;
}

double trigamma(double x) {
  require_positive("trigamma", x);
  double acc = 0.0;
  while (x <= 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  const double tail =
      1.0 / x + r / 2 +
      r / x * (1.0 / 6 - r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * 7.0 / 6))))));
  return acc + tail;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double gamma_quantile(double shape, double p) {
  require_positive("gamma_quantile", shape);
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gamma_quantile: p must lie in (0, 1)");
  return boost::math::gamma_p_inv(shape, p);
}

double gamma_quantile_upper(double shape, double q) {
  require_positive("gamma_quantile_upper", shape);
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("gamma_quantile_upper: q must lie in (0, 1)");
  return boost::math::gamma_q_inv(shape, q);
}

} // namespace recorrupt
