#include "recorrupt/samplers.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace recorrupt {

namespace {

[[noreturn]] void bad_param(const char* family, const char* param, const char* bound, double got) {
  std::ostringstream os;
  os << family << ": parameter " << param << " must be " << bound << " (got " << got << ")";
  throw std::domain_error(os.str());
}

bool is_count(double v) { return v >= 0.0 && std::floor(v) == v && v < 9.0e15; }

double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

// Stirling numbers of the second kind S(k, j), k, j <= 8.
const std::array<std::array<double, 9>, 9>& stirling2() {
  static const auto table = [] {
    std::array<std::array<double, 9>, 9> s{};
    s[0][0] = 1.0;
    for (int k = 1; k <= 8; ++k)
      for (int j = 1; j <= k; ++j) s[k][j] = j * s[k - 1][j] + s[k - 1][j - 1];
    return s;
  }();
  return table;
}

double falling(double x, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= x - i;
  return r;
}

std::int64_t poisson_inversion(double lambda, RngStream& rng) {
  for (;;) {
    double u = rng.uniform();
    double p = std::exp(-lambda);
    std::int64_t k = 0;
    while (u > p) {
      u -= p;
      ++k;
      p *= lambda / static_cast<double>(k);
      if (p == 0.0) break;
    }
    if (p > 0.0 || u <= 0.0) return k;
  }
}

// Hormann's PTRS transformed rejection.
std::int64_t poisson_ptrs(double lambda, RngStream& rng) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <= -lambda + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

double gamma_mt(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::int64_t binomial_inversion(std::int64_t n, double p, RngStream& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double p0 = std::exp(static_cast<double>(n) * std::log1p(-p));
  for (;;) {
    double u = rng.uniform();
    double pk = p0;
    std::int64_t k = 0;
    while (u > pk && k < n) {
      u -= pk;
      ++k;
      pk *= s * static_cast<double>(n - k + 1) / static_cast<double>(k);
    }
    if (u <= pk) return k;
  }
}

// Hormann's BTRS transformed rejection, p <= 0.5.
std::int64_t binomial_btrs(std::int64_t n, double p, RngStream& rng) {
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double vr = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > nd) continue;
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    v = std::log(v * alpha / (a / (us * us) + b));
    if (v <= h - std::lgamma(k + 1.0) - std::lgamma(nd - k + 1.0) + (k - m) * lpq) return static_cast<std::int64_t>(k);
  }
}

} // namespace

std::string family_name(DistFamily f) {
  switch (f) {
  case DistFamily::Normal: return "normal";
  case DistFamily::Poisson: return "poisson";
  case DistFamily::Gamma: return "gamma";
  case DistFamily::Beta: return "beta";
  case DistFamily::Binomial: return "binomial";
  case DistFamily::Hypergeometric: return "hypergeometric";
  case DistFamily::Bernoulli: return "bernoulli";
  case DistFamily::Laplace: return "laplace";
  case DistFamily::Rademacher: return "rademacher";
  }
  return "unknown";
}

DistFamily parse_family(const std::string& name) {
  for (DistFamily f : {DistFamily::Normal, DistFamily::Poisson, DistFamily::Gamma, DistFamily::Beta, DistFamily::Binomial,
                       DistFamily::Hypergeometric, DistFamily::Bernoulli, DistFamily::Laplace, DistFamily::Rademacher}) {
    if (family_name(f) == name) return f;
  }
  if (name == "gaussian") return DistFamily::Normal;
  throw std::invalid_argument("unknown distribution family '" + name + "'");
}

void DistSpec::validate() const {
  switch (family) {
  case DistFamily::Normal:
    if (!std::isfinite(p1)) bad_param("normal", "mu", "finite", p1);
    if (!(p2 > 0.0)) bad_param("normal", "sigma", "> 0", p2);
    break;
  case DistFamily::Poisson:
    if (!(p1 >= 0.0) || !std::isfinite(p1)) bad_param("poisson", "lambda", ">= 0", p1);
    break;
  case DistFamily::Gamma:
    if (!(p1 > 0.0)) bad_param("gamma", "shape", "> 0", p1);
    if (!(p2 > 0.0)) bad_param("gamma", "scale", "> 0", p2);
    break;
  case DistFamily::Beta:
    if (!(p1 > 0.0)) bad_param("beta", "a", "> 0", p1);
    if (!(p2 > 0.0)) bad_param("beta", "b", "> 0", p2);
    break;
  case DistFamily::Binomial:
    if (!is_count(p1)) bad_param("binomial", "n", "a non-negative integer", p1);
    if (!(p2 >= 0.0 && p2 <= 1.0)) bad_param("binomial", "p", "in [0, 1]", p2);
    break;
  case DistFamily::Hypergeometric:
    if (!is_count(p1)) bad_param("hypergeometric", "N", "a non-negative integer", p1);
    if (!is_count(p2) || p2 > p1) bad_param("hypergeometric", "K", "an integer in [0, N]", p2);
    if (!is_count(p3) || p3 > p1) bad_param("hypergeometric", "n", "an integer in [0, N]", p3);
    break;
  case DistFamily::Bernoulli:
    if (!(p1 >= 0.0 && p1 <= 1.0)) bad_param("bernoulli", "p", "in [0, 1]", p1);
    break;
  case DistFamily::Laplace:
    if (!std::isfinite(p1)) bad_param("laplace", "mu", "finite", p1);
    if (!(p2 > 0.0)) bad_param("laplace", "b", "> 0", p2);
    break;
  case DistFamily::Rademacher: break;
  }
}

std::string DistSpec::describe() const {
  std::ostringstream os;
  os << family_name(family);
  switch (family) {
  case DistFamily::Normal: os << "(mu=" << p1 << ",sigma=" << p2 << ")"; break;
  case DistFamily::Poisson: os << "(lambda=" << p1 << ")"; break;
  case DistFamily::Gamma: os << "(shape=" << p1 << ",scale=" << p2 << ")"; break;
  case DistFamily::Beta: os << "(a=" << p1 << ",b=" << p2 << ")"; break;
  case DistFamily::Binomial: os << "(n=" << p1 << ",p=" << p2 << ")"; break;
  case DistFamily::Hypergeometric: os << "(N=" << p1 << ",K=" << p2 << ",n=" << p3 << ")"; break;
  case DistFamily::Bernoulli: os << "(p=" << p1 << ")"; break;
  case DistFamily::Laplace: os << "(mu=" << p1 << ",b=" << p2 << ")"; break;
  case DistFamily::Rademacher: break;
  }
  return os.str();
}

double DistSpec::mean() const { return *raw_moment(1); }

double DistSpec::variance() const {
  const double m1 = *raw_moment(1);
  return *raw_moment(2) - m1 * m1;
}

std::optional<double> DistSpec::raw_moment(int k) const {
  validate();
  if (k < 0 || k > 8) return std::nullopt;
  if (k == 0) return 1.0;
  const auto& S = stirling2();
  switch (family) {
  case DistFamily::Normal: {
    double m2 = 1.0, m1 = p1;
    for (int j = 2; j <= k; ++j) {
      const double m = p1 * m1 + (j - 1) * p2 * p2 * m2;
      m2 = m1;
      m1 = m;
    }
    return m1;
  }
  case DistFamily::Laplace: {
    double acc = 0.0, fact = 1.0, binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      if (j > 0) {
        fact *= j;
        binom = binom * (k - j + 1) / j;
      }
      if (j % 2 == 0) acc += binom * std::pow(p1, k - j) * fact * std::pow(p2, j);
    }
    return acc;
  }
  case DistFamily::Rademacher: return k % 2 == 0 ? 1.0 : 0.0;
  case DistFamily::Bernoulli: return p1;
  case DistFamily::Gamma: {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= (p1 + i) * p2;
    return r;
  }
  case DistFamily::Beta: {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= (p1 + i) / (p1 + p2 + i);
    return r;
  }
  case DistFamily::Poisson: {
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) acc += S[k][j] * std::pow(p1, j);
    return acc;
  }
  case DistFamily::Binomial: {
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) acc += S[k][j] * falling(p1, j) * std::pow(p2, j);
    return acc;
  }
  case DistFamily::Hypergeometric: {
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) {
      const double denom = falling(p1, j);
      if (denom != 0.0) acc += S[k][j] * falling(p3, j) * falling(p2, j) / denom;
    }
    return acc;
  }
  }
  return std::nullopt;
}

bool DistSpec::centered_symmetric() const {
  switch (family) {
  case DistFamily::Normal:
  case DistFamily::Laplace: return p1 == 0.0;
  case DistFamily::Rademacher: return true;
  default: return false;
  }
}

double sample_normal(double mu, double sigma, RngStream& rng) { return mu + sigma * rng.normal(); }

std::int64_t sample_poisson(double lambda, RngStream& rng) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad_param("poisson", "lambda", ">= 0", lambda);
  if (lambda == 0.0) return 0;
  return lambda < 10.0 ? poisson_inversion(lambda, rng) : poisson_ptrs(lambda, rng);
}

double sample_log_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0)) bad_param("gamma", "shape", "> 0", shape);
  if (shape >= 1.0) return std::log(gamma_mt(shape, rng));
  const double g = gamma_mt(shape + 1.0, rng);
  return std::log(g) + std::log(rng.uniform()) / shape;
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(scale > 0.0)) bad_param("gamma", "scale", "> 0", scale);
  if (!(shape > 0.0)) bad_param("gamma", "shape", "> 0", shape);
  if (shape >= 1.0) return scale * gamma_mt(shape, rng);
  return scale * std::exp(sample_log_gamma(shape, rng));
}

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0)) bad_param("beta", "a", "> 0", a);
  if (!(b > 0.0)) bad_param("beta", "b", "> 0", b);
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  return 1.0 / (1.0 + std::exp(lb - la));
}

std::int64_t sample_binomial(std::int64_t n, double p, RngStream& rng) {
  if (n < 0) bad_param("binomial", "n", ">= 0", double(n));
  if (!(p >= 0.0 && p <= 1.0)) bad_param("binomial", "p", "in [0, 1]", p);
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  const std::int64_t k =
      (n <= 64 || static_cast<double>(n) * pp < 10.0) ? binomial_inversion(n, pp, rng) : binomial_btrs(n, pp, rng);
  return flip ? n - k : k;
}

std::int64_t sample_hypergeometric(std::int64_t N, std::int64_t K, std::int64_t n, RngStream& rng) {
  if (N < 0) bad_param("hypergeometric", "N", ">= 0", double(N));
  if (K < 0 || K > N) bad_param("hypergeometric", "K", "in [0, N]", double(K));
  if (n < 0 || n > N) bad_param("hypergeometric", "n", "in [0, N]", double(n));
  const std::int64_t lo = std::max<std::int64_t>(0, n - (N - K));
  const std::int64_t hi = std::min(K, n);
  if (lo == hi) return lo;
  const double p_lo = std::exp(log_choose(double(K), double(lo)) + log_choose(double(N - K), double(n - lo)) -
                               log_choose(double(N), double(n)));
  for (;;) {
    double u = rng.uniform();
    double pk = p_lo;
    std::int64_t k = lo;
    while (u > pk && k < hi) {
      u -= pk;
      pk *= static_cast<double>(K - k) * static_cast<double>(n - k) /
            (static_cast<double>(k + 1) * static_cast<double>(N - K - n + k + 1));
      ++k;
    }
    if (u <= pk) return k;
  }
}

double sample_laplace(double mu, double b, RngStream& rng) {
  if (!(b > 0.0)) bad_param("laplace", "b", "> 0", b);
  const double u = rng.uniform() - 0.5;
  return u < 0.0 ? mu + b * std::log1p(2.0 * u) : mu - b * std::log1p(-2.0 * u);
}

double draw(const DistSpec& s, RngStream& rng) {
  switch (s.family) {
  case DistFamily::Normal: return sample_normal(s.p1, s.p2, rng);
  case DistFamily::Poisson: return double(sample_poisson(s.p1, rng));
  case DistFamily::Gamma: return sample_gamma(s.p1, s.p2, rng);
  case DistFamily::Beta: return sample_beta(s.p1, s.p2, rng);
  case DistFamily::Binomial: return double(sample_binomial(std::int64_t(s.p1), s.p2, rng));
  case DistFamily::Hypergeometric:
    return double(sample_hypergeometric(std::int64_t(s.p1), std::int64_t(s.p2), std::int64_t(s.p3), rng));
  case DistFamily::Bernoulli: return rng.uniform() < s.p1 ? 1.0 : 0.0;
  case DistFamily::Laplace: return sample_laplace(s.p1, s.p2, rng);
  case DistFamily::Rademacher: return (rng.next_u64() >> 63) ? 1.0 : -1.0;
  }
  return 0.0;
}

Tensor sample(const DistSpec& spec, const Shape& shape, RngStream& rng) {
  spec.validate();
  Tensor out(shape);
  for (double& v : out.storage()) v = draw(spec, rng);
  return out;
}

std::vector<MomentEstimate> moment_report(const DistSpec& spec, std::size_t n_samples, int max_order, RngStream& rng) {
  if (n_samples < 100) throw std::invalid_argument("moment_report: need at least 100 samples");
  if (max_order < 1 || max_order > 8) throw std::invalid_argument("moment_report: max_order must lie in [1, 8]");
  spec.validate();
  std::vector<double> xs(n_samples);
  for (double& x : xs) x = draw(spec, rng);
  const double n = static_cast<double>(n_samples);
  std::vector<MomentEstimate> out;
  for (int k = 1; k <= max_order; ++k) {
    double s = 0.0;
    for (double x : xs) s += std::pow(x, k);
    const double m = s / n;
    // Jackknife over leave-one-out means; each deviates from m by (m - x^k)/(n - 1).
    double ss = 0.0;
    for (double x : xs) {
      const double d = (m - std::pow(x, k)) / (n - 1.0);
      ss += d * d;
    }
    out.push_back({k, m, std::sqrt((n - 1.0) / n * ss)});
  }
  return out;
}

} // namespace recorrupt
