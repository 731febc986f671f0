#include "recorrupt/noise.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/special.hpp"

namespace recorrupt {

namespace {

[[noreturn]] void bad_model(const std::string& what) { throw std::domain_error("noise model: " + what); }

struct Planes {
  std::size_t count, h, w;
};

Planes planes_of(const Shape& s) {
  if (s.size() < 2) throw std::invalid_argument("correlated noise needs at least a 2-D image, got " + to_string(s));
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  return {numel(s) / (h * w), h, w};
}

// Stationary correlated field: z drawn on the padded domain, valid convolution with k.
Tensor correlated_field(const Shape& shape, const Tensor& k, double sigma, RngStream& rng) {
  const Planes p = planes_of(shape);
  const std::size_t kh = k.dim(0), kw = k.dim(1);
  const std::size_t ph = p.h + kh - 1, pw = p.w + kw - 1;
  Tensor out(shape);
  std::vector<double> z(ph * pw);
  for (std::size_t c = 0; c < p.count; ++c) {
    for (double& v : z) v = sigma * rng.normal();
    double* o = out.data().data() + c * p.h * p.w;
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        const double kv = k[(kh - 1 - i) * kw + (kw - 1 - j)];
        for (std::size_t y = 0; y < p.h; ++y) {
          const double* zr = z.data() + (y + i) * pw + j;
          double* orow = o + y * p.w;
          for (std::size_t x = 0; x < p.w; ++x) orow[x] += kv * zr[x];
        }
      }
  }
  return out;
}

std::size_t count_if_not(const Tensor& x, bool (*ok)(double)) {
  std::size_t bad = 0;
  for (double v : x.storage())
    if (!ok(v)) ++bad;
  return bad;
}

void require_domain(const Tensor& x, const NoiseModel& m) {
  std::size_t bad = count_if_not(x, [](double v) { return std::isfinite(v); });
  if (bad) bad_model(std::to_string(bad) + " non-finite pixel(s) in clean image");
  switch (m.family) {
  case NoiseFamily::Poisson:
  case NoiseFamily::Gamma: bad = count_if_not(x, [](double v) { return v > 0.0; }); break;
  case NoiseFamily::Binomial: bad = count_if_not(x, [](double v) { return v > 0.0 && v < 1.0; }); break;
  case NoiseFamily::PoissonGaussian: bad = count_if_not(x, [](double v) { return v >= 0.0; }); break;
  default: break;
  }
  if (bad) bad_model(std::to_string(bad) + " pixel(s) outside the domain of " + m.name());
}

} // namespace

NoiseModel NoiseModel::gaussian(double sigma) {
  NoiseModel m;
  m.family = NoiseFamily::Gaussian;
  m.sigma = sigma;
  return m;
}

NoiseModel NoiseModel::laplace(double b) {
  NoiseModel m;
  m.family = NoiseFamily::Laplace;
  m.b = b;
  return m;
}

NoiseModel NoiseModel::log_gamma(double ell, double sigma) {
  NoiseModel m;
  m.family = NoiseFamily::LogGamma;
  m.ell = ell;
  m.sigma = sigma;
  return m;
}

NoiseModel NoiseModel::correlated_gaussian(double sigma, Tensor kernel) {
  NoiseModel m;
  m.family = NoiseFamily::CorrelatedGaussian;
  m.sigma = sigma;
  m.kernel = std::move(kernel);
  return m;
}

NoiseModel NoiseModel::poisson(double gamma) {
  NoiseModel m;
  m.family = NoiseFamily::Poisson;
  m.gamma = gamma;
  return m;
}

NoiseModel NoiseModel::gamma_noise(double ell) {
  NoiseModel m;
  m.family = NoiseFamily::Gamma;
  m.ell = ell;
  return m;
}

NoiseModel NoiseModel::binomial(int n_trials) {
  NoiseModel m;
  m.family = NoiseFamily::Binomial;
  m.n_trials = n_trials;
  return m;
}

NoiseModel NoiseModel::bernoulli_mask(double p0) {
  NoiseModel m;
  m.family = NoiseFamily::BernoulliMask;
  m.p0 = p0;
  return m;
}

NoiseModel NoiseModel::poisson_gaussian(double gamma, double sigma) {
  NoiseModel m;
  m.family = NoiseFamily::PoissonGaussian;
  m.gamma = gamma;
  m.sigma = sigma;
  return m;
}

void NoiseModel::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) bad_model(std::string(name) + " must be > 0 (got " + std::to_string(v) + ")");
  };
  switch (family) {
  case NoiseFamily::Gaussian: positive("sigma", sigma); break;
  case NoiseFamily::Laplace: positive("b", b); break;
  case NoiseFamily::LogGamma:
    positive("ell", ell);
    positive("sigma", sigma);
    break;
  case NoiseFamily::CorrelatedGaussian: {
    positive("sigma", sigma);
    if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
      bad_model("correlation kernel must be 2-D with odd extents, got " + to_string(kernel.shape()));
    }
    if (!kernel.all_finite()) bad_model("correlation kernel has non-finite entries");
    break;
  }
  case NoiseFamily::Poisson: positive("gamma", gamma); break;
  case NoiseFamily::Gamma: positive("ell", ell); break;
  case NoiseFamily::Binomial:
    if (n_trials < 1) bad_model("n_trials must be >= 1 (got " + std::to_string(n_trials) + ")");
    break;
  case NoiseFamily::BernoulliMask:
    if (!(p0 > 0.0 && p0 < 1.0)) bad_model("p0 must lie in (0, 1) (got " + std::to_string(p0) + ")");
    break;
  case NoiseFamily::PoissonGaussian:
    positive("gamma", gamma);
    positive("sigma", sigma);
    break;
  }
}

std::string NoiseModel::name() const {
  std::ostringstream os;
  os << family_name(family);
  switch (family) {
  case NoiseFamily::Gaussian: os << "(sigma=" << sigma << ")"; break;
  case NoiseFamily::Laplace: os << "(b=" << b << ")"; break;
  case NoiseFamily::LogGamma: os << "(ell=" << ell << ",sigma=" << sigma << ")"; break;
  case NoiseFamily::CorrelatedGaussian: os << "(sigma=" << sigma << ",kernel=" << to_string(kernel.shape()) << ")"; break;
  case NoiseFamily::Poisson: os << "(gamma=" << gamma << ")"; break;
  case NoiseFamily::Gamma: os << "(ell=" << ell << ")"; break;
  case NoiseFamily::Binomial: os << "(n=" << n_trials << ")"; break;
  case NoiseFamily::BernoulliMask: os << "(p0=" << p0 << ")"; break;
  case NoiseFamily::PoissonGaussian: os << "(gamma=" << gamma << ",sigma=" << sigma << ")"; break;
  }
  return os.str();
}

bool NoiseModel::additive() const {
  return family == NoiseFamily::Gaussian || family == NoiseFamily::Laplace || family == NoiseFamily::LogGamma ||
         family == NoiseFamily::CorrelatedGaussian;
}

bool NoiseModel::iid_additive() const { return additive() && family != NoiseFamily::CorrelatedGaussian; }

bool NoiseModel::is_nef() const {
  return family == NoiseFamily::Gaussian || family == NoiseFamily::Poisson || family == NoiseFamily::Gamma ||
         family == NoiseFamily::Binomial;
}

std::string family_name(NoiseFamily f) {
  switch (f) {
  case NoiseFamily::Gaussian: return "gaussian";
  case NoiseFamily::Laplace: return "laplace";
  case NoiseFamily::LogGamma: return "log_gamma";
  case NoiseFamily::CorrelatedGaussian: return "correlated_gaussian";
  case NoiseFamily::Poisson: return "poisson";
  case NoiseFamily::Gamma: return "gamma";
  case NoiseFamily::Binomial: return "binomial";
  case NoiseFamily::BernoulliMask: return "bernoulli_mask";
  case NoiseFamily::PoissonGaussian: return "poisson_gaussian";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(const std::string& name) {
  for (NoiseFamily f : {NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::LogGamma,
                        NoiseFamily::CorrelatedGaussian, NoiseFamily::Poisson, NoiseFamily::Gamma,
                        NoiseFamily::Binomial, NoiseFamily::BernoulliMask, NoiseFamily::PoissonGaussian}) {
    if (family_name(f) == name) return f;
  }
  if (name == "loggamma") return NoiseFamily::LogGamma;
  if (name == "correlated") return NoiseFamily::CorrelatedGaussian;
  if (name == "pg") return NoiseFamily::PoissonGaussian;
  throw std::invalid_argument("unknown noise model '" + name + "'");
}

Tensor gaussian_kernel(std::size_t size, double std) {
  if (size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd");
  if (!(std > 0.0)) throw std::invalid_argument("gaussian_kernel: std must be > 0");
  Tensor k(Shape{size, size});
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double di = double(i) - c, dj = double(j) - c;
      k[i * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * std * std));
      total += k[i * size + j];
    }
  for (double& v : k.storage()) v /= total;
  return k;
}

double log_gamma_scale(double ell, double sigma) { return sigma / std::sqrt(trigamma(ell)); }

double log_gamma_bias(double ell) { return digamma(ell) - std::log(ell); }

double draw_additive_noise(const NoiseModel& m, RngStream& rng) {
  switch (m.family) {
  case NoiseFamily::Gaussian: return m.sigma * rng.normal();
  case NoiseFamily::Laplace: return sample_laplace(0.0, m.b, rng);
  case NoiseFamily::LogGamma: {
    // z ~ G(ell, rate ell), so ln z = ln G(ell, 1) - ln ell.
    const double lnz = sample_log_gamma(m.ell, rng) - std::log(m.ell);
    return log_gamma_scale(m.ell, m.sigma) * (lnz - log_gamma_bias(m.ell));
  }
  default: throw std::invalid_argument("draw_additive_noise: " + m.name() + " is not i.i.d. additive");
  }
}

Tensor sample_additive_noise(const Shape& shape, const NoiseModel& m, RngStream& rng) {
  m.validate();
  if (m.family == NoiseFamily::CorrelatedGaussian) return correlated_field(shape, m.kernel, m.sigma, rng);
  if (!m.additive()) throw std::invalid_argument("sample_additive_noise: " + m.name() + " is not additive");
  Tensor out(shape);
  if (m.family == NoiseFamily::LogGamma) {
    const double scale = log_gamma_scale(m.ell, m.sigma);
    const double shift = log_gamma_bias(m.ell) + std::log(m.ell);
    for (double& v : out.storage()) v = scale * (sample_log_gamma(m.ell, rng) - shift);
    return out;
  }
  for (double& v : out.storage()) v = draw_additive_noise(m, rng);
  return out;
}

Tensor corrupt(const Tensor& x, const NoiseModel& m, RngStream& rng) {
  m.validate();
  require_domain(x, m);
  if (m.additive()) return x + sample_additive_noise(x.shape(), m, rng);
  Tensor y = Tensor::like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    switch (m.family) {
    case NoiseFamily::Poisson: y[i] = m.gamma * double(sample_poisson(xi / m.gamma, rng)); break;
    case NoiseFamily::Gamma: y[i] = sample_gamma(m.ell, xi / m.ell, rng); break;
    case NoiseFamily::Binomial:
      y[i] = double(sample_binomial(m.n_trials, xi, rng)) / double(m.n_trials);
      break;
    case NoiseFamily::BernoulliMask: y[i] = rng.uniform() < m.p0 ? xi : 0.0; break;
    case NoiseFamily::PoissonGaussian:
      y[i] = m.gamma * double(sample_poisson(xi / m.gamma, rng)) + m.sigma * rng.normal();
      break;
    default: break;
    }
  }
  return y;
}

double oracle_map(const NoiseModel& m, double w) {
  m.validate();
  switch (m.family) {
  case NoiseFamily::Gaussian: return m.sigma * w;
  case NoiseFamily::Laplace: {
    // Lower tail probability of |w| keeps the quantile accurate far out.
    const double tail = normal_cdf(-std::abs(w));
    const double mag = -m.b * std::log(2.0 * tail);
    return w < 0.0 ? -mag : mag;
  }
  case NoiseFamily::LogGamma: {
    const double g = w <= 0.0 ? gamma_quantile(m.ell, normal_cdf(w)) : gamma_quantile_upper(m.ell, normal_cdf(-w));
    const double lnz = std::log(g) - std::log(m.ell);
    return log_gamma_scale(m.ell, m.sigma) * (lnz - log_gamma_bias(m.ell));
  }
  default: throw std::invalid_argument("oracle_map: " + m.name() + " has no scalar pushforward");
  }
}

Tensor oracle_noise(const NoiseModel& m, const Tensor& w) {
  if (m.family != NoiseFamily::CorrelatedGaussian) return map(w, [&](double v) { return oracle_map(m, v); });
  m.validate();
  const Planes p = planes_of(w.shape());
  Tensor k = m.kernel.reshaped(Shape{1, 1, m.kernel.dim(0), m.kernel.dim(1)});
  Tensor flat = w.reshaped(Shape{p.count, 1, p.h, p.w});
  return (m.sigma * conv2d(flat, k)).reshaped(w.shape());
}

std::pair<double, double> model_mean_var(const NoiseModel& m, double x) {
  m.validate();
  Tensor probe(Shape{1}, x);
  require_domain(probe, m);
  switch (m.family) {
  case NoiseFamily::Gaussian: return {x, m.sigma * m.sigma};
  case NoiseFamily::Laplace: return {x, 2.0 * m.b * m.b};
  case NoiseFamily::LogGamma: return {x, m.sigma * m.sigma};
  case NoiseFamily::CorrelatedGaussian: {
    double e = 0.0;
    for (double v : m.kernel.storage()) e += v * v;
    return {x, m.sigma * m.sigma * e};
  }
  case NoiseFamily::Poisson: return {x, m.gamma * x};
  case NoiseFamily::Gamma: return {x, x * x / m.ell};
  case NoiseFamily::Binomial: return {x, x * (1.0 - x) / m.n_trials};
  case NoiseFamily::BernoulliMask: return {m.p0 * x, m.p0 * (1.0 - m.p0) * x * x};
  case NoiseFamily::PoissonGaussian: return {x, m.gamma * x + m.sigma * m.sigma};
  }
  return {x, 0.0};
}

NefSpec nef_components(const NoiseModel& m) {
  m.validate();
  NefSpec s;
  s.family = family_name(m.family);
  switch (m.family) {
  case NoiseFamily::Gaussian: {
    const double v = m.sigma * m.sigma;
    s.eta = [v](double x) { return x / v; };
    s.phi = [v](double x) { return x * x / (2.0 * v); };
    s.log_h = [v](double y) { return -y * y / (2.0 * v) - 0.5 * std::log(2.0 * std::numbers::pi * v); };
    break;
  }
  case NoiseFamily::Poisson: {
    const double g = m.gamma;
    s.eta = [](double x) { return std::log(x); };
    s.phi = [g](double x) { return x / g; };
    s.log_h = [g](double y) { return -y * std::log(g) - std::lgamma(y + 1.0); };
    break;
  }
  case NoiseFamily::Gamma: {
    const double l = m.ell;
    s.eta = [l](double x) { return -l / x; };
    s.phi = [l](double x) { return l * std::log(x); };
    s.log_h = [l](double y) { return l * std::log(l) + (l - 1.0) * std::log(y) - std::lgamma(l); };
    break;
  }
  case NoiseFamily::Binomial: {
    const double l = m.n_trials;
    s.eta = [](double x) { return std::log(x / (1.0 - x)); };
    s.phi = [l](double x) { return l * std::log(1.0 - x); };
    s.log_h = [l](double y) { return std::lgamma(l + 1.0) - std::lgamma(y + 1.0) - std::lgamma(l - y + 1.0); };
    break;
  }
  default: throw std::invalid_argument("nef_components: " + m.name() + " has no NEF form");
  }
  return s;
}

Tensor to_counts(const Tensor& y, const NoiseModel& m) {
  switch (m.family) {
  case NoiseFamily::Poisson: return map(y, [&](double v) { return std::round(v / m.gamma); });
  case NoiseFamily::Binomial: return map(y, [&](double v) { return std::round(v * m.n_trials); });
  case NoiseFamily::PoissonGaussian: return map(y, [&](double v) { return std::max(0.0, std::round(v / m.gamma)); });
  default: throw std::invalid_argument("to_counts: " + m.name() + " is not a count model");
  }
}

} // namespace recorrupt
