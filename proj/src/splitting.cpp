#include "recorrupt/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace recorrupt {

namespace {

bool needs_alpha(NoiseFamily f) { return f != NoiseFamily::Gaussian && f != NoiseFamily::Laplace && f != NoiseFamily::LogGamma && f != NoiseFamily::CorrelatedGaussian; }

double log_binom_pmf(std::int64_t n, double p, std::int64_t k) {
  return std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) - std::lgamma(double(n - k) + 1) +
         double(k) * std::log(p) + double(n - k) * std::log1p(-p);
}

double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

std::string tag(const char* metric, double x) {
  std::ostringstream os;
  os << metric << "@x=" << x;
  return os.str();
}

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments moments(const Tensor& t) {
  Moments m;
  m.mean = mean(t);
  for (double v : t.storage()) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(t.size() - 1);
  return m;
}

double correlation(const Tensor& a, const Tensor& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

Estimate mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

} // namespace

void SplitConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("split: alpha must lie in (0, 1) (got " + std::to_string(alpha) + ")");
  if (!(tau > 0.0)) throw std::domain_error("split: tau must be > 0 (got " + std::to_string(tau) + ")");
  if (aux) aux->validate();
}

std::int64_t binomial_draws(int n_trials, double alpha) {
  return static_cast<std::int64_t>(std::nearbyint(static_cast<double>(n_trials) * alpha));
}

AuxDraw draw_aux(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, RngStream& rng) {
  model.validate();
  cfg.validate();
  AuxDraw a;
  if (model.additive()) {
    a.omega = cfg.aux ? sample(*cfg.aux, y.shape(), rng) : sample_additive_noise(y.shape(), model, rng);
    return a;
  }
  a.omega = Tensor::like(y);
  const double alpha = cfg.alpha;
  switch (model.family) {
  case NoiseFamily::Poisson: {
    const Tensor c = to_counts(y, model);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (c[i] < 0.0) throw std::domain_error("poisson split: negative count at pixel " + std::to_string(i));
      a.omega[i] = double(sample_binomial(std::int64_t(c[i]), alpha, rng));
    }
    break;
  }
  case NoiseFamily::Gamma:
    for (std::size_t i = 0; i < y.size(); ++i) a.omega[i] = sample_beta(model.ell * alpha, model.ell * (1.0 - alpha), rng);
    break;
  case NoiseFamily::Binomial: {
    const std::int64_t n = model.n_trials, m = binomial_draws(model.n_trials, alpha);
    if (m <= 0 || m >= n) {
      throw std::domain_error("binomial split: round(n*alpha) = " + std::to_string(m) + " leaves an empty half");
    }
    const Tensor c = to_counts(y, model);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (c[i] < 0.0 || c[i] > double(n)) throw std::domain_error("binomial split: count out of range at pixel " + std::to_string(i));
      a.omega[i] = double(sample_hypergeometric(n, std::int64_t(c[i]), m, rng));
    }
    break;
  }
  case NoiseFamily::BernoulliMask:
    for (double& v : a.omega.storage()) v = rng.uniform() < alpha ? 1.0 : 0.0;
    break;
  case NoiseFamily::PoissonGaussian: {
    const Tensor c = to_counts(y, model);
    a.omega1 = Tensor::like(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      a.omega[i] = double(sample_binomial(std::int64_t(c[i]), alpha, rng));
      a.omega1[i] = model.sigma * rng.normal();
    }
    break;
  }
  default: throw std::invalid_argument("gr2r_pair: no splitting rule for " + model.name());
  }
  return a;
}

RecorruptedPair assemble_pair(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, const AuxDraw& aux) {
  model.validate();
  cfg.validate();
  require_same_shape("gr2r_pair", y, aux.omega);
  RecorruptedPair p;
  p.family = model.family;
  p.alpha = needs_alpha(model.family) ? cfg.alpha : 0.0;
  p.alpha_effective = p.alpha;
  p.tau = cfg.tau;
  p.y1 = Tensor::like(y);
  p.y2 = Tensor::like(y);
  const double a = cfg.alpha, tau = cfg.tau;
  const Tensor& w = aux.omega;
  if (model.additive()) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = y[i] + tau * w[i];
      p.y2[i] = y[i] - w[i] / tau;
    }
    return p;
  }
  switch (model.family) {
  case NoiseFamily::Poisson: {
    const Tensor c = to_counts(y, model);
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = model.gamma * (c[i] - w[i]) / (1.0 - a);
      p.y2[i] = model.gamma * w[i] / a;
    }
    break;
  }
  case NoiseFamily::Gamma:
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = y[i] * (1.0 - w[i]) / (1.0 - a);
      p.y2[i] = y[i] * w[i] / a;
    }
    break;
  case NoiseFamily::Binomial: {
    const double n = model.n_trials;
    const double m = double(binomial_draws(model.n_trials, a));
    p.alpha_effective = m / n;
    const Tensor c = to_counts(y, model);
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = (c[i] - w[i]) / (n - m);
      p.y2[i] = w[i] / m;
    }
    break;
  }
  case NoiseFamily::BernoulliMask:
    p.weight = Tensor::like(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = y[i];
      p.y2[i] = y[i] * (1.0 - w[i]) / (1.0 - a);
      p.weight[i] = p.y2[i] > 0.0 ? 1.0 : 0.0;
    }
    break;
  case NoiseFamily::PoissonGaussian: {
    require_same_shape("gr2r_pair", y, aux.omega1);
    const Tensor c = to_counts(y, model);
    const double s2 = model.sigma * model.sigma;
    p.weight = Tensor::like(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      p.y1[i] = model.gamma * (c[i] - w[i]) / (1.0 - a) + tau * aux.omega1[i];
      p.y2[i] = model.gamma * w[i] / a - aux.omega1[i] / tau;
      const double wt = model.gamma * p.y2[i] + (1.0 + 1.0 / (tau * tau)) * s2;
      p.weight[i] = cfg.pg_weight == PgWeight::AsPrinted ? wt : 1.0 / std::max(wt, 1e-12);
    }
    break;
  }
  default: throw std::invalid_argument("gr2r_pair: no splitting rule for " + model.name());
  }
  return p;
}

RecorruptedPair gr2r_pair(const Tensor& y, const NoiseModel& model, const SplitConfig& cfg, RngStream& rng) {
  return assemble_pair(y, model, cfg, draw_aux(y, model, cfg, rng));
}

Var gr2r_loss(Var prediction, const RecorruptedPair& pair, const NoiseModel& model, bool clamp) {
  require_same_shape("gr2r_loss", prediction.value(), pair.y2);
  Graph& g = prediction.graph();
  const double n = static_cast<double>(pair.y2.size());
  auto check = [&](const char* what, auto ok) {
    if (clamp) return;
    std::size_t bad = 0;
    for (double v : prediction.value().storage())
      if (!ok(v)) ++bad;
    if (bad) throw std::domain_error(std::string("gr2r_loss: ") + std::to_string(bad) + " prediction(s) outside " + what);
  };
  constexpr double lo = 1e-6;
  switch (model.family) {
  case NoiseFamily::Poisson: {
    check("(0, inf)", [](double v) { return v > 0.0; });
    Var f = clamp ? ad::clamp(prediction, lo, 1e300) : prediction;
    return ad::mean(f) - ad::scale(ad::dot(g.constant(pair.y2), ad::log(f)), 1.0 / n);
  }
  case NoiseFamily::Gamma: {
    check("(0, inf)", [](double v) { return v > 0.0; });
    Var f = clamp ? ad::clamp(prediction, lo, 1e300) : prediction;
    Var inv = g.constant(Tensor::like(pair.y2, 1.0)) / f;
    return ad::mean(ad::log(f)) + ad::scale(ad::dot(g.constant(pair.y2), inv), 1.0 / n);
  }
  case NoiseFamily::Binomial: {
    check("(0, 1)", [](double v) { return v > 0.0 && v < 1.0; });
    Var f = clamp ? ad::clamp(prediction, lo, 1.0 - lo) : prediction;
    const double trials = model.n_trials;
    const Tensor counts = trials * pair.y2;
    Tensor shifted = counts;
    for (double& v : shifted.storage()) v -= trials;
    Var one_minus = ad::add_scalar(ad::neg(f), 1.0);
    Var nll = ad::dot(g.constant(shifted), ad::log(one_minus)) - ad::dot(g.constant(counts), ad::log(f));
    return ad::scale(nll, 1.0 / n);
  }
  default: {
    Var diff = prediction - g.constant(pair.y2);
    if (pair.has_weight()) diff = diff * g.constant(pair.weight);
    return ad::mean(ad::square(diff));
  }
  }
}

double gr2r_loss(const Tensor& prediction, const RecorruptedPair& pair, const NoiseModel& model, bool clamp) {
  Graph g;
  return gr2r_loss(g.constant(prediction), pair, model, clamp).value().item();
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) tv += std::abs((i < p.size() ? p[i] : 0.0) - (i < q.size() ? q[i] : 0.0));
  return 0.5 * tv;
}

ConditionalLaw conditional_split_law(const NoiseModel& model, double x, std::int64_t y_count, double alpha,
                                     std::size_t n_accept, RngStream& rng) {
  model.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("conditional_split_law: alpha must lie in (0, 1)");
  if (y_count < 0) throw std::domain_error("conditional_split_law: negative count");
  ConditionalLaw law;
  law.pmf.assign(std::size_t(y_count) + 1, 0.0);
  law.aux_pmf.assign(std::size_t(y_count) + 1, 0.0);
  std::function<std::pair<std::int64_t, std::int64_t>()> draw;
  if (model.family == NoiseFamily::Poisson) {
    const double l1 = (1.0 - alpha) * x / model.gamma, l2 = alpha * x / model.gamma;
    draw = [&, l1, l2] { return std::make_pair(sample_poisson(l1, rng), sample_poisson(l2, rng)); };
    for (std::int64_t k = 0; k <= y_count; ++k) law.aux_pmf[std::size_t(k)] = std::exp(log_binom_pmf(y_count, alpha, k));
  } else if (model.family == NoiseFamily::Binomial) {
    const std::int64_t n = model.n_trials, m = binomial_draws(model.n_trials, alpha);
    if (y_count > n) throw std::domain_error("conditional_split_law: count exceeds n_trials");
    draw = [&, n, m] { return std::make_pair(sample_binomial(n - m, x, rng), sample_binomial(m, x, rng)); };
    for (std::int64_t k = std::max<std::int64_t>(0, m - (n - y_count)); k <= std::min(y_count, m); ++k) {
      law.aux_pmf[std::size_t(k)] = std::exp(log_choose(double(y_count), double(k)) +
                                             log_choose(double(n - y_count), double(m - k)) - log_choose(double(n), double(m)));
    }
  } else {
    throw std::invalid_argument("conditional_split_law: " + model.name() + " is not a discrete NEF family");
  }
  const std::size_t max_tries = 10000 * n_accept + 1000000;
  std::size_t tries = 0;
  while (law.accepted < n_accept) {
    if (++tries > max_tries) throw std::runtime_error("conditional_split_law: count is too unlikely at this x");
    const auto [z1, z2] = draw();
    if (z1 + z2 != y_count) continue;
    law.pmf[std::size_t(z2)] += 1.0;
    ++law.accepted;
  }
  for (double& v : law.pmf) v /= static_cast<double>(law.accepted);
  law.tv = total_variation(law.pmf, law.aux_pmf);
  return law;
}

Report nef_split_validate(const NoiseModel& model, const std::vector<double>& x_grid, double alpha, std::size_t n_mc,
                          RngStream& rng) {
  if (!model.is_nef()) throw std::invalid_argument("nef_split_validate: " + model.name() + " is not an NEF family");
  if (n_mc < 2) throw std::invalid_argument("nef_split_validate: need at least 2 samples");
  SplitConfig cfg;
  cfg.alpha = alpha;
  if (model.family == NoiseFamily::Gaussian) {
    // Exact Gaussian split: y1 = y + tau w, y2 = y - w / tau with tau^2 = alpha / (1 - alpha).
    cfg.tau = std::sqrt(alpha / (1.0 - alpha));
    cfg.aux = DistSpec::normal(0.0, model.sigma * std::sqrt((1.0 - alpha) / alpha) * cfg.tau);
  }
  Report r;
  for (double x : x_grid) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(std::llround(x * 1e9)));
    const Tensor xs(Shape{n_mc}, x);
    const Tensor y = corrupt(xs, model, sub);
    const RecorruptedPair p = gr2r_pair(y, model, cfg, sub);
    const double a = model.family == NoiseFamily::Gaussian ? alpha : p.alpha_effective;
    const double vy = model_mean_var(model, x).second;
    const Moments m1 = moments(p.y1), m2 = moments(p.y2);
    const double n = static_cast<double>(n_mc);
    const double z1 = std::abs(m1.mean - x) / std::sqrt(m1.var / n);
    const double z2 = std::abs(m2.mean - x) / std::sqrt(m2.var / n);
    r.add(tag("mean_y1_z", x), z1, 1.0, 4.0, z1 < 4.0);
    r.add(tag("mean_y2_z", x), z2, 1.0, 4.0, z2 < 4.0);
    const double v1 = m1.var / vy, v2 = m2.var / vy;
    // Raw ratios should equal 1/(1-alpha) and 1/alpha; tolerance is 2% relative. SE of a sample variance ~ sqrt(2/n).
    r.add(tag("var_ratio_y1", x), v1, v1 * std::sqrt(2.0 / n), 0.02, std::abs(v1 * (1.0 - a) - 1.0) <= 0.02);
    r.add(tag("var_ratio_y2", x), v2, v2 * std::sqrt(2.0 / n), 0.02, std::abs(v2 * a - 1.0) <= 0.02);
    const double rho = correlation(p.y1, p.y2);
    r.add(tag("corr_y1_y2", x), rho, 1.0 / std::sqrt(n), 0.01, std::abs(rho) < 0.01);
    double worst = 0.0;
    const double unit = model.family == NoiseFamily::Poisson ? 1.0 / model.gamma
                        : model.family == NoiseFamily::Binomial ? double(model.n_trials) : 1.0;
    const bool continuous = model.family == NoiseFamily::Gamma || model.family == NoiseFamily::Gaussian;
    {
      for (std::size_t i = 0; i < n_mc; ++i) {
        const double back = ((1.0 - a) * p.y1[i] + a * p.y2[i]) * unit;
        const double ref = continuous ? y[i] : std::round(y[i] * unit);
        worst = std::max(worst, std::abs(back - ref) / std::max(1.0, std::abs(ref)));
      }
      r.add(tag("reassembly_max_err", x), worst, 0.0, 1e-12, worst <= 1e-12);
    }
  }
  if (model.family == NoiseFamily::Poisson || model.family == NoiseFamily::Binomial) {
    const double x_mid = x_grid.empty() ? 0.5 : x_grid[x_grid.size() / 2];
    const double mu = model.family == NoiseFamily::Poisson ? x_mid / model.gamma : x_mid * model.n_trials;
    const std::int64_t centre = std::max<std::int64_t>(2, std::llround(mu));
    const std::size_t n_accept = std::min<std::size_t>(n_mc, 100000);
    for (std::int64_t yc : {centre - 2, centre, centre + 2}) {
      if (model.family == NoiseFamily::Binomial && yc > model.n_trials) continue;
      RngStream sub = rng.split(0x7100 + static_cast<std::uint64_t>(yc));
      const ConditionalLaw law = conditional_split_law(model, x_mid, yc, alpha, n_accept, sub);
      r.add("tv_conditional@y=" + std::to_string(yc), law.tv, 0.0, 0.01, law.tv < 0.01);
    }
  }
  if (model.family == NoiseFamily::Binomial) {
    r.warnings.push_back("binomial auxiliary law read as HypGeo(population n, successes y, draws round_half_even(n*alpha)); draws = " +
                         std::to_string(binomial_draws(model.n_trials, alpha)));
    r.warnings.push_back("binomial phi = n*log(1-x) as tabulated is concave; the convex form is -n*log(1-x)");
  }
  return r;
}

Report ConditionReport::as_report() const {
  Report r;
  r.warnings = warnings;
  auto side = [&](const char* name, const ConditionSide& s) {
    r.add(std::string(name) + "_lhs", s.lhs, s.lhs_se, 0.0, true);
    r.add(std::string(name) + "_rhs", s.rhs, s.rhs_se, 0.0, true);
    const double se = std::sqrt(s.lhs_se * s.lhs_se + s.rhs_se * s.rhs_se);
    r.add(std::string(name) + "_diff", s.lhs - s.rhs, se, 4.0 * se, s.pass);
  };
  side("n1", n1);
  side("n3", n3);
  r.add("n3_ratio", n3.rhs != 0.0 ? n3.lhs / n3.rhs : 0.0, 0.0, 0.0, true);
  return r;
}

ConditionReport check_moment_conditions(const DistSpec& eps, const DistSpec& omega, double tau, std::size_t n_mc,
                                        RngStream& rng, bool force_mc) {
  if (!(tau > 0.0)) throw std::domain_error("check_moment_conditions: tau must be > 0");
  eps.validate();
  omega.validate();
  ConditionReport rep;
  // Raw moments 1..4 of each law, closed form when available.
  auto moments_of = [&](const DistSpec& d, std::uint64_t stream, std::vector<Estimate>& out) {
    out.assign(5, Estimate{});
    bool closed = !force_mc;
    for (int k = 1; k <= 4 && closed; ++k) closed = d.raw_moment(k).has_value();
    if (closed) {
      for (int k = 1; k <= 4; ++k) out[std::size_t(k)] = {*d.raw_moment(k), 0.0};
      return;
    }
    if (n_mc < 100) throw std::invalid_argument("check_moment_conditions: n_mc too small for Monte Carlo moments");
    RngStream sub = rng.split(stream);
    for (const MomentEstimate& m : moment_report(d, n_mc, 4, sub)) out[std::size_t(m.order)] = {m.value, m.se};
  };
  std::vector<Estimate> me, mw;
  moments_of(eps, 1, me);
  moments_of(omega, 2, mw);
  for (const auto* ms : {&me, &mw}) {
    for (int k : {1, 3}) {
      const Estimate& e = (*ms)[std::size_t(k)];
      if (std::abs(e.value) > std::max(4.0 * e.se, 1e-12 * std::max(1.0, std::abs((*ms)[4].value)))) rep.asymmetric = true;
    }
  }
  if (rep.asymmetric) rep.warnings.push_back("odd moments do not vanish: the symmetric-law conditions may not apply");
  auto judge = [](ConditionSide& s) {
    const double se = std::sqrt(s.lhs_se * s.lhs_se + s.rhs_se * s.rhs_se);
    s.pass = std::abs(s.lhs - s.rhs) <= 4.0 * se + 1e-12 * std::max({1.0, std::abs(s.lhs), std::abs(s.rhs)});
  };
  rep.n1 = {mw[2].value, mw[2].se, me[2].value, me[2].se, false};
  judge(rep.n1);
  const double t2 = tau * tau;
  const double c = 3.0 * (1.0 - 1.0 / t2);
  rep.n3.lhs = mw[4].value;
  rep.n3.lhs_se = mw[4].se;
  rep.n3.rhs = me[4].value / t2 + c * me[2].value * me[2].value;
  rep.n3.rhs_se = me[4].se / t2 + std::abs(c) * 2.0 * std::abs(me[2].value) * me[2].se;
  judge(rep.n3);
  return rep;
}

Estimate correlation_functional(const std::function<double(double)>& f, double x, const DistSpec& eps,
                                const DistSpec& omega, double tau, std::size_t n_mc, RngStream& rng) {
  if (n_mc < 2) throw std::invalid_argument("correlation_functional: need at least 2 samples");
  eps.validate();
  omega.validate();
  std::vector<double> v(n_mc);
  for (double& s : v) {
    const double e = draw(eps, rng);
    const double w = draw(omega, rng);
    s = (e - w / tau) * f(x + e + tau * w);
  }
  return mean_se(v);
}

SupervisedGap gr2r_supervised_gap(const std::function<Tensor(const Tensor&)>& f, const NoiseModel& model,
                                  const SplitConfig& cfg, const Tensor& x, std::size_t n_mc, RngStream& rng) {
  if (n_mc < 2) throw std::invalid_argument("gr2r_supervised_gap: need at least 2 samples");
  SupervisedGap out;
  std::vector<double> d(n_mc);
  for (std::size_t k = 0; k < n_mc; ++k) {
    const Tensor y = corrupt(x, model, rng);
    const RecorruptedPair p = gr2r_pair(y, model, cfg, rng);
    const Tensor fy = f(p.y1);
    d[k] = mse(fy, p.y2) - mse(fy, x);
  }
  out.gap = mean_se(d);
  double c = 0.0;
  for (double xi : x.storage()) {
    const double vy = model_mean_var(model, xi).second;
    if (model.additive()) {
      const double vw = cfg.aux ? cfg.aux->variance() : vy;
      c += vy + vw / (cfg.tau * cfg.tau);
    } else if (model.is_nef()) {
      const double a = model.family == NoiseFamily::Binomial
                           ? double(binomial_draws(model.n_trials, cfg.alpha)) / model.n_trials
                           : cfg.alpha;
      c += vy / a;
    } else {
      throw std::invalid_argument("gr2r_supervised_gap: no closed-form constant for " + model.name());
    }
  }
  out.closed_form = c / static_cast<double>(x.size());
  return out;
}

} // namespace recorrupt
