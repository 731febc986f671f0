#include "recorrupt/sure.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "recorrupt/splitting.hpp"

namespace recorrupt {

void SureConfig::validate() const {
  if (!(sigma > 0.0)) throw std::domain_error("sure: sigma must be > 0");
  if (mc_probes < 1) throw std::domain_error("sure: mc_probes must be >= 1");
  if (!(fd_step > 0.0 && fd_step <= 1e-2)) throw std::domain_error("sure: fd_step must lie in (0, 1e-2]");
}

void UnsureState::validate() const {
  if (!(step > 0.0)) throw std::domain_error("unsure: ascent step must be > 0");
}

Tensor rademacher(const Shape& shape, RngStream& rng) {
  Tensor v(shape);
  for (double& x : v.storage()) x = (rng.next_u64() >> 63) ? 1.0 : -1.0;
  return v;
}

double mc_divergence(const DenoiserFn& f, const Tensor& y, const SureConfig& cfg, RngStream& rng) {
  if (!(cfg.fd_step > 0.0 && cfg.fd_step <= 1e-2)) throw std::domain_error("sure: fd_step must lie in (0, 1e-2]");
  if (cfg.mc_probes < 1) throw std::domain_error("sure: mc_probes must be >= 1");
  const Tensor fy = f(y);
  double acc = 0.0;
  for (std::size_t p = 0; p < cfg.mc_probes; ++p) {
    const Tensor v = rademacher(y.shape(), rng);
    const Tensor fd = f(y + cfg.fd_step * v);
    acc += dot(v, fd - fy) / cfg.fd_step;
  }
  return acc / static_cast<double>(cfg.mc_probes);
}

double sure_loss(const DenoiserFn& f, const Tensor& y, const SureConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double n = static_cast<double>(y.size());
  const double div = mc_divergence(f, y, cfg, rng);
  return mse(f(y), y) + 2.0 * cfg.sigma * cfg.sigma * div / n;
}

namespace {

// Sum over probes of u^T (f(y + delta u) - f(y)) / delta, averaged; u = v or k * v.
Var graph_divergence(Graph& g, const GraphDenoiser& f, const Tensor& y, Var fy, const SureConfig& cfg,
                     RngStream& rng, Var* kernel) {
  Var acc;
  for (std::size_t p = 0; p < cfg.mc_probes; ++p) {
    const Tensor v = rademacher(y.shape(), rng);
    Var u = kernel ? ad::conv2d(g.constant(v), *kernel) : g.constant(v);
    Var yd = g.constant(y) + ad::scale(u, cfg.fd_step);
    Var term = ad::dot(u, f(g, yd) - fy);
    acc = acc.valid() ? acc + term : term;
  }
  return ad::scale(acc, 1.0 / (cfg.fd_step * static_cast<double>(cfg.mc_probes)));
}

} // namespace

Var sure_loss(Graph& g, const GraphDenoiser& f, const Tensor& y, const SureConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double n = static_cast<double>(y.size());
  Var fy = f(g, g.constant(y));
  Var div = graph_divergence(g, f, y, fy, cfg, rng, nullptr);
  return ad::mean(ad::square(fy - g.constant(y))) + ad::scale(div, 2.0 * cfg.sigma * cfg.sigma / n);
}

UnsureTerms unsure_objective(Graph& g, const GraphDenoiser& f, const Tensor& y, const UnsureState& state,
                             const SureConfig& cfg, RngStream& rng) {
  state.validate();
  const double n = static_cast<double>(y.size());
  Var fy = f(g, g.constant(y));
  Var div = graph_divergence(g, f, y, fy, cfg, rng, nullptr);
  UnsureTerms t;
  t.divergence = div.value().item();
  t.ascent_grad = 2.0 * t.divergence / n;
  t.loss_f = ad::mean(ad::square(fy - g.constant(y))) + ad::scale(div, 2.0 * state.eta / n);
  return t;
}

void unsure_ascent(UnsureState& state, double ascent_grad) {
  state.validate();
  state.eta += state.step * ascent_grad;
}

namespace {

void check_kernel(const Tensor& kernel, const Tensor& y) {
  if (kernel.rank() != 4 || kernel.dim(0) != 1 || kernel.dim(1) != 1 || kernel.dim(2) % 2 == 0 ||
      kernel.dim(2) != kernel.dim(3)) {
    throw std::invalid_argument("correlated unsure: kernel must be (1, 1, k, k) with odd k, got " + to_string(kernel.shape()));
  }
  if (y.rank() != 4 || y.dim(1) != 1) throw std::invalid_argument("correlated unsure: y must be (N, 1, H, W)");
  if (kernel.dim(2) > y.dim(2) || kernel.dim(3) > y.dim(3)) {
    throw std::invalid_argument("correlated unsure: kernel " + to_string(kernel.shape()) + " is larger than image " +
                                to_string(y.shape()));
  }
}

} // namespace

UnsureTerms correlated_unsure_objective(Graph& g, const GraphDenoiser& f, const Tensor& y, UnsureState& state,
                                        const SureConfig& cfg, RngStream& rng) {
  state.validate();
  check_kernel(state.kernel.value, y);
  const double n = static_cast<double>(y.size());
  Var fy = f(g, g.constant(y));
  Var k = g.parameter(state.kernel);
  Var div = graph_divergence(g, f, y, fy, cfg, rng, &k);
  UnsureTerms t;
  t.divergence = div.value().item();
  t.loss_f = ad::mean(ad::square(fy - g.constant(y))) + ad::scale(div, 2.0 / n);
  return t;
}

void correlated_unsure_ascent(UnsureState& state) {
  state.validate();
  for (std::size_t i = 0; i < state.kernel.value.size(); ++i) state.kernel.value[i] += state.step * state.kernel.grad[i];
}

double correlated_divergence(const DenoiserFn& f, const Tensor& y, const Tensor& kernel, const SureConfig& cfg,
                             RngStream& rng) {
  check_kernel(kernel, y);
  if (!(cfg.fd_step > 0.0 && cfg.fd_step <= 1e-2)) throw std::domain_error("sure: fd_step must lie in (0, 1e-2]");
  const Tensor fy = f(y);
  double acc = 0.0;
  for (std::size_t p = 0; p < cfg.mc_probes; ++p) {
    const Tensor u = conv2d(rademacher(y.shape(), rng), kernel);
    acc += dot(u, f(y + cfg.fd_step * u) - fy) / cfg.fd_step;
  }
  return acc / static_cast<double>(cfg.mc_probes);
}

AkResult estimate_ak(const NoiseModel& model, double y, int k, const std::vector<double>& alpha_seq, std::size_t n_mc,
                     RngStream& rng) {
  model.validate();
  if (alpha_seq.size() < 2) throw std::invalid_argument("estimate_ak: need at least 2 alphas");
  if (k < 0) throw std::invalid_argument("estimate_ak: order k must be >= 0");
  if (n_mc < 2) throw std::invalid_argument("estimate_ak: need at least 2 samples");
  for (std::size_t i = 0; i < alpha_seq.size(); ++i) {
    const double a = alpha_seq[i];
    if (!(a > 0.0 && a <= 0.5)) throw std::domain_error("estimate_ak: alpha must lie in (0, 0.5]");
    if (i && !(a < alpha_seq[i - 1])) throw std::domain_error("estimate_ak: alphas must be strictly decreasing");
  }
  const bool additive = model.iid_additive();
  if (!additive && !model.is_nef()) throw std::invalid_argument("estimate_ak: no y2 | y rule for " + model.name());
  AkResult res;
  for (double a : alpha_seq) {
    RngStream sub = rng.split(0);
    std::vector<double> s(n_mc);
    if (additive) {
      const double c = std::sqrt((1.0 - a) / a);
      for (double& v : s) {
        const double y2 = y - c * draw_additive_noise(model, sub);
        v = (y2 - y) * std::pow(a * y2, k);
      }
    } else {
      SplitConfig cfg;
      cfg.alpha = a;
      const RecorruptedPair p = gr2r_pair(Tensor(Shape{n_mc}, y), model, cfg, sub);
      for (std::size_t i = 0; i < n_mc; ++i) s[i] = (p.y2[i] - y) * std::pow(a * p.y2[i], k);
    }
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(n_mc);
    double ss = 0.0;
    for (double v : s) ss += (v - m) * (v - m);
    res.points.push_back({a, m, std::sqrt(ss / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc))});
  }
  const AkPoint& p1 = res.points[res.points.size() - 2];
  const AkPoint& p2 = res.points.back();
  res.limit = p2.value - p2.alpha * (p2.value - p1.value) / (p2.alpha - p1.alpha);
  return res;
}

} // namespace recorrupt
