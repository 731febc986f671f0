#include "recorrupt/l2r.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace recorrupt {

void L2RConfig::validate() const {
  if (!(tau > 0.0)) throw std::domain_error("l2r: tau must be > 0");
  if (!(f_lr >= 0.0) || !(h_lr >= 0.0)) throw std::domain_error("l2r: learning rates must be >= 0");
}

double L2RConfig::correlation_factor() const {
  switch (corr_scale) {
  case CorrelationScale::TwoOverTau: return 2.0 / tau;
  case CorrelationScale::Two: return 2.0;
  case CorrelationScale::One: return 1.0;
  }
  return 2.0 / tau;
}

namespace {

Tensor standard_normal(const Shape& shape, RngStream& rng) {
  Tensor w(shape);
  for (double& v : w.storage()) v = rng.normal();
  return w;
}

Tensor nonnegative(const Tensor& y) { return map(y, [](double v) { return v > 0.0 ? v : 0.0; }); }

} // namespace

L2RLosses l2r_losses(Graph& g, const GraphDenoiser& f, Recorruptor& h, const Tensor& y, const L2RConfig& cfg,
                     RngStream& rng) {
  cfg.validate();
  const double n = static_cast<double>(y.size());
  L2RLosses out;
  out.w = standard_normal(y.shape(), rng);
  const Tensor ypos = h.config().pg_scale ? nonnegative(y) : Tensor();
  Var hv = h.forward(g, out.w, h.config().pg_scale ? &ypos : nullptr);
  Var yc = g.constant(y);
  Var y1 = yc + ad::scale(hv, cfg.tau);
  Var fy = f(g, cfg.stop_gradient ? ad::stop_gradient(y1) : y1);
  out.loss_f = ad::mean(ad::square(fy - yc)) + ad::scale(ad::dot(fy, hv), cfg.correlation_factor() / n);
  if (cfg.h_objective == HObjective::Gr2rForm) {
    Var y2 = yc - ad::scale(hv, 1.0 / cfg.tau);
    out.loss_h = ad::mean(ad::square(fy - y2));
  } else {
    out.loss_h = out.loss_f;
  }
  out.h = hv.value();
  out.f_y1 = fy.value();
  return out;
}

namespace {

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("l2r: non-finite ") + term);
}

} // namespace

MinMaxLog minmax_step(const GraphDenoiser& f, Recorruptor& h, const Tensor& y, const L2RConfig& cfg, AdamW& opt_f,
                      AdamW& opt_h, RngStream& rng) {
  MinMaxLog log;
  if (cfg.joint) {
    Graph g;
    RngStream r0 = rng.split(0);
    const L2RLosses l = l2r_losses(g, f, h, y, cfg, r0);
    log.loss_f = l.loss_f.value().item();
    log.loss_h = l.loss_h.value().item();
    check_finite(log.loss_f, "loss_f");
    check_finite(log.loss_h, "loss_h");
    opt_f.zero_grad();
    opt_h.zero_grad();
    if (l.loss_h.id() == l.loss_f.id()) {
      g.backward(l.loss_f);
    } else {
      g.backward(l.loss_h);
      std::vector<Tensor> saved;
      for (Parameter* p : opt_h.params()) saved.push_back(p->grad);
      opt_f.zero_grad();
      opt_h.zero_grad();
      g.backward(l.loss_f);
      for (std::size_t k = 0; k < saved.size(); ++k) opt_h.params()[k]->grad = saved[k];
    }
    opt_f.step();
    opt_h.step(-1.0);
    return log;
  }
  {
    Graph g;
    RngStream r0 = rng.split(0);
    const L2RLosses l = l2r_losses(g, f, h, y, cfg, r0);
    log.loss_f = l.loss_f.value().item();
    check_finite(log.loss_f, "loss_f");
    opt_f.zero_grad();
    g.backward(l.loss_f);
    opt_f.step();
  }
  Graph g;
  RngStream r1 = rng.split(1);
  const L2RLosses l = l2r_losses(g, f, h, y, cfg, r1);
  log.loss_h = l.loss_h.value().item();
  check_finite(log.loss_h, "loss_h");
  opt_h.zero_grad();
  g.backward(l.loss_h);
  opt_h.step(-1.0);
  return log;
}

DiagnosticsRecord l2r_diagnostics(const DenoiserFn& f, Recorruptor& h, const Tensor& x, const Tensor& y, double tau,
                                  std::size_t n_mc, RngStream& rng) {
  require_same_shape("l2r_diagnostics", x, y);
  if (!(tau > 0.0)) throw std::domain_error("l2r_diagnostics: tau must be > 0");
  if (n_mc < 1) throw std::invalid_argument("l2r_diagnostics: n_mc must be >= 1");
  const std::size_t images = y.dim(0);
  const double per = static_cast<double>(y.size() / images);
  const Tensor eps = y - x;
  const Tensor ypos = nonnegative(y);
  std::vector<double> ce, ch;
  for (std::size_t r = 0; r < n_mc; ++r) {
    const Tensor w = standard_normal(y.shape(), rng);
    const Tensor hv = h.forward_value(w, h.config().pg_scale ? &ypos : nullptr);
    const Tensor fy = f(y + tau * hv);
    const std::size_t stride = y.size() / images;
    for (std::size_t i = 0; i < images; ++i) {
      double a = 0.0, b = 0.0;
      for (std::size_t j = i * stride; j < (i + 1) * stride; ++j) {
        a += fy[j] * eps[j];
        b += fy[j] * hv[j];
      }
      ce.push_back(a / per);
      ch.push_back(b / (tau * per));
    }
  }
  auto mean_se = [](const std::vector<double>& v, double& m, double& se) {
    const double n = static_cast<double>(v.size());
    m = 0.0;
    for (double s : v) m += s;
    m /= n;
    double ss = 0.0;
    for (double s : v) ss += (s - m) * (s - m);
    se = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  };
  DiagnosticsRecord d;
  mean_se(ce, d.c_eps, d.c_eps_se);
  mean_se(ch, d.c_h, d.c_h_se);
  d.c_delta = std::abs(d.c_eps - d.c_h);
  return d;
}

double gr2r_rewrite_check(const DenoiserFn& f, Recorruptor& h, const Tensor& y_batch, double tau, RngStream& rng) {
  if (!(tau > 0.0)) throw std::domain_error("gr2r_rewrite_check: tau must be > 0");
  const Tensor w = standard_normal(y_batch.shape(), rng);
  const Tensor ypos = nonnegative(y_batch);
  const Tensor hv = h.forward_value(w, h.config().pg_scale ? &ypos : nullptr);
  const Tensor fy = f(y_batch + tau * hv);
  const Tensor y2 = y_batch - (1.0 / tau) * hv;
  const std::size_t images = y_batch.dim(0), stride = y_batch.size() / images;
  double worst = 0.0;
  for (std::size_t i = 0; i < images; ++i) {
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t j = i * stride; j < (i + 1) * stride; ++j) {
      lhs += (fy[j] - y_batch[j]) * (fy[j] - y_batch[j]) + (2.0 / tau) * fy[j] * hv[j];
      rhs += (fy[j] - y2[j]) * (fy[j] - y2[j]) + (y_batch[j] + y2[j]) * hv[j] / tau;
    }
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

namespace {

Tensor matvec(const Tensor& A, const std::vector<double>& v) {
  const std::size_t n = v.size();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * v[j];
    out[i] = s;
  }
  return out;
}

std::string tau_tag(double tau) {
  std::ostringstream os;
  os << "tau=" << tau;
  return os.str();
}

template <class DrawH>
Report reduction_report(const Tensor& A, double reference, const std::vector<double>& tau_seq, std::size_t n_mc,
                        RngStream& rng, DrawH draw_h) {
  if (A.rank() != 2 || A.dim(0) != A.dim(1)) throw std::invalid_argument("unsure_reduction_check: A must be square");
  if (n_mc < 2) throw std::invalid_argument("unsure_reduction_check: need at least 2 samples");
  const std::size_t n = A.dim(0);
  Report r;
  RngStream ys = rng.split(0);
  std::vector<double> y(n);
  for (double& v : y) v = ys.normal();
  for (std::size_t t = 0; t < tau_seq.size(); ++t) {
    const double tau = tau_seq[t];
    if (!(tau > 0.0)) throw std::domain_error("unsure_reduction_check: tau must be > 0");
    RngStream sub = rng.split(t + 1);
    double m = 0.0, m2 = 0.0;
    std::vector<double> y1(n);
    for (std::size_t k = 0; k < n_mc; ++k) {
      const std::vector<double> hv = draw_h(sub);
      for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + tau * hv[i];
      const Tensor fy = matvec(A, y1);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += fy[i] * hv[i];
      s *= 2.0 / tau;
      m += s;
      m2 += s * s;
    }
    const double nn = static_cast<double>(n_mc);
    m /= nn;
    const double var = std::max(0.0, (m2 - nn * m * m) / (nn - 1.0));
    const double se = std::sqrt(var / nn);
    const double tol = 4.0 * se + 1e-12 * std::max(1.0, std::abs(reference));
    r.add(tau_tag(tau), m, se, tol, std::abs(m - reference) <= tol);
  }
  r.add("reference", reference, 0.0, 0.0, true);
  return r;
}

} // namespace

Report unsure_reduction_check(const Tensor& A, double eta, const std::vector<double>& tau_seq, std::size_t n_mc,
                              RngStream& rng) {
  if (!(eta >= 0.0)) throw std::domain_error("unsure_reduction_check: eta must be >= 0");
  const std::size_t n = A.rank() == 2 ? A.dim(0) : 0;
  double tr = 0.0;
  for (std::size_t i = 0; i < n; ++i) tr += A[i * n + i];
  const double s = std::sqrt(eta);
  return reduction_report(A, 2.0 * eta * tr, tau_seq, n_mc, rng, [n, s](RngStream& r) {
    std::vector<double> h(n);
    for (double& v : h) v = s * r.normal();
    return h;
  });
}

Report unsure_reduction_check_conv(const Tensor& A, const Tensor& kernel, std::size_t height, std::size_t width,
                                   const std::vector<double>& tau_seq, std::size_t n_mc, RngStream& rng) {
  const std::size_t n = height * width;
  if (A.rank() != 2 || A.dim(0) != n) throw std::invalid_argument("unsure_reduction_check_conv: A must be (H W) x (H W)");
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
    throw std::invalid_argument("unsure_reduction_check_conv: kernel must be an odd 2-D array");
  }
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  if (kh > height || kw > width) throw std::invalid_argument("unsure_reduction_check_conv: kernel larger than image");
  // Circular convolution matrix C.
  Tensor C(Shape{n, n});
  for (std::size_t yy = 0; yy < height; ++yy)
    for (std::size_t xx = 0; xx < width; ++xx)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const std::size_t sy = (yy + height + a - kh / 2) % height;
          const std::size_t sx = (xx + width + b - kw / 2) % width;
          C[(yy * width + xx) * n + sy * width + sx] += kernel[a * kw + b];
        }
  double ref = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sigma_ij = 0.0;
      for (std::size_t k = 0; k < n; ++k) sigma_ij += C[i * n + k] * C[j * n + k];
      ref += sigma_ij * A[j * n + i];
    }
  return reduction_report(A, 2.0 * ref, tau_seq, n_mc, rng, [n, &C](RngStream& r) {
    std::vector<double> w(n), h(n, 0.0);
    for (double& v : w) v = r.normal();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h[i] += C[i * n + j] * w[j];
    return h;
  });
}

double stop_gradient_leak(const GraphDenoiser& f, const std::vector<Parameter*>& f_params, Recorruptor& h,
                          const Tensor& y, const L2RConfig& cfg, const RngStream& rng) {
  L2RConfig c = cfg;
  c.stop_gradient = true;
  c.h_objective = HObjective::Lagrangian;
  const std::vector<Parameter*> hp = h.parameters();
  auto zero = [&] {
    for (Parameter* p : hp) p->zero_grad();
    for (Parameter* p : f_params) p->zero_grad();
  };
  zero();
  RngStream r1 = rng;
  Tensor fy1;
  {
    Graph g;
    const L2RLosses l = l2r_losses(g, f, h, y, c, r1);
    fy1 = l.f_y1;
    g.backward(l.loss_f);
  }
  std::vector<Tensor> with_sg;
  for (Parameter* p : hp) with_sg.push_back(p->grad);
  zero();
  {
    // Same draw, f(y1) frozen: only the explicit h factor carries gradient.
    RngStream r2 = rng;
    Graph g;
    Tensor w(y.shape());
    for (double& v : w.storage()) v = r2.normal();
    const Tensor ypos = nonnegative(y);
    Var hv = h.forward(g, w, h.config().pg_scale ? &ypos : nullptr);
    Var fy = g.constant(fy1);
    Var loss = ad::mean(ad::square(fy - g.constant(y))) +
               ad::scale(ad::dot(fy, hv), c.correlation_factor() / static_cast<double>(y.size()));
    g.backward(loss);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < hp.size(); ++k)
    for (std::size_t i = 0; i < hp[k]->grad.size(); ++i) worst = std::max(worst, std::abs(hp[k]->grad[i] - with_sg[k][i]));
  zero();
  return worst;
}

} // namespace recorrupt
