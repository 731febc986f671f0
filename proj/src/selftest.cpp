#include "recorrupt/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "recorrupt/denoiser.hpp"
#include "recorrupt/gradcheck.hpp"
#include "recorrupt/l2r.hpp"
#include "recorrupt/sure.hpp"

namespace recorrupt {

namespace {

constexpr double kGradTol = 1e-5;
constexpr double kPrimitiveStep = 1e-6;
constexpr double kStep = 1e-3;
// Whole networks: a cruder step, so extrapolate, and compare near-zero entries absolutely.
constexpr GradCheckOptions kNetwork{true, 1e-6};

Tensor randn(const Shape& s, RngStream& rng, double scale = 1.0, double shift = 0.0) {
  Tensor t(s);
  for (double& v : t.storage()) v = shift + scale * rng.normal();
  return t;
}

// Values bounded away from zero so kinks and poles stay out of reach of the difference step.
Tensor unif(const Shape& s, RngStream& rng) {
  Tensor t(s);
  for (double& v : t.storage()) v = 4.0 * rng.uniform() - 2.0;
  return t;
}

Tensor away_from_zero(const Shape& s, RngStream& rng) {
  Tensor t(s);
  for (double& v : t.storage()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + rng.uniform());
  return t;
}

Tensor positive(const Shape& s, RngStream& rng) {
  Tensor t(s);
  for (double& v : t.storage()) v = 0.5 + rng.uniform();
  return t;
}

void grad_row(Report& r, const std::string& name, const ScalarFn& f, const Tensor& point) {
  const double e = grad_check(f, point, kPrimitiveStep);
  r.add("grad:" + name, e, 0.0, kGradTol, e < kGradTol);
}

void param_row(Report& r, const std::string& name, const ParamFn& f, const std::vector<Parameter*>& params,
               double step = kStep) {
  const double e = grad_check(f, params, step, kNetwork);
  r.add("grad:" + name, e, 0.0, kGradTol, e < kGradTol);
}

} // namespace

Report run_selftest(RngStream rng) {
  Report r;
  const Shape s{2, 3};
  const Tensor b = randn(s, rng), c = away_from_zero(s, rng);
  // Random weights make every reduction sensitive to each element.
  const Tensor wts = randn(s, rng);
  auto weigh = [wts](Graph& g, Var v) { return ad::dot(v, g.constant(wts)); };

  grad_row(r, "add", [&](Graph& g, Var x) { return weigh(g, x + g.constant(b)); }, unif(s, rng));
  grad_row(r, "sub", [&](Graph& g, Var x) { return weigh(g, g.constant(b) - x); }, unif(s, rng));
  grad_row(r, "mul", [&](Graph& g, Var x) { return weigh(g, x * x); }, unif(s, rng));
  grad_row(r, "div", [&](Graph& g, Var x) { return weigh(g, g.constant(b) / x) + weigh(g, x / g.constant(c)); }, away_from_zero(s, rng));
  grad_row(r, "neg", [&](Graph& g, Var x) { return weigh(g, -x); }, unif(s, rng));
  grad_row(r, "scale", [&](Graph& g, Var x) { return weigh(g, 2.5 * x); }, unif(s, rng));
  grad_row(r, "add_scalar", [&](Graph& g, Var x) { return weigh(g, ad::square(x + 0.3)); }, unif(s, rng));
  {
    const Tensor m = randn(Shape{3, 4}, rng);
    const Tensor w2 = randn(Shape{2, 4}, rng);
    grad_row(r, "matmul.lhs", [&](Graph& g, Var x) { return ad::dot(ad::matmul(x, g.constant(m)), g.constant(w2)); }, unif(s, rng));
    grad_row(r, "matmul.rhs", [&](Graph& g, Var x) { return ad::dot(ad::matmul(g.constant(b), x), g.constant(w2)); }, unif(Shape{3, 4}, rng));
    const Tensor wt = randn(Shape{3, 2}, rng);
    grad_row(r, "transpose", [&](Graph& g, Var x) { return ad::dot(ad::transpose(x), g.constant(wt)); }, unif(s, rng));
  }
  {
    const Tensor img = unif(Shape{2, 2, 5, 6}, rng), k = randn(Shape{3, 2, 3, 3}, rng), wo = randn(Shape{2, 3, 5, 6}, rng);
    grad_row(r, "conv2d.input", [&](Graph& g, Var x) { return ad::dot(ad::conv2d(x, g.constant(k)), g.constant(wo)); }, img);
    grad_row(r, "conv2d.kernel", [&](Graph& g, Var x) { return ad::dot(ad::conv2d(g.constant(img), x), g.constant(wo)); }, k);
  }
  grad_row(r, "sum", [&](Graph&, Var x) { return ad::square(ad::sum(x)); }, unif(s, rng));
  grad_row(r, "mean", [&](Graph&, Var x) { return ad::square(ad::mean(x)); }, unif(s, rng));
  grad_row(r, "dot", [&](Graph& g, Var x) { return ad::dot(x, x * g.constant(b)); }, unif(s, rng));
  grad_row(r, "square", [&](Graph& g, Var x) { return weigh(g, ad::square(x)); }, unif(s, rng));
  grad_row(r, "sqrt", [&](Graph& g, Var x) { return weigh(g, ad::sqrt(x)); }, positive(s, rng));
  grad_row(r, "exp", [&](Graph& g, Var x) { return weigh(g, ad::exp(x)); }, unif(s, rng));
  grad_row(r, "log", [&](Graph& g, Var x) { return weigh(g, ad::log(x)); }, positive(s, rng));
  grad_row(r, "softplus", [&](Graph& g, Var x) { return weigh(g, ad::softplus(x)); }, unif(s, rng));
  grad_row(r, "sigmoid", [&](Graph& g, Var x) { return weigh(g, ad::sigmoid(x)); }, unif(s, rng));
  grad_row(r, "relu", [&](Graph& g, Var x) { return weigh(g, ad::relu(x)); }, away_from_zero(s, rng));
  grad_row(r, "clamp", [&](Graph& g, Var x) { return weigh(g, ad::clamp(x, -0.5, 0.5)); },
           Tensor(s, std::vector<double>{-1.0, -0.3, 0.1, 0.4, 0.9, 2.0}));
  {
    const Tensor wb = randn(Shape{4, 2, 3}, rng), wr = randn(Shape{3, 2}, rng), ws = randn(Shape{2, 2}, rng), wc = randn(Shape{4, 3}, rng);
    grad_row(r, "broadcast_to", [&](Graph& g, Var x) { return ad::dot(ad::broadcast_to(x, Shape{4, 2, 3}), g.constant(wb)); },
             unif(Shape{2, 1}, rng));
    grad_row(r, "reshape", [&](Graph& g, Var x) { return ad::dot(ad::reshape(x, Shape{3, 2}), g.constant(wr)); }, unif(s, rng));
    grad_row(r, "slice", [&](Graph& g, Var x) { return ad::dot(ad::slice(x, 1, 1, 2), g.constant(ws)); }, unif(s, rng));
    grad_row(r, "concat", [&](Graph& g, Var x) { return ad::dot(ad::concat({x, ad::square(x)}, 0), g.constant(wc)); }, unif(s, rng));
  }
  {
    Graph g;
    Var x = g.input(randn(s, rng));
    Var out = ad::sum(ad::stop_gradient(x) * g.constant(b));
    g.backward(out);
    const Tensor gx = x.grad();
    double m = 0.0;
    for (double v : gx.storage()) m = std::max(m, std::abs(v));
    r.add("stop_gradient:blocks", m, 0.0, 0.0, m == 0.0);
  }

  // Full loss graphs on a small denoiser and recorruptor.
  DenoiserConfig dcfg;
  dcfg.layers = 2;
  dcfg.channels = 3;
  ToyCnn net(dcfg, rng);
  // Nudge the biases so no ReLU input sits on its kink.
  for (Parameter* p : net.parameters())
    if (p->name.find("bias") != std::string::npos)
      for (double& v : p->value.storage()) v += 0.05;
  RecorruptorConfig hcfg;
  hcfg.width = 4;
  hcfg.kernel_size = 3;
  Recorruptor h(hcfg, rng);
  for (double& v : h.kernel().value.storage()) v += 0.1 * rng.normal();
  const Tensor y = randn(Shape{2, 1, 6, 6}, rng, 0.2, 0.5);
  GraphDenoiser f = [&net](Graph& g, Var x) { return net.forward(g, x); };
  std::vector<Parameter*> all = net.parameters();
  for (Parameter* p : h.parameters()) all.push_back(p);
  const RngStream draw = rng.split(77);
  {
    L2RConfig lc;
    lc.tau = 0.7;
    lc.stop_gradient = false;
    param_row(r, "l2r_loss",
              [&](Graph& g) {
                RngStream d = draw;
                return l2r_losses(g, f, h, y, lc, d).loss_f;
              },
              all);
    lc.h_objective = HObjective::Gr2rForm;
    param_row(r, "l2r_loss_h_gr2r_form",
              [&](Graph& g) {
                RngStream d = draw;
                return l2r_losses(g, f, h, y, lc, d).loss_h;
              },
              all);
    lc.h_objective = HObjective::Lagrangian;
    lc.stop_gradient = true;
    const double leak = stop_gradient_leak(f, net.parameters(), h, y, lc, draw);
    r.add("stop_gradient:l2r_h_path", leak, 0.0, 1e-10, leak < 1e-10);
  }
  {
    SureConfig sc;
    sc.sigma = 0.1;
    sc.mc_probes = 2;
    sc.fd_step = 1e-3;
    param_row(r, "sure_loss",
              [&](Graph& g) {
                RngStream d = draw;
                return sure_loss(g, f, y, sc, d);
              },
              net.parameters(), 1e-5);
  }

  // Identities.
  DenoiserFn fv = [&net](const Tensor& x) { return net(x); };
  {
    RngStream d = draw;
    const double e = gr2r_rewrite_check(fv, h, y, 0.7, d);
    r.add("identity:gr2r_rewrite", e, 0.0, 1e-9, e < 1e-9);
  }
  {
    const Tensor saved = h.kernel().value;
    h.kernel().value.fill(0.0);
    Graph g;
    L2RConfig lc;
    RngStream d = draw;
    const double l = l2r_losses(g, f, h, y, lc, d).loss_f.value().item();
    const double mc = mse(net(y), y);
    h.kernel().value = saved;
    r.add("identity:l2r_zero_h", std::abs(l - mc), 0.0, 0.0, l == mc);
  }
  {
    RecorruptorConfig pc;
    Recorruptor hp(pc, rng);
    RngStream d = rng.split(78);
    identity_pretrain(hp, 5000, d);
    RngStream fresh = rng.split(79);
    Tensor w(Shape{100000});
    for (double& v : w.storage()) v = fresh.normal();
    const double e = mse(hp.mlp(w), w);
    r.add("identity:mlp_pretrain_mse", e, 0.0, 1e-3, e < 1e-3);
  }
  return r;
}

} // namespace recorrupt
