#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recorrupt/l2r.hpp"

using namespace recorrupt;

namespace {

Tensor normal_tensor(const Shape& s, RngStream& rng, double scale = 1.0, double shift = 0.0) {
  Tensor t(s);
  for (double& v : t.storage()) v = shift + scale * rng.normal();
  return t;
}

// Depth-1 map with softplus(raw) = 1 and zero bias, so m(w) = w.
Recorruptor identity_recorruptor(std::size_t kernel_size, double kernel_init, RngStream& rng) {
  RecorruptorConfig cfg;
  cfg.depth = 1;
  cfg.width = 1;
  cfg.kernel_size = kernel_size;
  cfg.kernel_init = kernel_init;
  Recorruptor h(cfg, rng);
  h.layers()[0].value.fill(std::log(std::exp(1.0) - 1.0));
  h.layers()[1].value.fill(0.0);
  return h;
}

double weight_of(const Recorruptor& h) { return std::log1p(std::exp(h.layers()[0].value[0])); }

struct Lin {
  Parameter w{"f.w", Tensor::scalar(0.8)};
  Parameter b{"f.b", Tensor::scalar(0.05)};
  Var operator()(Graph& g, Var x) {
    return ad::broadcast_to(ad::reshape(g.parameter(w), Shape{1, 1, 1, 1}), x.shape()) * x +
           ad::broadcast_to(ad::reshape(g.parameter(b), Shape{1, 1, 1, 1}), x.shape());
  }
};

} // namespace

TEST_CASE("recorruptor forward") {
  RngStream rng(1);
  SUBCASE("identity map and delta kernel give the standardized input") {
    Recorruptor h = identity_recorruptor(3, 1.0, rng);
    const Tensor w = normal_tensor(Shape{2, 1, 8, 8}, rng);
    double m = 0.0, v = 0.0;
    for (double x : w.storage()) m += x;
    m /= double(w.size());
    for (double x : w.storage()) v += (x - m) * (x - m);
    v /= double(w.size());
    const Tensor out = h.forward_value(w);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(out[i] == doctest::Approx((w[i] - m) / std::sqrt(v)).epsilon(1e-10));
  }
  SUBCASE("monotone on a grid for random weights") {
    for (int rep = 0; rep < 5; ++rep) {
      RecorruptorConfig cfg;
      Recorruptor h(cfg, rng);
      for (Parameter* p : h.mlp_parameters())
        for (double& x : p->value.storage()) x = 3.0 * rng.normal();
      double prev = -1e300;
      for (int i = -30; i <= 30; ++i) {
        const double y = h.mlp_scalar(i / 10.0);
        CHECK(y >= prev);
        prev = y;
      }
    }
  }
  SUBCASE("standardization of a large batch") {
    RecorruptorConfig cfg;
    Recorruptor h(cfg, rng);
    const Tensor w = normal_tensor(Shape{1, 1, 100, 100}, rng);
    const Tensor out = h.forward_value(w);
    double m = 0.0, v = 0.0;
    for (double x : out.storage()) m += x;
    m /= double(out.size());
    for (double x : out.storage()) v += (x - m) * (x - m);
    v /= double(out.size());
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
  SUBCASE("sqrt(y) scaling") {
    RecorruptorConfig cfg;
    cfg.pg_scale = true;
    Recorruptor h(cfg, rng);
    const Tensor w = normal_tensor(Shape{1, 1, 4, 4}, rng);
    Tensor y(Shape{1, 1, 4, 4}, 0.25);
    RecorruptorConfig plain_cfg = cfg;
    plain_cfg.pg_scale = false;
    const Tensor scaled = h.forward_value(w, &y);
    y[3] = -0.1;
    CHECK_THROWS(h.forward_value(w, &y));
    CHECK_THROWS(h.forward_value(w));
    // Same parameters without scaling: compare through the mlp path.
    Graph g;
    const Tensor base = Recorruptor::normalize(h.mlp(g, g.constant(w))).value();
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(scaled[i] == doctest::Approx(0.5 * base[i]).epsilon(1e-12));
  }
  SUBCASE("config checks") {
    RecorruptorConfig cfg;
    cfg.kernel_size = 2;
    CHECK_THROWS(Recorruptor(cfg, rng));
    cfg.kernel_size = 3;
    cfg.depth = 0;
    CHECK_THROWS(Recorruptor(cfg, rng));
  }
}

TEST_CASE("identity pretraining") {
  RngStream rng(2);
  SUBCASE("default map reaches the target on fresh draws") {
    RecorruptorConfig cfg;
    Recorruptor h(cfg, rng);
    RngStream r = rng.split(1);
    identity_pretrain(h, 5000, r);
    const Tensor w = normal_tensor(Shape{100000}, rng);
    CHECK(mse(h.mlp(w), w) < 1e-3);
  }
  SUBCASE("width-1 linear map goes to weight 1 and bias 0") {
    RecorruptorConfig cfg;
    cfg.depth = 1;
    cfg.width = 1;
    Recorruptor h(cfg, rng);
    h.layers()[0].value.fill(-1.0);
    h.layers()[1].value.fill(0.3);
    RngStream r = rng.split(2);
    identity_pretrain(h, 5000, r);
    CHECK(weight_of(h) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(h.layers()[1].value[0]) < 0.05);
  }
  SUBCASE("zero steps leave h unchanged") {
    RecorruptorConfig cfg;
    Recorruptor h(cfg, rng);
    std::vector<Tensor> before;
    for (Parameter* p : h.parameters()) before.push_back(p->value);
    RngStream r = rng.split(3);
    identity_pretrain(h, 0, r);
    std::size_t k = 0;
    for (Parameter* p : h.parameters()) CHECK(p->value.storage() == before[k++].storage());
  }
}

TEST_CASE("l2r losses") {
  RngStream rng(3);
  const Tensor y = normal_tensor(Shape{2, 1, 6, 6}, rng, 0.2, 0.5);
  SUBCASE("zero denoiser ignores h") {
    RecorruptorConfig cfg;
    cfg.kernel_size = 3;
    Recorruptor h(cfg, rng);
    Graph g;
    L2RConfig lc;
    lc.tau = 0.7;
    const double l = l2r_losses(g, [](Graph&, Var v) { return 0.0 * v; }, h, y, lc, rng).loss_f.value().item();
    CHECK(l == doctest::Approx(dot(y, y) / double(y.size())).epsilon(1e-14));
  }
  SUBCASE("identity denoiser: E loss = tau^2 + 2 for standardized h") {
    Recorruptor h = identity_recorruptor(1, 1.0, rng);
    for (double tau : {0.5, 1.0, 2.0}) {
      L2RConfig lc;
      lc.tau = tau;
      double m = 0.0, m2 = 0.0;
      const int n = 4000;
      for (int k = 0; k < n; ++k) {
        Graph g;
        const double l = l2r_losses(g, [](Graph&, Var v) { return v; }, h, y, lc, rng).loss_f.value().item();
        m += l;
        m2 += l * l;
      }
      m /= n;
      const double se = std::sqrt((m2 / n - m * m) / n);
      CHECK(std::abs(m - (tau * tau + 2.0)) < 4 * se + 1e-12);
    }
  }
  SUBCASE("h = 0 gives measurement consistency exactly") {
    Recorruptor h = identity_recorruptor(3, 0.0, rng);
    Graph g;
    L2RConfig lc;
    const double l = l2r_losses(g, [](Graph&, Var v) { return ad::sigmoid(v); }, h, y, lc, rng).loss_f.value().item();
    const Tensor fy = map(y, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    CHECK(l == mse(fy, y));
  }
  SUBCASE("correlation factor") {
    L2RConfig lc;
    lc.tau = 0.5;
    CHECK(lc.correlation_factor() == 4.0);
    lc.corr_scale = CorrelationScale::Two;
    CHECK(lc.correlation_factor() == 2.0);
    lc.corr_scale = CorrelationScale::One;
    CHECK(lc.correlation_factor() == 1.0);
    lc.tau = 0.0;
    CHECK_THROWS(lc.validate());
  }
}

TEST_CASE("stop-gradient keeps f's Jacobian out of the h update") {
  RngStream rng(4);
  RecorruptorConfig cfg;
  cfg.kernel_size = 3;
  Recorruptor h(cfg, rng);
  Lin lin;
  GraphDenoiser f = [&](Graph& g, Var x) { return ad::softplus(lin(g, x)); };
  const Tensor y = normal_tensor(Shape{1, 1, 5, 5}, rng, 0.2, 0.5);
  L2RConfig lc;
  lc.stop_gradient = true;
  CHECK(stop_gradient_leak(f, {&lin.w, &lin.b}, h, y, lc, rng.split(1)) < 1e-10);

  // Without stop-gradient, the h gradient does depend on f's Jacobian.
  auto h_grad = [&](bool stop) {
    for (Parameter* p : h.parameters()) p->zero_grad();
    L2RConfig c = lc;
    c.stop_gradient = stop;
    RngStream r = rng.split(2);
    Graph g;
    g.backward(l2r_losses(g, f, h, y, c, r).loss_f);
    return h.kernel().grad;
  };
  const Tensor with = h_grad(true), without = h_grad(false);
  double diff = 0.0;
  for (std::size_t i = 0; i < with.size(); ++i) diff = std::max(diff, std::abs(with[i] - without[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("minmax step") {
  RngStream rng(5);
  const Tensor y = normal_tensor(Shape{2, 1, 6, 6}, rng, 0.2, 0.5);
  auto run = [&](double f_lr, double h_lr, bool joint, std::vector<Tensor>& f_after, std::vector<Tensor>& h_after) {
    RngStream init(9);
    RecorruptorConfig cfg;
    cfg.kernel_size = 3;
    Recorruptor h(cfg, init);
    Lin lin;
    GraphDenoiser f = [&](Graph& g, Var x) { return lin(g, x); };
    L2RConfig lc;
    lc.joint = joint;
    AdamW opt_f({&lin.w, &lin.b}, AdamWConfig{f_lr, 0.9, 0.999, 1e-8, 0.01});
    AdamW opt_h(h.parameters(), AdamWConfig{h_lr, 0.9, 0.999, 1e-8, 0.0});
    RngStream steps(10);
    for (int s = 0; s < 5; ++s) minmax_step(f, h, y, lc, opt_f, opt_h, steps);
    f_after = {lin.w.value, lin.b.value};
    h_after.clear();
    for (Parameter* p : h.parameters()) h_after.push_back(p->value);
  };
  std::vector<Tensor> f0, h0, f1, h1;
  SUBCASE("zero h learning rate freezes h") {
    RngStream init(9);
    RecorruptorConfig cfg;
    cfg.kernel_size = 3;
    Recorruptor ref(cfg, init);
    run(1e-2, 0.0, true, f0, h0);
    std::size_t k = 0;
    for (Parameter* p : ref.parameters()) CHECK(p->value.storage() == h0[k++].storage());
    CHECK(f0[0].item() != 0.8);
  }
  SUBCASE("zero f learning rate freezes f") {
    run(0.0, 1e-2, false, f0, h0);
    CHECK(f0[0].item() == 0.8);
    CHECK(f0[1].item() == 0.05);
  }
  SUBCASE("runs are reproducible in both modes") {
    for (bool joint : {true, false}) {
      run(1e-2, 1e-2, joint, f0, h0);
      run(1e-2, 1e-2, joint, f1, h1);
      for (std::size_t i = 0; i < f0.size(); ++i) CHECK(f0[i].storage() == f1[i].storage());
      for (std::size_t i = 0; i < h0.size(); ++i) CHECK(h0[i].storage() == h1[i].storage());
    }
  }
  SUBCASE("non-finite loss aborts") {
    RngStream init(9);
    RecorruptorConfig cfg;
    Recorruptor h(cfg, init);
    GraphDenoiser f = [](Graph&, Var x) { return ad::log(x); };
    Parameter dummy("f.d", Tensor::scalar(0.0));
    AdamW opt_f({&dummy}, AdamWConfig{}), opt_h(h.parameters(), AdamWConfig{});
    Tensor bad = y;
    bad[0] = -50.0;
    RngStream r(1);
    CHECK_THROWS(minmax_step(f, h, bad, L2RConfig{}, opt_f, opt_h, r));
  }
}

TEST_CASE("diagnostics") {
  RngStream rng(6);
  const double sigma = 0.1;
  const Tensor x = normal_tensor(Shape{4, 1, 16, 16}, rng, 0.1, 0.5);
  const Tensor y = corrupt(x, NoiseModel::gaussian(sigma), rng);
  SUBCASE("constant denoiser") {
    Recorruptor h = identity_recorruptor(1, sigma, rng);
    const DiagnosticsRecord d = l2r_diagnostics([](const Tensor& t) { return Tensor::like(t, 0.4); }, h, x, y, 1.0, 50, rng);
    // Given the data, C_eps = 0.4 mean(eps); over data its SE is 0.4 sigma / sqrt(n).
    double me = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) me += y[i] - x[i];
    me /= double(y.size());
    CHECK(d.c_eps == doctest::Approx(0.4 * me).epsilon(1e-9));
    CHECK(std::abs(d.c_eps) < 4 * 0.4 * sigma / std::sqrt(double(y.size())));
    // h has exactly zero mean over the batch.
    CHECK(std::abs(d.c_h) < 1e-12);
  }
  SUBCASE("identity denoiser with h at the true scale") {
    // f(y1) = x + eps + tau h: given the data C_eps = (x^T eps + |eps|^2) / n, with expectation sigma^2,
    // and C_h = |h|^2 / n = sigma^2.
    Recorruptor h = identity_recorruptor(1, sigma, rng);
    const DiagnosticsRecord d = l2r_diagnostics([](const Tensor& t) { return t; }, h, x, y, 1.0, 200, rng);
    double eps2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) eps2 += y[i] * (y[i] - x[i]);
    eps2 /= double(y.size());
    CHECK(std::abs(d.c_eps - eps2) < 4 * d.c_eps_se + 1e-12);
    CHECK(std::abs(d.c_h - sigma * sigma) < 4 * d.c_h_se + 1e-12);
    CHECK(d.c_delta == doctest::Approx(std::abs(d.c_eps - d.c_h)));
  }
}

TEST_CASE("gr2r rewrite") {
  RngStream rng(7);
  SUBCASE("hand-expanded single pixel at tau = 1") {
    const double y = 0.3, h = 0.5, tau = 1.0, y1 = y + tau * h, f = y1 * y1, y2 = y - h / tau;
    const double lhs = (f - y) * (f - y) + 2.0 / tau * f * h;
    const double rhs = (f - y2) * (f - y2) + (y + y2) * h / tau;
    CHECK(lhs == doctest::Approx(0.7556).epsilon(1e-12));
    CHECK(rhs == doctest::Approx(0.7556).epsilon(1e-12));
  }
  SUBCASE("random f, h, y") {
    RecorruptorConfig cfg;
    cfg.kernel_size = 3;
    Recorruptor h(cfg, rng);
    for (double& v : h.kernel().value.storage()) v += 0.2 * rng.normal();
    const Tensor y = normal_tensor(Shape{3, 1, 8, 8}, rng, 0.3, 0.5);
    for (double tau : {0.3, 1.0, 2.5})
      CHECK(gr2r_rewrite_check([](const Tensor& t) { return map(t, [](double v) { return std::tanh(2 * v); }); }, h, y,
                               tau, rng) < 1e-9);
  }
  SUBCASE("h = 0") {
    Recorruptor h = identity_recorruptor(1, 0.0, rng);
    const Tensor y = normal_tensor(Shape{2, 1, 4, 4}, rng);
    CHECK(gr2r_rewrite_check([](const Tensor& t) { return 0.5 * t; }, h, y, 1.0, rng) < 1e-15);
  }
}

TEST_CASE("unsure reductions for linear maps") {
  RngStream rng(8);
  const std::vector<double> taus = {0.25, 0.5, 1.0, 2.0};
  SUBCASE("A = I, n = 4, eta = 0.25") {
    Tensor A(Shape{4, 4});
    for (std::size_t i = 0; i < 4; ++i) A[i * 4 + i] = 1.0;
    const Report r = unsure_reduction_check(A, 0.25, taus, 100000, rng);
    CHECK(r.all_pass());
    for (const ReportRow& row : r.rows)
      if (row.name.rfind("tau=", 0) == 0) CHECK(std::abs(row.value - 2.0) < 4 * row.se + 1e-12);
  }
  SUBCASE("A = 0") {
    const Report r = unsure_reduction_check(Tensor(Shape{4, 4}), 0.7, taus, 1000, rng);
    for (const ReportRow& row : r.rows) CHECK(row.value == 0.0);
  }
  SUBCASE("general A matches 2 eta tr(A) for every tau") {
    Tensor A = normal_tensor(Shape{5, 5}, rng);
    const double eta = 0.4;
    double tr = 0.0;
    for (std::size_t i = 0; i < 5; ++i) tr += A[i * 5 + i];
    const Report r = unsure_reduction_check(A, eta, taus, 200000, rng);
    for (const ReportRow& row : r.rows)
      if (row.name.rfind("tau=", 0) == 0) CHECK(std::abs(row.value - 2 * eta * tr) < 4 * row.se);
  }
  SUBCASE("convolutional h with A = I gives 2 n sum k^2") {
    const std::size_t H = 5, W = 5, n = H * W;
    Tensor A(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) A[i * n + i] = 1.0;
    const Tensor k(Shape{3, 3}, std::vector<double>{0.05, 0.1, 0.05, 0.1, 0.6, 0.1, 0.05, 0.1, 0.05});
    double k2 = 0.0;
    for (double v : k.storage()) k2 += v * v;
    const Report r = unsure_reduction_check_conv(A, k, H, W, taus, 100000, rng);
    for (const ReportRow& row : r.rows)
      if (row.name.rfind("tau=", 0) == 0) CHECK(std::abs(row.value - 2.0 * n * k2) < 4 * row.se);
  }
}
