#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "recorrupt/sure.hpp"

using namespace recorrupt;

namespace {

Tensor diag_apply(const Tensor& y, const std::vector<double>& d) {
  Tensor out = y;
  for (std::size_t i = 0; i < y.size(); ++i) out[i] *= d[i];
  return out;
}

Tensor uniform_image(const Shape& s, RngStream& rng) {
  Tensor t(s);
  for (double& v : t.storage()) v = rng.uniform();
  return t;
}

} // namespace

TEST_CASE("mc_divergence") {
  RngStream rng(1);
  SureConfig cfg;
  cfg.fd_step = 1e-4;
  SUBCASE("diag(1, 2, 3)") {
    cfg.mc_probes = 64;
    const Tensor y(Shape{3}, std::vector<double>{0.2, -0.4, 1.1});
    const double d = mc_divergence([](const Tensor& t) { return diag_apply(t, {1, 2, 3}); }, y, cfg, rng);
    CHECK(std::abs(d - 6.0) < 0.15);
  }
  SUBCASE("constant f") {
    cfg.mc_probes = 5;
    const Tensor y(Shape{10}, 0.3);
    CHECK(mc_divergence([](const Tensor& t) { return Tensor::like(t, 0.7); }, y, cfg, rng) == 0.0);
  }
  SUBCASE("identity on 100 pixels") {
    cfg.mc_probes = 1;
    const Tensor y = uniform_image(Shape{100}, rng);
    for (int rep = 0; rep < 5; ++rep)
      CHECK(mc_divergence([](const Tensor& t) { return t; }, y, cfg, rng) == doctest::Approx(100.0).epsilon(1e-9));
  }
  SUBCASE("linear in f under shared probes") {
    cfg.mc_probes = 3;
    const Tensor y = uniform_image(Shape{20}, rng);
    auto f = [](const Tensor& t) { return map(t, [](double v) { return std::sin(v); }); };
    auto h = [](const Tensor& t) { return map(t, [](double v) { return v * v; }); };
    auto fh = [&](const Tensor& t) { return f(t) + h(t); };
    const RngStream probes = rng.split(9);
    RngStream r1 = probes, r2 = probes, r3 = probes;
    const double a = mc_divergence(f, y, cfg, r1), b = mc_divergence(h, y, cfg, r2), c = mc_divergence(fh, y, cfg, r3);
    CHECK(c == doctest::Approx(a + b).epsilon(1e-9));
  }
  SUBCASE("invalid step") {
    cfg.fd_step = 0.1;
    CHECK_THROWS(mc_divergence([](const Tensor& t) { return t; }, Tensor(Shape{2}), cfg, rng));
  }
}

TEST_CASE("sure_loss") {
  RngStream rng(2);
  SureConfig cfg;
  cfg.sigma = 0.1;
  SUBCASE("identity on 100 pixels") {
    const Tensor y = uniform_image(Shape{100}, rng);
    CHECK(sure_loss([](const Tensor& t) { return t; }, y, cfg, rng) == doctest::Approx(0.02).epsilon(1e-8));
  }
  SUBCASE("zero output") {
    const Tensor y = uniform_image(Shape{50}, rng);
    CHECK(sure_loss([](const Tensor& t) { return Tensor::like(t); }, y, cfg, rng) ==
          doctest::Approx(dot(y, y) / 50.0).epsilon(1e-14));
  }
  SUBCASE("unbiased for a fixed linear denoiser") {
    const double a = 0.6, b = 0.15, s = cfg.sigma;
    const Tensor x = uniform_image(Shape{1, 1, 4, 4}, rng);
    auto f = [&](const Tensor& t) { return map(t, [&](double v) { return a * v + b; }); };
    double truth = 0.0;
    for (double xi : x.storage()) truth += ((a - 1) * xi + b) * ((a - 1) * xi + b) + a * a * s * s;
    truth /= double(x.size());
    const std::size_t n = 100000;
    double m = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Tensor y = corrupt(x, NoiseModel::gaussian(s), rng);
      const double v = sure_loss(f, y, cfg, rng) - s * s;
      m += v;
      m2 += v * v;
    }
    m /= double(n);
    const double se = std::sqrt((m2 / double(n) - m * m) / double(n));
    CHECK(std::abs(m - truth) < 4 * se);
  }
  SUBCASE("graph version matches the value version") {
    const Tensor y = uniform_image(Shape{1, 1, 5, 5}, rng);
    GraphDenoiser gf = [](Graph&, Var t) { return ad::sigmoid(t); };
    DenoiserFn vf = [](const Tensor& t) { return map(t, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }); };
    const RngStream probes = rng.split(4);
    RngStream r1 = probes, r2 = probes;
    Graph g;
    const double lg = sure_loss(g, gf, y, cfg, r1).value().item();
    CHECK(lg == doctest::Approx(sure_loss(vf, y, cfg, r2)).epsilon(1e-12));
  }
}

TEST_CASE("unsure objective") {
  RngStream rng(3);
  SureConfig cfg;
  const Tensor y = uniform_image(Shape{1, 1, 6, 6}, rng);
  SUBCASE("eta = 0 is the measurement-consistency loss") {
    UnsureState st;
    Graph g;
    GraphDenoiser f = [](Graph&, Var t) { return ad::square(t); };
    const UnsureTerms t = unsure_objective(g, f, y, st, cfg, rng);
    const Tensor fy = map(y, [](double v) { return v * v; });
    CHECK(t.loss_f.value().item() == doctest::Approx(mse(fy, y)).epsilon(1e-14));
  }
  SUBCASE("identity gives ascent gradient 2 and eta moves up") {
    UnsureState st;
    st.step = 0.01;
    Graph g;
    const UnsureTerms t = unsure_objective(g, [](Graph&, Var v) { return v; }, y, st, cfg, rng);
    CHECK(t.ascent_grad == doctest::Approx(2.0).epsilon(1e-9));
    unsure_ascent(st, t.ascent_grad);
    CHECK(st.eta == doctest::Approx(0.02).epsilon(1e-9));
  }
  SUBCASE("eta weights the divergence") {
    UnsureState st;
    st.eta = 0.3;
    Graph g;
    const UnsureTerms t = unsure_objective(g, [](Graph&, Var v) { return 0.5 * v; }, y, st, cfg, rng);
    // f = y / 2: residual y / 2, divergence n / 2.
    CHECK(t.loss_f.value().item() == doctest::Approx(0.25 * dot(y, y) / 36.0 + 2 * 0.3 * 0.5).epsilon(1e-8));
  }
  SUBCASE("invalid step") {
    UnsureState st;
    st.step = 0.0;
    CHECK_THROWS(unsure_ascent(st, 1.0));
  }
}

TEST_CASE("correlated unsure") {
  RngStream rng(4);
  SureConfig cfg;
  cfg.fd_step = 1e-4;
  const Tensor y = uniform_image(Shape{1, 1, 3, 3}, rng);
  SUBCASE("delta kernel reduces to scalar unsure with eta = 1") {
    UnsureState cst;
    Tensor k(Shape{1, 1, 3, 3});
    k[4] = 1.0;
    cst.kernel = Parameter("k", k);
    UnsureState sst;
    sst.eta = 1.0;
    GraphDenoiser f = [](Graph&, Var v) { return ad::sigmoid(2.0 * v); };
    const RngStream probes = rng.split(1);
    RngStream r1 = probes, r2 = probes;
    Graph g1, g2;
    const double lc = correlated_unsure_objective(g1, f, y, cst, cfg, r1).loss_f.value().item();
    const double ls = unsure_objective(g2, f, y, sst, cfg, r2).loss_f.value().item();
    CHECK(lc == doctest::Approx(ls).epsilon(1e-10));
  }
  SUBCASE("probe mean estimates tr(Sigma A)") {
    // A diagonal on the 9 pixels; K the zero-padded convolution matrix of k, Sigma = K K^T.
    std::vector<double> a = {1.0, 0.5, 2.0, 1.5, 1.0, 0.2, 0.8, 1.2, 0.6};
    auto fa = [&](const Tensor& t) { return diag_apply(t, a); };
    // tr(K^T A K) = sum_ij A_ii K_ij^2 with K the zero-padded convolution matrix of k.
    auto trace_of = [&](const Tensor& k) {
      double trace = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        Tensor e(Shape{1, 1, 3, 3});
        e[j] = 1.0;
        const Tensor col = conv2d(e, k);
        for (std::size_t i = 0; i < 9; ++i) trace += a[i] * col[i] * col[i];
      }
      return trace;
    };
    cfg.mc_probes = 64;
    {
      const Tensor k(Shape{1, 1, 3, 3}, std::vector<double>{0.0, 0.01, 0.0, 0.02, 1.1, 0.01, 0.0, 0.01, 0.0});
      CHECK(std::abs(correlated_divergence(fa, y, k, cfg, rng) - trace_of(k)) < 0.15);
    }
    {
      const Tensor k(Shape{1, 1, 3, 3}, std::vector<double>{0.0, 0.1, 0.0, 0.2, 0.9, 0.1, 0.0, 0.1, 0.0});
      const int reps = 2000;
      double m = 0.0, m2 = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        const double e = correlated_divergence(fa, y, k, cfg, rng);
        m += e;
        m2 += e * e;
      }
      m /= reps;
      const double se = std::sqrt((m2 / reps - m * m) / reps);
      CHECK(std::abs(m - trace_of(k)) < 4 * se);
    }
  }
  SUBCASE("zero kernel") {
    UnsureState st;
    st.kernel = Parameter("k", Tensor(Shape{1, 1, 3, 3}));
    Graph g;
    const UnsureTerms t = correlated_unsure_objective(g, [](Graph&, Var v) { return v; }, y, st, cfg, rng);
    CHECK(t.divergence == 0.0);
    CHECK(t.loss_f.value().item() == 0.0);
  }
  SUBCASE("ascent grows a kernel against a positive divergence") {
    UnsureState st;
    st.step = 0.1;
    Tensor k(Shape{1, 1, 3, 3});
    k[4] = 0.1;
    st.kernel = Parameter("k", k);
    Graph g;
    const UnsureTerms t = correlated_unsure_objective(g, [](Graph&, Var v) { return v; }, y, st, cfg, rng);
    g.backward(t.loss_f);
    correlated_unsure_ascent(st);
    // tr(K K^T) / n * 2 = 2 k^2 for a centred delta, so dL/dk = 4 k.
    CHECK(st.kernel.value[4] == doctest::Approx(0.1 + 0.1 * 0.4).epsilon(1e-6));
  }
  SUBCASE("kernel larger than the image") {
    UnsureState st;
    st.kernel = Parameter("k", Tensor(Shape{1, 1, 5, 5}));
    Graph g;
    CHECK_THROWS(correlated_unsure_objective(g, [](Graph&, Var v) { return v; }, y, st, cfg, rng));
  }
}

TEST_CASE("estimate_ak") {
  RngStream rng(5);
  const NoiseModel m = NoiseModel::gaussian(0.2);
  SUBCASE("gaussian k = 1 at alpha = 0.1") {
    const AkResult r = estimate_ak(m, 0.5, 1, {0.2, 0.1}, 1000000, rng);
    CHECK(std::abs(r.points[1].value - 0.9 * 0.04) < 4 * r.points[1].se);
  }
  SUBCASE("gaussian limit") {
    const AkResult r = estimate_ak(m, 0.5, 1, {0.5, 0.2, 0.1, 0.05, 0.02}, 1000000, rng);
    CHECK(std::abs(r.limit - 0.04) < 0.03 * 0.04);
  }
  SUBCASE("affine in alpha with slope -sigma^2") {
    std::vector<double> alphas = {0.5, 0.4, 0.3, 0.2, 0.1, 0.05};
    const AkResult r = estimate_ak(m, 0.5, 1, alphas, 1000000, rng);
    double mx = 0, my = 0;
    for (const AkPoint& p : r.points) {
      mx += p.alpha;
      my += p.value;
    }
    mx /= alphas.size();
    my /= alphas.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (const AkPoint& p : r.points) {
      sxy += (p.alpha - mx) * (p.value - my);
      sxx += (p.alpha - mx) * (p.alpha - mx);
      syy += (p.value - my) * (p.value - my);
    }
    CHECK(sxy * sxy / (sxx * syy) > 0.99);
    CHECK(sxy / sxx == doctest::Approx(-0.04).epsilon(0.05));
  }
  SUBCASE("k = 0 vanishes") {
    for (const NoiseModel& nm : {m, NoiseModel::poisson(0.05), NoiseModel::gamma_noise(3.0)}) {
      const AkResult r = estimate_ak(nm, 0.5, 0, {0.4, 0.2, 0.1}, 200000, rng);
      for (const AkPoint& p : r.points) CHECK(std::abs(p.value) < 4 * p.se + 1e-15);
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS(estimate_ak(m, 0.5, 1, {0.1}, 1000, rng));
    CHECK_THROWS(estimate_ak(m, 0.5, 1, {0.1, 0.2}, 1000, rng));
    CHECK_THROWS(estimate_ak(m, 0.5, 1, {0.7, 0.2}, 1000, rng));
  }
}
