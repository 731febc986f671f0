#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recorrupt/config.hpp"
#include "recorrupt/io.hpp"
#include "recorrupt/l2r.hpp"
#include "recorrupt/selftest.hpp"
#include "recorrupt/splitting.hpp"
#include "recorrupt/sure.hpp"
#include "recorrupt/train.hpp"

using namespace recorrupt;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const char* fmt, auto... args) {
    pass = pass && ok;
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome nef_splitting(std::uint64_t seed) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<NoiseModel> models = {NoiseModel::gaussian(0.1), NoiseModel::poisson(0.05), NoiseModel::gamma_noise(8.0),
                                          NoiseModel::binomial(16)};
  const std::vector<double> grid = {0.1, 0.3, 0.5, 0.7, 0.9};
  RngStream root(seed);
  std::uint64_t k = 0;
  for (const NoiseModel& m : models) {
    for (double alpha : {0.25, 0.5}) {
      RngStream rng = root.split(k++);
      const Report r = nef_split_validate(m, grid, alpha, 1000000, rng);
      double worst_z = 0.0, worst_v = 0.0, worst_c = 0.0;
      for (const ReportRow& row : r.rows) {
        if (row.name.starts_with("mean_")) worst_z = std::max(worst_z, row.value);
        if (row.name.starts_with("var_ratio_y1")) worst_v = std::max(worst_v, std::abs(row.value * (1.0 - alpha) - 1.0));
        if (row.name.starts_with("var_ratio_y2")) worst_v = std::max(worst_v, std::abs(row.value * alpha - 1.0));
        if (row.name.starts_with("corr_")) worst_c = std::max(worst_c, std::abs(row.value));
      }
      o.require(r.all_pass(), "%s alpha=%.2f: max |mean z| %.2f, max |var ratio - 1| %.4f, max |corr| %.4f", m.name().c_str(),
                alpha, worst_z, worst_v, worst_c);
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "runtime %.1f s (limit 120 s)", secs);
  return o;
}

Outcome conditional_law(std::uint64_t seed) {
  Outcome o;
  const NoiseModel m = NoiseModel::poisson(0.05);
  const double alpha = 0.25;
  RngStream root(seed);
  std::uint64_t k = 0;
  for (std::int64_t y : {4, 6, 10}) {
    RngStream r1 = root.split(k++), r2 = root.split(k++);
    const ConditionalLaw a = conditional_split_law(m, 0.2, y, alpha, 100000, r1);
    const ConditionalLaw b = conditional_split_law(m, 0.4, y, alpha, 100000, r2);
    const double between = total_variation(a.pmf, b.pmf);
    o.require(a.tv < 0.01 && b.tv < 0.01 && between < 0.01, "y=%lld: TV to Bin(y, %.2f) %.4f (x=0.2) %.4f (x=0.4), between x %.4f",
              static_cast<long long>(y), alpha, a.tv, b.tv, between);
  }
  return o;
}

Outcome moment_checker(std::uint64_t seed) {
  Outcome o;
  const double s = 0.1;
  RngStream rng(seed);
  const ConditionReport g = check_moment_conditions(DistSpec::normal(0, s), DistSpec::normal(0, s), 1.0, 1000000, rng);
  o.require(g.n1.pass && g.n3.pass, "gaussian/gaussian tau=1: n=1 %s, n=3 %s", g.n1.pass ? "pass" : "fail",
            g.n3.pass ? "pass" : "fail");
  const ConditionReport l =
      check_moment_conditions(DistSpec::laplace(0, s / std::sqrt(2.0)), DistSpec::normal(0, s), 1.0, 1000000, rng);
  const double ratio = l.n3.lhs / l.n3.rhs;
  o.require(!l.n3.pass, "laplace/gaussian variance matched: n=3 %s", l.n3.pass ? "pass" : "fail");
  o.require(std::abs(ratio - 0.5) <= 0.05, "n=3 LHS/RHS = %.4f (target 0.5 +- 10%%)", ratio);
  return o;
}

Outcome sure_checks(std::uint64_t seed) {
  Outcome o;
  const std::size_t n = 64;
  const double sigma = 0.1;
  RngStream rng(seed);
  std::vector<double> A(n * n), b(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) A[i * n + j] = 0.1 * rng.normal() / std::sqrt(double(n));
    A[i * n + i] += 0.5;
    b[i] = 0.05 * rng.normal();
    x[i] = rng.uniform();
  }
  const DenoiserFn f = [&](const Tensor& y) {
    Tensor out = Tensor::like(y);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * y[j];
      out[i] = acc;
    }
    return out;
  };
  // E ||A y + b - x||^2 / n = (||(A - I) x + b||^2 + sigma^2 ||A||_F^2) / n.
  double bias2 = 0.0, frob = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = b[i] - x[i];
    for (std::size_t j = 0; j < n; ++j) {
      r += A[i * n + j] * x[j];
      frob += A[i * n + j] * A[i * n + j];
    }
    bias2 += r * r;
  }
  const double true_mse = (bias2 + sigma * sigma * frob) / double(n);
  SureConfig cfg;
  cfg.sigma = sigma;
  const Tensor clean(Shape{1, 1, 8, 8}, x);
  const std::size_t draws = 100000;
  double m = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Tensor y = clean;
    for (double& v : y.storage()) v += sigma * rng.normal();
    const double d = sure_loss(f, y, cfg, rng) - sigma * sigma - true_mse;
    m += d;
    m2 += d * d;
  }
  m /= double(draws);
  const double se = std::sqrt((m2 / double(draws) - m * m) / double(draws - 1));
  o.require(std::abs(m) < 4 * se, "mean(SURE) - sigma^2 - MSE = %.3e, SE %.3e (true MSE %.6f)", m, se, true_mse);

  const Tensor d(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  SureConfig probes;
  probes.mc_probes = 64;
  const double div = mc_divergence([&d](const Tensor& y) { return d * y; }, Tensor(Shape{1, 1, 1, 3}, 0.3), probes, rng);
  o.require(std::abs(div - 6.0) < 0.15, "div diag(1,2,3) = %.6f at 64 probes", div);
  return o;
}

Outcome ak_checks(std::uint64_t seed) {
  Outcome o;
  RngStream rng(seed);
  const AkResult r = estimate_ak(NoiseModel::gaussian(0.2), 0.5, 1, {0.2, 0.1, 0.05}, 4000000, rng);
  for (const AkPoint& p : r.points) {
    const double target = (1.0 - p.alpha) * 0.04;
    const double rel = std::abs(p.value - target) / target;
    o.require(rel < 0.02, "alpha=%.2f: %.6f vs %.6f (rel err %.4f, SE %.2e)", p.alpha, p.value, target, rel, p.se);
  }
  const double rel = std::abs(r.limit - 0.04) / 0.04;
  o.require(rel < 0.03, "limit %.6f vs 0.04 (rel err %.4f)", r.limit, rel);
  return o;
}

Outcome algebraic_identities(std::uint64_t seed) {
  Outcome o;
  RngStream rng(seed);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    RngStream ri = rng.split(std::uint64_t(i));
    DenoiserConfig dc;
    dc.channels = 4;
    ToyCnn net(dc, ri);
    RecorruptorConfig rc;
    rc.kernel_size = 3;
    Recorruptor h(rc, ri);
    for (double& v : h.kernel().value.storage()) v += 0.2 * ri.normal();
    Tensor y(Shape{2, 1, 8, 8});
    for (double& v : y.storage()) v = ri.uniform() + 0.1 * ri.normal();
    const double tau = 0.2 + 1.8 * ri.uniform();
    worst = std::max(worst, gr2r_rewrite_check([&net](const Tensor& t) { return net(t); }, h, y, tau, ri));
  }
  o.require(worst < 1e-9, "gr2r rewrite: worst of 100 instances %.3e", worst);
  for (int i = 0; i < 10; ++i) {
    RngStream ri = rng.split(1000 + std::uint64_t(i));
    const std::size_t n = 4 + ri.next_u64() % 13;
    Tensor A(Shape{n, n});
    for (double& v : A.storage()) v = ri.normal();
    const double eta = 0.01 + ri.uniform(), tau = 0.1 + 1.9 * ri.uniform();
    const Report r = unsure_reduction_check(A, eta, {tau}, 200000, ri);
    const ReportRow& row = r.rows.front();
    o.require(row.pass, "n=%zu eta=%.3f tau=%.3f: %.4f vs 2 eta tr(A) = %.4f (SE %.4f)", n, eta, tau, row.value,
              r.find("reference").value, row.se);
  }
  return o;
}

Outcome gradient_integrity(std::uint64_t seed) {
  Outcome o;
  const Report r = run_selftest(RngStream(seed));
  double worst = 0.0;
  std::string worst_name;
  std::size_t n_grad = 0;
  for (const ReportRow& row : r.rows) {
    if (row.name.starts_with("grad:")) {
      ++n_grad;
      if (row.value >= worst) {
        worst = row.value;
        worst_name = row.name;
      }
    }
  }
  o.require(worst < 1e-5 && n_grad > 0, "%zu gradient checks, worst %.3e (%s)", n_grad, worst, worst_name.c_str());
  const ReportRow& full = r.find("grad:l2r_loss");
  o.require(full.value < 1e-5, "full L2R loss graph over f and h parameters: %.3e", full.value);
  const ReportRow& leak = r.find("stop_gradient:l2r_h_path");
  o.require(leak.value < 1e-10, "stop-gradient leak %.3e", leak.value);
  for (const ReportRow& row : r.rows)
    if (!row.pass) o.require(false, "selftest row %s = %.3e", row.name.c_str(), row.value);
  return o;
}

RunConfig desk(LossKind loss, NoiseModel noise, std::uint64_t seed) {
  RunConfig c;
  c.n_train = 128;
  c.n_val = 32;
  c.image_size = 64;
  c.epochs = 200;
  c.noise = std::move(noise);
  c.loss = loss;
  c.seed = seed;
  c.data_seed = seed;
  switch (loss) {
  case LossKind::Gr2r: c.tau = 0.5; break;
  case LossKind::L2r:
    c.l2r.tau = 0.5;
    c.l2r.h_lr = 1e-4;
    c.l2r.id_pretrain_steps = 2000;
    c.recorruptor.kernel_init = 0.1;
    c.diag_mc = 8;
    break;
  case LossKind::Unsure: c.unsure_step = 3e-5; break;
  default: break;
  }
  return c;
}

struct Run {
  std::string tag;
  TrainResult result;
  double minutes = 0.0;
  double final_psnr() const { return result.history.back().psnr; }
};

Run train_run(const std::string& tag, const RunConfig& cfg, const std::string& save_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::fprintf(stderr, "training %s (%s, %s)...\n", tag.c_str(), loss_name(cfg.loss).c_str(), cfg.noise_model().name().c_str());
  Run r{tag, train(cfg, prepare_data(cfg)), 0.0};
  r.minutes = seconds_since(t0) / 60.0;
  std::fprintf(stderr, "  %s: final PSNR %.3f dB (noisy %.3f dB) in %.1f min\n", tag.c_str(), r.final_psnr(),
               r.result.noisy_psnr, r.minutes);
  if (!save_dir.empty()) {
    std::filesystem::create_directories(save_dir);
    emit_csv(history_table(r.result.history), save_dir + "/" + tag + ".csv");
    write_file(save_dir + "/" + tag + ".ini", serialize_config(cfg));
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j);
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = double(a.size()), mean = (n - 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return sab / std::sqrt(saa * sbb);
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

Outcome io_checks(std::uint64_t seed) {
  Outcome o;
  RngStream rng(seed);
  int tsr_ok = 0, pgm_ok = 0;
  for (int i = 0; i < 100; ++i) {
    Shape s;
    const std::size_t rank = 1 + rng.next_u64() % 4;
    for (std::size_t k = 0; k < rank; ++k) s.push_back(1 + rng.next_u64() % 6);
    Tensor t(s);
    for (double& v : t.storage()) {
      do v = std::bit_cast<double>(rng.next_u64());
      while (!std::isfinite(v));
    }
    tsr_ok += same_bits(decode_tsr(encode_tsr(t)), t);

    const int maxval = i % 2 ? 65535 : 255;
    const std::size_t h = 1 + rng.next_u64() % 12, w = 1 + rng.next_u64() % 12;
    Tensor img(Shape{1, 1, h, w});
    for (double& v : img.storage()) v = double(rng.next_u64() % std::uint64_t(maxval + 1)) / maxval;
    const std::string bytes = encode_pgm(img, maxval);
    const Tensor back = decode_pgm(bytes);
    pgm_ok += same_bits(back, img) && encode_pgm(back, maxval) == bytes;
  }
  o.require(tsr_ok == 100, "TSR1 bit-exact round trips: %d / 100", tsr_ok);
  o.require(pgm_ok == 100, "PGM bit-exact round trips: %d / 100", pgm_ok);

  for (LossKind loss : {LossKind::Supervised, LossKind::Gr2r, LossKind::L2r, LossKind::Sure, LossKind::Unsure}) {
    RunConfig c;
    c.n_train = 8;
    c.n_val = 4;
    c.image_size = 16;
    c.epochs = 2;
    c.batch_size = 4;
    c.denoiser.channels = 4;
    c.loss = loss;
    c.seed = seed;
    c.data_seed = seed;
    const TrainData d = prepare_data(c);
    const std::string a = to_csv(history_table(train(c, d).history));
    const std::string b = to_csv(history_table(train(c, d).history));
    o.require(a == b, "%s: two runs with seed %llu give %s histories", loss_name(loss).c_str(),
              static_cast<unsigned long long>(seed), a == b ? "byte-identical" : "different");
  }
  return o;
}

void print(int id, const char* title, const Outcome& o) {
  std::printf("%s %d %s\n", o.pass ? "PASS" : "FAIL", id, title);
  for (const std::string& n : o.notes) std::printf("    %s\n", n.c_str());
  std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::set<int> only;
  std::string save_dir;
  std::uint64_t seed = 2024;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--save", save_dir, "directory for training histories");
  app.add_option("--seed", seed, "master seed");
  CLI11_PARSE(app, argc, argv);
  auto want = [&only](int id) { return only.empty() || only.contains(id); };

  bool all = true;
  auto report = [&all](int id, const char* title, const Outcome& o) {
    all = all && o.pass;
    print(id, title, o);
  };
  try {
    if (want(1)) report(1, "NEF splitting identities", nef_splitting(seed + 1));
    if (want(2)) report(2, "x-free conditional law", conditional_law(seed + 2));
    if (want(3)) report(3, "moment-condition checker", moment_checker(seed + 3));
    if (want(4)) report(4, "SURE unbiasedness and divergence", sure_checks(seed + 4));
    if (want(5)) report(5, "a_k estimator", ak_checks(seed + 5));
    if (want(6)) report(6, "algebraic identities", algebraic_identities(seed + 6));
    if (want(7)) report(7, "gradient integrity", gradient_integrity(seed + 7));

    if (want(8) || want(9) || want(10)) {
      const NoiseModel gauss = NoiseModel::gaussian(0.1), lg = NoiseModel::log_gamma(1.0, 0.1);
      const std::uint64_t s = seed + 8;
      std::vector<Run> runs;
      if (want(8)) {
        runs.push_back(train_run("supervised", desk(LossKind::Supervised, gauss, s), save_dir));
        runs.push_back(train_run("gr2r_gaussian", desk(LossKind::Gr2r, gauss, s), save_dir));
        runs.push_back(train_run("l2r_gaussian", desk(LossKind::L2r, gauss, s), save_dir));
        runs.push_back(train_run("gr2r_loggamma", desk(LossKind::Gr2r, lg, s), save_dir));
      }
      runs.push_back(train_run("l2r_loggamma", desk(LossKind::L2r, lg, s), save_dir));
      if (want(8)) runs.push_back(train_run("unsure_gaussian", desk(LossKind::Unsure, gauss, s), save_dir));
      auto get = [&runs](const std::string& tag) -> const Run& {
        return *std::find_if(runs.begin(), runs.end(), [&tag](const Run& r) { return r.tag == tag; });
      };

      if (want(8)) {
        Outcome o;
        const Run &sup = get("supervised"), &g = get("gr2r_gaussian"), &l = get("l2r_gaussian"), &gl = get("gr2r_loggamma"),
                  &ll = get("l2r_loggamma"), &u = get("unsure_gaussian");
        const double gain = sup.final_psnr() - sup.result.noisy_psnr;
        o.require(gain >= 4.0, "(a) supervised %.3f dB vs noisy %.3f dB: gain %.3f dB (need >= 4)", sup.final_psnr(),
                  sup.result.noisy_psnr, gain);
        o.require(std::abs(g.final_psnr() - sup.final_psnr()) <= 1.0, "(b) gr2r %.3f dB vs supervised %.3f dB (need within 1.0)",
                  g.final_psnr(), sup.final_psnr());
        o.require(std::abs(l.final_psnr() - g.final_psnr()) <= 1.5, "(c) gaussian: l2r %.3f dB vs gr2r %.3f dB (need within 1.5)",
                  l.final_psnr(), g.final_psnr());
        o.require(std::abs(ll.final_psnr() - gl.final_psnr()) <= 1.5,
                  "(c) log-gamma: l2r %.3f dB vs gr2r %.3f dB (need within 1.5; noisy %.3f dB)", ll.final_psnr(),
                  gl.final_psnr(), gl.result.noisy_psnr);
        o.require(u.result.divergence_per_pixel < 0.05, "(d) unsure |div f|/n = %.4f (need < 0.05), eta %.4g",
                  u.result.divergence_per_pixel, u.result.eta);
        for (const Run& r : runs) o.require(r.minutes < 30.0, "%s runtime %.1f min (limit 30)", r.tag.c_str(), r.minutes);
        report(8, "desk-scale training trends", o);
      }
      const Run& ll = get("l2r_loggamma");
      if (want(9)) {
        Outcome o;
        const DiagnosticsRecord &first = *ll.result.history.front().diag, &last = *ll.result.history.back().diag;
        o.require(last.c_delta < first.c_delta / 10.0, "C_delta epoch 1 %.4e (C_eps %.4e, C_h %.4e), final %.4e (C_eps %.4e, C_h %.4e)",
                  first.c_delta, first.c_eps, first.c_h, last.c_delta, last.c_eps, last.c_h);
        report(9, "equilibrium diagnostics", o);
      }
      if (want(10)) {
        Outcome o;
        std::vector<double> learned, oracle;
        for (int i = 0; i <= 40; ++i) {
          const double w = -3.0 + 0.15 * i;
          learned.push_back(ll.result.recorruptor->mlp_scalar(w));
          oracle.push_back(oracle_map(NoiseModel::log_gamma(1.0, 0.1), w));
        }
        const double rho = spearman(learned, oracle);
        o.require(rho > 0.95, "Spearman(mMLP, F^-1(Phi)) on 41 points in [-3, 3] = %.4f", rho);
        report(10, "implicit transport recovery", o);
      }
    }
    if (want(11)) report(11, "I/O round trips and determinism", io_checks(seed + 11));
  } catch (const std::exception& e) {
    std::printf("FAIL error: %s\n", e.what());
    return 1;
  }
  return all ? 0 : 1;
}
