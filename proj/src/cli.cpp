#include "recorrupt/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include "recorrupt/config.hpp"
#include "recorrupt/dataset.hpp"
#include "recorrupt/io.hpp"
#include "recorrupt/metrics.hpp"
#include "recorrupt/selftest.hpp"
#include "recorrupt/sure.hpp"
#include "recorrupt/train.hpp"

namespace recorrupt {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelArgs {
  std::string family = "gaussian";
  double sigma = 0.1, b = 0.1, ell = 1.0, gamma = 0.05, p0 = 0.5, kernel_std = 0.5;
  int n_trials = 16;
  std::size_t kernel_size = 3;

  void add(CLI::App* app) {
    app->add_option("--model", family, "noise family");
    app->add_option("--sigma", sigma, "gaussian / log-gamma / read-noise level");
    app->add_option("--b", b, "laplace scale");
    app->add_option("--ell", ell, "gamma or log-gamma shape");
    app->add_option("--gamma", gamma, "poisson gain");
    app->add_option("--n-trials", n_trials, "binomial trials");
    app->add_option("--p0", p0, "bernoulli mask keep probability");
    app->add_option("--kernel-size", kernel_size, "correlated noise kernel extent");
    app->add_option("--kernel-std", kernel_std, "correlated noise kernel width");
  }

  NoiseModel build(const std::string& fam) const {
    switch (parse_noise_family(fam)) {
    case NoiseFamily::Gaussian: return NoiseModel::gaussian(sigma);
    case NoiseFamily::Laplace: return NoiseModel::laplace(b);
    case NoiseFamily::LogGamma: return NoiseModel::log_gamma(ell, sigma);
    case NoiseFamily::CorrelatedGaussian: return NoiseModel::correlated_gaussian(sigma, gaussian_kernel(kernel_size, kernel_std));
    case NoiseFamily::Poisson: return NoiseModel::poisson(gamma);
    case NoiseFamily::Gamma: return NoiseModel::gamma_noise(ell);
    case NoiseFamily::Binomial: return NoiseModel::binomial(n_trials);
    case NoiseFamily::BernoulliMask: return NoiseModel::bernoulli_mask(p0);
    case NoiseFamily::PoissonGaussian: return NoiseModel::poisson_gaussian(gamma, sigma);
    }
    return NoiseModel::gaussian(sigma);
  }
  NoiseModel build() const { return build(family); }
};

void maybe_emit(const CsvTable& t, const std::string& out) {
  if (!out.empty()) emit_csv(t, out);
}

void print_report(const Report& r) {
  for (const ReportRow& row : r.rows) {
    std::printf("  %-40s %14.8g  se %-11.4g tol %-11.4g %s\n", row.name.c_str(), row.value, row.se, row.threshold,
                row.pass ? "ok" : "FAIL");
  }
  for (const std::string& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
}

int gen_cmd(std::size_t n, std::size_t size, std::uint64_t seed, const std::string& dir, const std::string& out) {
  const std::vector<std::string> names = gen_dataset(n, size, seed, dir);
  CsvTable t{{"index", "file"}, {}};
  for (std::size_t i = 0; i < names.size(); ++i) t.rows.push_back({std::to_string(i), names[i]});
  maybe_emit(t, out);
  std::printf("wrote %zu images of %zux%zu to %s\n", names.size(), size, size, dir.c_str());
  return 0;
}

int corrupt_cmd(const ModelArgs& ma, const std::string& in, const std::string& dir, std::uint64_t seed, const std::string& out) {
  const NoiseModel model = ma.build();
  const Tensor x = load_dataset(in);
  RngStream rng(seed);
  const Tensor y = corrupt(x, model, rng);
  std::filesystem::create_directories(dir);
  write_tsr(dir + "/noisy.tsr", y);
  write_tsr(dir + "/clean.tsr", x);
  CsvTable t{{"image", "psnr_noisy"}, {}};
  double mean = 0.0;
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    const double p = psnr(slice_batch(y, i, 1), slice_batch(x, i, 1)).db;
    t.rows.push_back({std::to_string(i), format_real(p)});
    mean += p;
  }
  maybe_emit(t, out);
  std::printf("%s noise on %zu images -> %s/noisy.tsr (mean noisy PSNR %.3f dB)\n", model.name().c_str(), x.dim(0), dir.c_str(),
              mean / static_cast<double>(x.dim(0)));
  return 0;
}

std::vector<Parameter*> checkpoint_params(TrainResult& res) {
  std::vector<Parameter*> p = res.denoiser->parameters();
  if (res.recorruptor)
    for (Parameter* q : res.recorruptor->parameters()) p.push_back(q);
  return p;
}

int train_cmd(const std::string& config, const std::string& weights, const std::string& out, bool quiet) {
  const RunConfig cfg = load_config(config);
  cfg.validate();
  const TrainData data = prepare_data(cfg);
  TrainResult res = train(cfg, data, [quiet](const MetricRecord& m) {
    if (quiet) return;
    std::printf("epoch %4zu  lr %.3g  loss %.6g  psnr %.3f  ssim %.4f", m.epoch, m.lr, m.loss, m.psnr, m.ssim);
    if (m.diag) std::printf("  c_eps %.3g  c_h %.3g  c_delta %.3g", m.diag->c_eps, m.diag->c_h, m.diag->c_delta);
    std::printf("\n");
    std::fflush(stdout);
  });
  maybe_emit(history_table(res.history), out);
  if (!weights.empty()) save_checkpoint(weights, checkpoint_params(res));
  const MetricRecord& last = res.history.back();
  std::printf("%s on %s noise: final PSNR %.3f dB (noisy input %.3f dB), SSIM %.4f, |div f|/n %.4f\n",
              loss_name(cfg.loss).c_str(), cfg.noise_model().name().c_str(), last.psnr, res.noisy_psnr, last.ssim,
              res.divergence_per_pixel);
  return 0;
}

// Rebuilds the networks of a run so a checkpoint can be loaded into them.
TrainResult skeleton(const RunConfig& cfg) {
  TrainResult res;
  const RngStream master(cfg.seed);
  DenoiserConfig dcfg = cfg.denoiser;
  dcfg.head = cfg.noise.family == NoiseFamily::Binomial ? OutputHead::Sigmoid : OutputHead::Linear;
  RngStream r3 = master.split(3);
  res.denoiser = std::make_unique<ToyCnn>(dcfg, r3);
  if (cfg.loss == LossKind::L2r) {
    RngStream r4 = master.split(4);
    res.recorruptor = std::make_unique<Recorruptor>(cfg.recorruptor, r4);
  }
  return res;
}

int eval_cmd(const std::string& config, const std::string& weights, const std::string& clean, const std::string& noisy,
             const std::string& out) {
  const RunConfig cfg = load_config(config);
  cfg.validate();
  TrainResult net = skeleton(cfg);
  load_checkpoint(weights, checkpoint_params(net));
  Tensor x, y;
  if (clean.empty()) {
    const TrainData d = prepare_data(cfg);
    x = d.x_val;
    y = d.y_val;
  } else {
    x = std::filesystem::is_directory(clean) ? load_dataset(clean) : read_tsr(clean);
    if (noisy.empty()) {
      RngStream r = RngStream(cfg.seed).split(2);
      y = corrupt(x, cfg.noise_model(), r);
    } else {
      y = read_tsr(noisy);
    }
  }
  ToyCnn& f = *net.denoiser;
  const EvalResult r = evaluate([&f](const Tensor& t) { return f(t); }, x, y, cfg.batch_size);
  maybe_emit(eval_table(r), out);
  std::printf("%zu images: mean PSNR %.3f dB, mean SSIM %.4f\n", r.rows.size(), r.mean_psnr, r.mean_ssim);
  return 0;
}

int validate_nef_cmd(const ModelArgs& ma, double alpha, std::size_t n, const std::vector<double>& grid, std::uint64_t seed,
                     const std::string& out) {
  std::vector<std::string> families;
  if (ma.family == "all") families = {"gaussian", "poisson", "gamma", "binomial"};
  else families = {ma.family};
  Report all;
  for (const std::string& fam : families) {
    const NoiseModel model = ma.build(fam);
    RngStream rng(seed);
    const Report r = nef_split_validate(model, grid, alpha, n, rng);
    std::printf("%s, alpha = %g, %zu samples per x\n", model.name().c_str(), alpha, n);
    print_report(r);
    for (const ReportRow& row : r.rows) all.rows.push_back({fam + ":" + row.name, row.value, row.se, row.threshold, row.pass});
    for (const std::string& w : r.warnings) all.warnings.push_back(fam + ": " + w);
  }
  maybe_emit(report_table(all), out);
  std::printf("%s\n", all.all_pass() ? "all splitting checks passed" : "splitting checks FAILED");
  return all.all_pass() ? 0 : 1;
}

DistSpec matched_law(const std::string& name, double sd) {
  switch (parse_family(name)) {
  case DistFamily::Normal: return DistSpec::normal(0.0, sd);
  case DistFamily::Laplace: return DistSpec::laplace(0.0, sd / std::sqrt(2.0));
  case DistFamily::Rademacher:
    if (sd != 1.0) throw UsageError("rademacher laws only have unit scale");
    return DistSpec::rademacher();
  default: throw UsageError("check-moments supports normal, laplace and rademacher laws, got '" + name + "'");
  }
}

int check_moments_cmd(const std::string& eps, const std::string& omega, double eps_sd, double omega_sd, double tau,
                      std::size_t n, bool force_mc, std::uint64_t seed, const std::string& out) {
  RngStream rng(seed);
  const ConditionReport c = check_moment_conditions(matched_law(eps, eps_sd), matched_law(omega, omega_sd), tau, n, rng, force_mc);
  const Report r = c.as_report();
  std::printf("eps ~ %s, omega ~ %s, tau = %g\n", eps.c_str(), omega.c_str(), tau);
  print_report(r);
  std::printf("n=1 %s, n=3 %s\n", c.n1.pass ? "pass" : "FAIL", c.n3.pass ? "pass" : "FAIL");
  maybe_emit(report_table(r), out);
  return c.all_pass() ? 0 : 1;
}

int estimate_ak_cmd(const ModelArgs& ma, double y, int k, const std::vector<double>& alphas, std::size_t n,
                    std::uint64_t seed, const std::string& out) {
  RngStream rng(seed);
  const AkResult r = estimate_ak(ma.build(), y, k, alphas, n, rng);
  CsvTable t{{"alpha", "estimate", "se"}, {}};
  std::printf("a_%d(y = %g) for %s noise\n", k, y, ma.build().name().c_str());
  for (const AkPoint& p : r.points) {
    t.rows.push_back({format_real(p.alpha), format_real(p.value), format_real(p.se)});
    std::printf("  alpha %-10g %14.8g  se %.3g\n", p.alpha, p.value, p.se);
  }
  t.rows.push_back({"0", format_real(r.limit), ""});
  std::printf("  extrapolated limit %.8g\n", r.limit);
  maybe_emit(t, out);
  return 0;
}

int diag_cmd(const std::string& config, const std::string& weights, std::size_t n_mc, std::uint64_t seed, const std::string& out) {
  const RunConfig cfg = load_config(config);
  cfg.validate();
  if (cfg.loss != LossKind::L2r) throw UsageError("diag-l2r needs a config with loss type l2r");
  TrainResult net = skeleton(cfg);
  load_checkpoint(weights, checkpoint_params(net));
  const TrainData d = prepare_data(cfg);
  ToyCnn& f = *net.denoiser;
  RngStream rng(seed);
  const DiagnosticsRecord r =
      l2r_diagnostics([&f](const Tensor& t) { return apply_in_batches([&f](const Tensor& b) { return f(b); }, t, 16); },
                      *net.recorruptor, d.x_val, d.y_val, cfg.l2r.tau, n_mc, rng);
  CsvTable t{{"c_eps", "c_eps_se", "c_h", "c_h_se", "c_delta"},
             {{format_real(r.c_eps), format_real(r.c_eps_se), format_real(r.c_h), format_real(r.c_h_se), format_real(r.c_delta)}}};
  maybe_emit(t, out);
  std::printf("C_eps %.6g (se %.2g)  C_h %.6g (se %.2g)  C_delta %.6g\n", r.c_eps, r.c_eps_se, r.c_h, r.c_h_se, r.c_delta);
  return 0;
}

int selftest_cmd(std::uint64_t seed, const std::string& out) {
  const Report r = run_selftest(RngStream(seed));
  print_report(r);
  maybe_emit(report_table(r), out);
  std::printf("%s\n", r.all_pass() ? "selftest passed" : "selftest FAILED");
  return r.all_pass() ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised denoising with learned recorruption"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* c) {
    c->add_option("--out", out, "CSV output path");
    c->add_option("--seed", seed, "master seed");
  };

  std::size_t n = 0, size = 64;
  std::string dir, in, config, weights, clean, noisy;
  ModelArgs ma;
  double alpha = 0.5, tau = 1.0, y = 0.5, eps_sd = 1.0, omega_sd = 1.0;
  int k = 1;
  bool force_mc = false, quiet = false;
  std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9}, alphas{0.2, 0.1, 0.05};
  std::string eps = "normal", omega = "normal";

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic image set");
  common(gen);
  gen->add_option("--n", n, "number of images")->required();
  gen->add_option("--size", size, "image side length");
  gen->add_option("--dir", dir, "output directory")->required();

  CLI::App* cor = app.add_subcommand("corrupt", "add noise to an image set");
  common(cor);
  ma.add(cor);
  cor->add_option("--in", in, "clean image directory")->required();
  cor->add_option("--dir", dir, "output directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train a denoiser");
  common(tr);
  tr->add_option("--config", config, "run configuration")->required();
  tr->add_option("--weights", weights, "checkpoint output path");
  tr->add_flag("--quiet", quiet, "no per-epoch lines");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  common(ev);
  ev->add_option("--config", config, "run configuration")->required();
  ev->add_option("--weights", weights, "checkpoint")->required();
  ev->add_option("--clean", clean, "clean image directory or .tsr (default: the configured validation set)");
  ev->add_option("--noisy", noisy, "noisy .tsr matching --clean");

  CLI::App* vn = app.add_subcommand("validate-nef", "check measurement-splitting identities");
  common(vn);
  ma.add(vn);
  vn->add_option("--alpha", alpha, "split fraction");
  vn->add_option("--n", n, "samples per x")->default_val(1000000);
  vn->add_option("--x", grid, "comma-separated x grid")->delimiter(',');

  CLI::App* cm = app.add_subcommand("check-moments", "check the recorruption moment conditions");
  common(cm);
  cm->add_option("--eps", eps, "noise law");
  cm->add_option("--omega", omega, "recorruption law");
  cm->add_option("--eps-sd", eps_sd, "noise standard deviation");
  cm->add_option("--omega-sd", omega_sd, "recorruption standard deviation");
  cm->add_option("--tau", tau, "recorruption strength");
  cm->add_option("--n", n, "Monte Carlo samples")->default_val(1000000);
  cm->add_flag("--mc", force_mc, "estimate moments by simulation");

  CLI::App* ak = app.add_subcommand("estimate-ak", "estimate limiting conditional moments");
  common(ak);
  ma.add(ak);
  ak->add_option("--y", y, "measurement value");
  ak->add_option("--k", k, "order");
  ak->add_option("--alphas", alphas, "decreasing comma-separated alphas")->delimiter(',');
  ak->add_option("--n", n, "samples per alpha")->default_val(1000000);

  CLI::App* dg = app.add_subcommand("diag-l2r", "equilibrium diagnostics of an L2R checkpoint");
  common(dg);
  dg->add_option("--config", config, "run configuration")->required();
  dg->add_option("--weights", weights, "checkpoint")->required();
  dg->add_option("--n-mc", n, "draws per image")->default_val(4);

  CLI::App* st = app.add_subcommand("selftest", "gradient and identity checks");
  common(st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (gen->parsed()) return gen_cmd(n, size, seed, dir, out);
    if (cor->parsed()) return corrupt_cmd(ma, in, dir, seed, out);
    if (tr->parsed()) return train_cmd(config, weights, out, quiet);
    if (ev->parsed()) return eval_cmd(config, weights, clean, noisy, out);
    if (vn->parsed()) return validate_nef_cmd(ma, alpha, n, grid, seed, out);
    if (cm->parsed()) return check_moments_cmd(eps, omega, eps_sd, omega_sd, tau, n, force_mc, seed, out);
    if (ak->parsed()) return estimate_ak_cmd(ma, y, k, alphas, n, seed, out);
    if (dg->parsed()) return diag_cmd(config, weights, n, seed, out);
    if (st->parsed()) return selftest_cmd(seed, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

} // namespace recorrupt
