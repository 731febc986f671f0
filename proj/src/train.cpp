#include "recorrupt/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "recorrupt/dataset.hpp"
#include "recorrupt/metrics.hpp"
#include "recorrupt/optim.hpp"
#include "recorrupt/splitting.hpp"
#include "recorrupt/sure.hpp"

namespace recorrupt {

TrainData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  TrainData d;
  const RngStream data_rng(cfg.data_seed);
  d.x_train = cfg.train_dir.empty() ? synthetic_images(cfg.n_train, cfg.image_size, data_rng.split(0)) : load_dataset(cfg.train_dir);
  d.x_val = cfg.val_dir.empty() ? synthetic_images(cfg.n_val, cfg.image_size, data_rng.split(1)) : load_dataset(cfg.val_dir);
  const NoiseModel model = cfg.noise_model();
  const RngStream master(cfg.seed);
  RngStream r1 = master.split(1), r2 = master.split(2);
  d.y_train = corrupt(d.x_train, model, r1);
  d.y_val = corrupt(d.x_val, model, r2);
  return d;
}

Tensor apply_in_batches(const DenoiserFn& f, const Tensor& y, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("apply_in_batches: batch must be > 0");
  const std::size_t n = y.dim(0);
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < n; i += batch) parts.push_back(f(slice_batch(y, i, std::min(batch, n - i))));
  return stack_batch(parts);
}

EvalResult evaluate(const DenoiserFn& f, const Tensor& x, const Tensor& y, std::size_t batch) {
  require_same_shape("evaluate", x, y);
  if (x.rank() != 4 || x.dim(1) != 1) throw std::invalid_argument("evaluate: expected (N, 1, H, W), got " + to_string(x.shape()));
  const Tensor out = apply_in_batches(f, y, batch);
  require_same_shape("evaluate", out, x);
  EvalResult r;
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    const Tensor a = slice_batch(out, i, 1), b = slice_batch(x, i, 1);
    const Psnr p = psnr(a, b);
    r.rows.push_back({i, p.db, ssim(a, b), p.capped});
    r.mean_psnr += p.db;
    r.mean_ssim += r.rows.back().ssim;
  }
  if (!r.rows.empty()) {
    r.mean_psnr /= static_cast<double>(r.rows.size());
    r.mean_ssim /= static_cast<double>(r.rows.size());
  }
  return r;
}

CsvTable eval_table(const EvalResult& r) {
  CsvTable t{{"image", "psnr", "ssim", "capped"}, {}};
  for (const EvalRow& row : r.rows)
    t.rows.push_back({std::to_string(row.index), format_real(row.psnr), format_real(row.ssim), row.capped ? "1" : "0"});
  t.rows.push_back({"mean", format_real(r.mean_psnr), format_real(r.mean_ssim), ""});
  return t;
}

CsvTable history_table(const std::vector<MetricRecord>& history) {
  CsvTable t{{"epoch", "lr", "loss", "psnr", "ssim", "c_eps", "c_h", "c_delta"}, {}};
  for (const MetricRecord& m : history) {
    std::vector<std::string> row{std::to_string(m.epoch), format_real(m.lr), format_real(m.loss), format_real(m.psnr),
                                 format_real(m.ssim)};
    if (m.diag) {
      row.push_back(format_real(m.diag->c_eps));
      row.push_back(format_real(m.diag->c_h));
      row.push_back(format_real(m.diag->c_delta));
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, RngStream rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Tensor gather(const Tensor& t, const std::vector<std::size_t>& idx, std::size_t first, std::size_t count) {
  std::vector<Tensor> items;
  for (std::size_t k = first; k < first + count; ++k) items.push_back(slice_batch(t, idx[k], 1));
  return stack_batch(items);
}

} // namespace

TrainResult train(const RunConfig& cfg, const TrainData& data, const std::function<void(const MetricRecord&)>& on_epoch) {
  cfg.validate();
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  const NoiseModel model = cfg.noise_model();
  require_same_shape("train", data.x_train, data.y_train);
  require_same_shape("train", data.x_val, data.y_val);
  const RngStream master(cfg.seed);

  DenoiserConfig dcfg = cfg.denoiser;
  dcfg.head = model.family == NoiseFamily::Binomial ? OutputHead::Sigmoid : OutputHead::Linear;
  TrainResult res;
  {
    RngStream r = master.split(3);
    res.denoiser = std::make_unique<ToyCnn>(dcfg, r);
  }
  ToyCnn& net = *res.denoiser;
  GraphDenoiser f = [&net](Graph& g, Var x) { return net.forward(g, x); };
  DenoiserFn f_value = [&net](const Tensor& x) { return net(x); };

  const std::size_t n_train = data.x_train.dim(0);
  const std::size_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const CosineSchedule schedule{cfg.lr_start, cfg.lr_end, cfg.epochs * steps_per_epoch};
  AdamW opt_f(net.parameters(), AdamWConfig{cfg.lr_start, 0.9, 0.999, 1e-8, cfg.weight_decay});

  std::unique_ptr<AdamW> opt_h;
  if (cfg.loss == LossKind::L2r) {
    RngStream r = master.split(4);
    res.recorruptor = std::make_unique<Recorruptor>(cfg.recorruptor, r);
    RngStream rp = master.split(5);
    identity_pretrain(*res.recorruptor, cfg.l2r.id_pretrain_steps, rp);
    opt_h = std::make_unique<AdamW>(res.recorruptor->parameters(), AdamWConfig{cfg.l2r.h_lr, 0.9, 0.999, 1e-8, 0.0});
  }
  UnsureState unsure;
  unsure.step = cfg.unsure_step;
  const bool correlated_unsure = cfg.loss == LossKind::Unsure && model.family == NoiseFamily::CorrelatedGaussian;
  if (correlated_unsure) {
    const std::size_t ks = cfg.recorruptor.kernel_size;
    Tensor k(Shape{1, 1, ks, ks});
    // Sigma = k * k^T is quadratic in k, so a zero kernel never moves.
    k.at(0, 0, ks / 2, ks / 2) = 0.1;
    unsure.kernel = Parameter("unsure.kernel", std::move(k));
  }
  SureConfig scfg;
  scfg.sigma = model.sigma;
  scfg.mc_probes = cfg.probes;
  scfg.fd_step = cfg.fd_step;
  SplitConfig split;
  split.alpha = cfg.alpha;
  split.tau = cfg.tau;
  split.pg_weight = cfg.pg_weight;

  const RngStream shuffle_root = master.split(6), step_root = master.split(7), diag_root = master.split(8);
  std::size_t t = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled(n_train, shuffle_root.split(epoch));
    double loss_sum = 0.0;
    double lr = cfg.lr_start;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++t) {
      lr = cosine_lr(schedule, static_cast<double>(t));
      opt_f.set_lr(lr);
      const std::size_t first = s * cfg.batch_size, count = std::min(cfg.batch_size, n_train - first);
      const Tensor y = gather(data.y_train, order, first, count);
      RngStream rng = step_root.split(t);
      double loss = 0.0;
      try {
        if (cfg.loss == LossKind::L2r) {
          opt_h->set_lr(cfg.l2r.h_lr * lr / cfg.lr_start);
          loss = minmax_step(f, *res.recorruptor, y, cfg.l2r, opt_f, *opt_h, rng).loss_f;
        } else {
          Graph g;
          Var objective;
          double ascent = 0.0;
          switch (cfg.loss) {
          case LossKind::Supervised: {
            const Tensor x = gather(data.x_train, order, first, count);
            objective = ad::mean(ad::square(f(g, g.constant(y)) - g.constant(x)));
            break;
          }
          case LossKind::Gr2r: {
            const RecorruptedPair pair = gr2r_pair(y, model, split, rng);
            objective = gr2r_loss(f(g, g.constant(pair.y1)), pair, model, true);
            break;
          }
          case LossKind::Sure: objective = sure_loss(g, f, y, scfg, rng); break;
          case LossKind::Unsure: {
            const UnsureTerms terms = correlated_unsure ? correlated_unsure_objective(g, f, y, unsure, scfg, rng)
                                                        : unsure_objective(g, f, y, unsure, scfg, rng);
            objective = terms.loss_f;
            ascent = terms.ascent_grad;
            break;
          }
          case LossKind::L2r: break;
          }
          loss = objective.value().item();
          if (!std::isfinite(loss)) throw std::runtime_error("non-finite " + loss_name(cfg.loss) + " loss");
          opt_f.zero_grad();
          if (correlated_unsure) unsure.kernel.zero_grad();
          g.backward(objective);
          opt_f.step();
          if (cfg.loss == LossKind::Unsure) {
            if (correlated_unsure) correlated_unsure_ascent(unsure);
            else unsure_ascent(unsure, ascent);
          }
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", step " + std::to_string(t) + ": " + e.what());
      }
      loss_sum += loss;
    }
    MetricRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = loss_sum / static_cast<double>(steps_per_epoch);
    const EvalResult ev = evaluate(f_value, data.x_val, data.y_val, cfg.batch_size);
    rec.psnr = ev.mean_psnr;
    rec.ssim = ev.mean_ssim;
    for (const EvalRow& r : ev.rows) rec.psnr_capped = rec.psnr_capped || r.capped;
    if (cfg.loss == LossKind::L2r) {
      RngStream dr = diag_root.split(epoch);
      DiagnosticsRecord d = l2r_diagnostics(f_value, *res.recorruptor, data.x_val, data.y_val, cfg.l2r.tau, cfg.diag_mc, dr);
      d.epoch = epoch;
      rec.diag = d;
    }
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  const EvalResult noisy = evaluate([](const Tensor& y) { return y; }, data.x_val, data.y_val, cfg.batch_size);
  res.noisy_psnr = noisy.mean_psnr;
  res.noisy_ssim = noisy.mean_ssim;
  RngStream dr = master.split(9);
  SureConfig probe = scfg;
  probe.mc_probes = 4;
  double div = 0.0;
  for (std::size_t i = 0; i < data.y_val.dim(0); ++i) {
    const Tensor yi = slice_batch(data.y_val, i, 1);
    div += mc_divergence(f_value, yi, probe, dr) / static_cast<double>(yi.size());
  }
  res.divergence_per_pixel = std::abs(div / static_cast<double>(data.y_val.dim(0)));
  res.eta = unsure.eta;
  return res;
}

} // namespace recorrupt
