#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "recorrupt/config.hpp"
#include "recorrupt/denoiser.hpp"
#include "recorrupt/l2r.hpp"
#include "recorrupt/report.hpp"

namespace recorrupt {

struct MetricRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  bool psnr_capped = false;
  std::optional<DiagnosticsRecord> diag;
};

struct TrainData {
  Tensor x_train, y_train, x_val, y_val;
};

struct TrainResult {
  std::vector<MetricRecord> history;
  double noisy_psnr = 0.0;
  double noisy_ssim = 0.0;
  /// |mean over validation images of div f(y)| / pixels.
  double divergence_per_pixel = 0.0;
  double eta = 0.0;
  std::unique_ptr<ToyCnn> denoiser;
  std::unique_ptr<Recorruptor> recorruptor;
};

/// Clean sets from the configured directories (or the synthetic generator) plus one fixed noisy copy each.
TrainData prepare_data(const RunConfig& cfg);

/// Deterministic given cfg.seed and cfg.data_seed. Stream layout under RngStream(cfg.seed):
/// 3 denoiser init, 4 recorruptor init, 5 identity pretraining, 6.e epoch shuffle,
/// 7.t step t, 8.e diagnostics, 9 final divergence. Noisy sets come from 1 (train) and 2 (val).
TrainResult train(const RunConfig& cfg, const TrainData& data,
                  const std::function<void(const MetricRecord&)>& on_epoch = {});

CsvTable history_table(const std::vector<MetricRecord>& history);

/// Applies f to (N, 1, H, W) in chunks of `batch` images.
Tensor apply_in_batches(const DenoiserFn& f, const Tensor& y, std::size_t batch);

struct EvalRow {
  std::size_t index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  bool capped = false;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Per-image PSNR/SSIM of f(y) against x.
EvalResult evaluate(const DenoiserFn& f, const Tensor& x, const Tensor& y, std::size_t batch = 16);
CsvTable eval_table(const EvalResult& r);

} // namespace recorrupt
