#pragma once

#include <cstdint>
#include <string>

#include "recorrupt/denoiser.hpp"
#include "recorrupt/l2r.hpp"
#include "recorrupt/noise.hpp"
#include "recorrupt/recorruptor.hpp"
#include "recorrupt/splitting.hpp"

namespace recorrupt {

enum class LossKind { Supervised, Gr2r, L2r, Sure, Unsure };

std::string loss_name(LossKind k);
LossKind parse_loss(const std::string& name);

struct RunConfig {
  // [data]
  std::string train_dir;
  std::string val_dir;
  std::size_t n_train = 128;
  std::size_t n_val = 32;
  std::size_t image_size = 64;
  std::uint64_t data_seed = 1;
  // [model]
  NoiseModel noise;
  std::size_t noise_kernel_size = 3;
  double noise_kernel_std = 0.5;
  // [denoiser]
  DenoiserConfig denoiser;
  // [loss]
  LossKind loss = LossKind::Supervised;
  double alpha = 0.5;
  double tau = 1.0;
  PgWeight pg_weight = PgWeight::AsPrinted;
  std::size_t probes = 1;
  double fd_step = 1e-4;
  double unsure_step = 1e-3;
  // [recorruptor]
  RecorruptorConfig recorruptor;
  L2RConfig l2r;
  // [optim]
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  std::size_t diag_mc = 1;

  /// Noise model with the correlated kernel materialized.
  NoiseModel noise_model() const;
  /// Startup consistency checks; throws std::invalid_argument naming the conflict.
  void validate() const;
};

/// INI-style text: [section] headers, key = value lines, '#' or ';' comments.
/// Unknown sections or keys are rejected with their line number.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical text: every key in a fixed order, reals at 17 significant digits.
std::string serialize_config(const RunConfig& cfg);

} // namespace recorrupt
