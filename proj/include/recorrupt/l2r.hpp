#pragma once

#include <vector>

#include "recorrupt/optim.hpp"
#include "recorrupt/recorruptor.hpp"
#include "recorrupt/report.hpp"
#include "recorrupt/sure.hpp"

namespace recorrupt {

/// Objective stepped by the recorruptor's ascent.
enum class HObjective {
  /// The saddle loss itself.
  Lagrangian,
  /// ||f(y1) - y2||^2 with y2 = y - h / tau.
  Gr2rForm,
};

/// Factor c in front of f(y1)^T h / n.
enum class CorrelationScale { TwoOverTau, Two, One };

struct L2RConfig {
  double tau = 1.0;
  bool joint = true;
  bool stop_gradient = true;
  double f_lr = 1e-3;
  double h_lr = 1e-3;
  std::size_t id_pretrain_steps = 0;
  HObjective h_objective = HObjective::Lagrangian;
  CorrelationScale corr_scale = CorrelationScale::TwoOverTau;

  void validate() const;
  double correlation_factor() const;
};

struct L2RLosses {
  Var loss_f;
  /// Same node as loss_f unless h_objective is Gr2rForm.
  Var loss_h;
  Tensor w;
  Tensor h;
  Tensor f_y1;
};

/// L = ||f(y + tau h(w')) - y||^2 / n + c f(y + tau h(w'))^T h(w') / n with one fresh w' from rng.
/// With stop_gradient the recorruptor only sees the explicit h factor.
L2RLosses l2r_losses(Graph& g, const GraphDenoiser& f, Recorruptor& h, const Tensor& y, const L2RConfig& cfg,
                     RngStream& rng);

struct MinMaxLog {
  double loss_f = 0.0;
  double loss_h = 0.0;
};

/// One descent step for f and one ascent step for h. Joint mode draws w' from rng.split(0) and
/// uses one forward pass; otherwise f steps on rng.split(0) and h on a fresh rng.split(1).
MinMaxLog minmax_step(const GraphDenoiser& f, Recorruptor& h, const Tensor& y, const L2RConfig& cfg, AdamW& opt_f,
                      AdamW& opt_h, RngStream& rng);

struct DiagnosticsRecord {
  std::size_t epoch = 0;
  double c_eps = 0.0;
  double c_h = 0.0;
  double c_delta = 0.0;
  double c_eps_se = 0.0;
  double c_h_se = 0.0;
};

/// C_eps = E[f(y1)^T (y - x)] / n, C_h = E[f(y1)^T h] / (tau n), C_delta = |C_eps - C_h|,
/// averaged over images and n_mc draws of w'.
DiagnosticsRecord l2r_diagnostics(const DenoiserFn& f, Recorruptor& h, const Tensor& x, const Tensor& y, double tau,
                                  std::size_t n_mc, RngStream& rng);

/// Largest per-image |L2R loss - (||f(y1) - y2||^2 + (y + y2)^T h / tau)| with shared w'.
double gr2r_rewrite_check(const DenoiserFn& f, Recorruptor& h, const Tensor& y_batch, double tau, RngStream& rng);

/// (2 / tau) E[(A (y + tau h))^T h] with h = sqrt(eta) w' for each tau, against 2 eta tr(A).
Report unsure_reduction_check(const Tensor& A, double eta, const std::vector<double>& tau_seq, std::size_t n_mc,
                              RngStream& rng);
/// Same with h = k (*) w' (circular convolution on an H x W grid), against 2 tr(Sigma A), Sigma = C C^T.
Report unsure_reduction_check_conv(const Tensor& A, const Tensor& kernel, std::size_t height, std::size_t width,
                                   const std::vector<double>& tau_seq, std::size_t n_mc, RngStream& rng);

/// Largest |h gradient with stop-gradient - h gradient with f(y1) frozen as a constant|.
double stop_gradient_leak(const GraphDenoiser& f, const std::vector<Parameter*>& f_params, Recorruptor& h,
                          const Tensor& y, const L2RConfig& cfg, const RngStream& rng);

} // namespace recorrupt
