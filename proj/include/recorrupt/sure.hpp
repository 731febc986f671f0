#pragma once

#include <functional>
#include <vector>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/noise.hpp"
#include "recorrupt/rng.hpp"

namespace recorrupt {

using DenoiserFn = std::function<Tensor(const Tensor&)>;
/// Denoiser expressed on a graph so losses can be differentiated through it.
using GraphDenoiser = std::function<Var(Graph&, Var)>;

struct SureConfig {
  double sigma = 0.1;
  std::size_t mc_probes = 1;
  double fd_step = 1e-4;

  void validate() const;
};

struct UnsureState {
  double eta = 0.0;
  double step = 1e-3;
  /// Correlated variant only: (1, 1, k, k) kernel whose autocorrelation is Sigma.
  Parameter kernel;

  void validate() const;
};

/// +-1 entries with equal probability.
Tensor rademacher(const Shape& shape, RngStream& rng);

/// Hutchinson estimate of div f(y) with forward differences; probes are shared by both f evaluations.
double mc_divergence(const DenoiserFn& f, const Tensor& y, const SureConfig& cfg, RngStream& rng);

/// ||f(y) - y||^2 / n + 2 sigma^2 div f(y) / n.
double sure_loss(const DenoiserFn& f, const Tensor& y, const SureConfig& cfg, RngStream& rng);
Var sure_loss(Graph& g, const GraphDenoiser& f, const Tensor& y, const SureConfig& cfg, RngStream& rng);

struct UnsureTerms {
  Var loss_f;
  /// Divergence estimate (tr(Sigma J) for the correlated variant).
  double divergence = 0.0;
  /// d loss / d eta = 2 div / n; scalar variant only.
  double ascent_grad = 0.0;
};

/// ||f(y) - y||^2 / n + 2 eta div f(y) / n.
UnsureTerms unsure_objective(Graph& g, const GraphDenoiser& f, const Tensor& y, const UnsureState& state,
                             const SureConfig& cfg, RngStream& rng);
/// eta += step * grad.
void unsure_ascent(UnsureState& state, double ascent_grad);

/// Probes u = k * v perturb y and project the response, so the term estimates tr(Sigma J) with Sigma = K K^T.
/// The kernel is a graph parameter: after backward its gradient is the ascent direction.
UnsureTerms correlated_unsure_objective(Graph& g, const GraphDenoiser& f, const Tensor& y, UnsureState& state,
                                        const SureConfig& cfg, RngStream& rng);
/// kernel += step * kernel.grad.
void correlated_unsure_ascent(UnsureState& state);

/// Value-level tr(Sigma J) probe used by tests and diagnostics.
double correlated_divergence(const DenoiserFn& f, const Tensor& y, const Tensor& kernel, const SureConfig& cfg,
                             RngStream& rng);

struct AkPoint {
  double alpha = 0.0;
  double value = 0.0;
  double se = 0.0;
};

struct AkResult {
  std::vector<AkPoint> points;
  double limit = 0.0;
};

/// Monte Carlo E[(y2 - y)(alpha y2)^k | y] along a decreasing alpha sequence, extrapolated
/// linearly to alpha = 0 from the last two points. Draws are shared across alphas.
AkResult estimate_ak(const NoiseModel& model, double y, int k, const std::vector<double>& alpha_seq, std::size_t n_mc,
                     RngStream& rng);

} // namespace recorrupt
