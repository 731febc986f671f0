#pragma once

#include <cstddef>
#include <vector>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/rng.hpp"

namespace recorrupt {

struct RecorruptorConfig {
  /// Number of linear layers in the scalar map.
  std::size_t depth = 3;
  std::size_t width = 8;
  /// Odd spatial extent of the output kernel.
  std::size_t kernel_size = 1;
  /// Multiply the output by sqrt(y).
  bool pg_scale = false;
  /// Centre tap of the initial (delta) kernel.
  double kernel_init = 1.0;

  void validate() const;
};

/// h(w) = k * N(m(w)), with m a monotone MLP (weights softplus(raw) > 0, softplus hidden
/// units, linear output) and N a whole-batch standardization.
class Recorruptor {
public:
  Recorruptor(const RecorruptorConfig& cfg, RngStream& rng);

  const RecorruptorConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> mlp_parameters();
  Parameter& kernel() { return kernel_; }
  const Parameter& kernel() const { return kernel_; }
  /// Layer l holds raw weights (out, in) at 2l and bias (out, 1) at 2l + 1.
  std::vector<Parameter>& layers() { return layers_; }
  const std::vector<Parameter>& layers() const { return layers_; }

  /// Element-wise m(w) for a tensor of any shape.
  Var mlp(Graph& g, Var w);
  Tensor mlp(const Tensor& w) const;
  double mlp_scalar(double w) const;

  /// Standardization N: zero mean, unit (biased) variance over every element.
  static Var normalize(Var a);

  /// w must be (N, 1, H, W); y (same shape, >= 0) is required iff pg_scale.
  Var forward(Graph& g, const Tensor& w, const Tensor* y = nullptr);
  Tensor forward_value(const Tensor& w, const Tensor* y = nullptr);

private:
  RecorruptorConfig cfg_;
  std::vector<Parameter> layers_;
  Parameter kernel_;
};

/// Fits m to the identity on fresh standard-normal draws with Adam. Stops after n_steps or
/// once the held-out MSE drops below 1e-3. Returns the final held-out MSE.
double identity_pretrain(Recorruptor& h, std::size_t n_steps, RngStream& rng, double lr = 1e-2);

} // namespace recorrupt
