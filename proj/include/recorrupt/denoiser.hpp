#pragma once

#include <vector>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/rng.hpp"

namespace recorrupt {

enum class OutputHead { Linear, Sigmoid };

struct DenoiserConfig {
  std::size_t layers = 3;
  std::size_t channels = 16;
  std::size_t kernel_size = 3;
  bool residual = true;
  OutputHead head = OutputHead::Linear;

  void validate() const;
};

/// Small conv net: conv-relu blocks, a final conv to one channel, optional residual
/// connection to the input and optional sigmoid head.
class ToyCnn {
public:
  ToyCnn(const DenoiserConfig& cfg, RngStream& rng);

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters();
  std::vector<Parameter>& raw_parameters() { return params_; }

  /// x: (N, 1, H, W).
  Var forward(Graph& g, Var x);
  Tensor operator()(const Tensor& x);

private:
  DenoiserConfig cfg_;
  std::vector<Parameter> params_;
};

} // namespace recorrupt
