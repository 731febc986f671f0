#pragma once

#include <cstddef>
#include <vector>

#include "recorrupt/autodiff.hpp"

namespace recorrupt {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay followed by a bias-corrected Adam step.
class AdamW {
public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

  /// grad_sign = -1 turns the update into ascent on the parameters' objective.
  void step(double grad_sign = 1.0);
  void zero_grad();

  double lr() const { return cfg_.lr; }
  void set_lr(double lr);
  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& params() const { return params_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct CosineSchedule {
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  std::size_t total_steps = 1;
};

/// lr_end + (lr_start - lr_end)(1 + cos(pi t / total)) / 2 for t in [0, total].
double cosine_lr(const CosineSchedule& s, double t);

} // namespace recorrupt
