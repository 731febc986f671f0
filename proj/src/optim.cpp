#include "recorrupt/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace recorrupt {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0.0)) throw std::domain_error("adamw: lr must be >= 0");
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0)) {
    throw std::domain_error("adamw: betas must lie in [0, 1)");
  }
  if (!(cfg_.eps > 0.0)) throw std::domain_error("adamw: eps must be > 0");
  if (!(cfg_.weight_decay >= 0.0)) throw std::domain_error("adamw: weight_decay must be >= 0");
  for (Parameter* p : params_) {
    m_.push_back(Tensor::like(p->value));
    v_.push_back(Tensor::like(p->value));
  }
}

void AdamW::set_lr(double lr) {
  if (!(lr >= 0.0)) throw std::domain_error("adamw: lr must be >= 0");
  cfg_.lr = lr;
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void AdamW::step(double grad_sign) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Parameter& p = *params_[k];
    require_same_shape("adamw", p.value, p.grad);
    if (!p.grad.all_finite()) throw std::domain_error("adamw: non-finite gradient in parameter '" + p.name + "'");
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2, lr = cfg_.lr;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * cfg_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    double* w = params_[k]->value.data().data();
    const double* g = params_[k]->grad.data().data();
    double* m = m_[k].data().data();
    double* v = v_[k].data().data();
    const std::size_t n = params_[k]->value.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = grad_sign * g[i];
      w[i] *= decay;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

double cosine_lr(const CosineSchedule& s, double t) {
  if (s.total_steps == 0) throw std::domain_error("cosine_lr: total_steps must be > 0");
  const double total = static_cast<double>(s.total_steps);
  if (!(t >= 0.0 && t <= total)) {
    throw std::out_of_range("cosine_lr: t = " + std::to_string(t) + " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  return s.lr_end + 0.5 * (s.lr_start - s.lr_end) * (1.0 + std::cos(std::numbers::pi * t / total));
}

} // namespace recorrupt
