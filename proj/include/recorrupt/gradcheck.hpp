#pragma once

#include <functional>
#include <vector>

#include "recorrupt/autodiff.hpp"

namespace recorrupt {

/// Builds a scalar from a differentiable leaf holding the evaluation point.
using ScalarFn = std::function<Var(Graph&, Var)>;
/// Builds a scalar from whatever parameters it captures.
using ParamFn = std::function<Var(Graph&)>;

struct GradCheckOptions {
  /// Combine central differences at step and step / 2 (error O(h^4) instead of O(h^2)).
  bool richardson = false;
  /// Lower bound of the relative-error denominator.
  double floor = 1e-12;
};

/// Largest component-wise relative error between reverse-mode gradients and
/// central differences, with denominator max(|analytic|, |numeric|, floor).
double grad_check(const ScalarFn& f, const Tensor& point, double step, GradCheckOptions opts = {});

/// Same comparison over every element of `params`. Parameter values are
/// restored afterwards; their gradients are overwritten.
double grad_check(const ParamFn& f, const std::vector<Parameter*>& params, double step, GradCheckOptions opts = {});

} // namespace recorrupt
