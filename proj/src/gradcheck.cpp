#include "recorrupt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recorrupt {

namespace {

void check_step(double step) {
  if (!(step > 0.0 && step <= 1e-3)) throw std::invalid_argument("grad_check: step must lie in (0, 1e-3]");
}

double scalar_of(Var v) {
  if (v.value().size() != 1) {
    throw std::invalid_argument("grad_check: function output has shape " + to_string(v.shape()) + ", expected a scalar");
  }
  return v.value()[0];
}

double rel_err(double a, double n, double floor) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); }

template <class Eval>
double derivative(Eval eval, double& slot, double h, bool richardson) {
  const double saved = slot;
  auto central = [&](double step) {
    slot = saved + step;
    const double up = eval();
    slot = saved - step;
    const double down = eval();
    slot = saved;
    return (up - down) / (2.0 * step);
  };
  const double d1 = central(h);
  if (!richardson) return d1;
  const double d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

} // namespace

double grad_check(const ScalarFn& f, const Tensor& point, double step, GradCheckOptions opts) {
  check_step(step);
  Tensor analytic;
  {
    Graph g;
    Var x = g.input(point);
    Var out = f(g, x);
    scalar_of(out);
    g.backward(out);
    analytic = x.grad();
  }
  auto eval = [&](const Tensor& p) {
    Graph g;
    return scalar_of(f(g, g.input(p)));
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i)
    worst = std::max(worst, rel_err(analytic[i], derivative([&] { return eval(probe); }, probe[i], step, opts.richardson), opts.floor));
  return worst;
}

double grad_check(const ParamFn& f, const std::vector<Parameter*>& params, double step, GradCheckOptions opts) {
  check_step(step);
  for (Parameter* p : params) p->grad = Tensor::like(p->value);
  {
    Graph g;
    Var out = f(g);
    scalar_of(out);
    g.backward(out);
  }
  auto eval = [&]() {
    Graph g;
    return scalar_of(f(g));
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i)
      worst = std::max(worst, rel_err(p->grad[i], derivative(eval, p->value[i], step, opts.richardson), opts.floor));
  }
  return worst;
}

} // namespace recorrupt
