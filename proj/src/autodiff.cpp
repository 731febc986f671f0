#include "recorrupt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recorrupt {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(Tensor::like(value)) {}

const Tensor& Var::value() const { return graph_->value(id_); }

Tensor Var::grad() const {
  const Tensor& g = graph_->grad(id_);
  if (g.same_shape(value())) return g;
  return Tensor::like(value());
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
  if (!p.grad.same_shape(p.value)) p.grad = Tensor::like(p.value);
  Node n;
  n.value = p.value;
  n.parameter = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw std::domain_error(std::string(op) + ": non-finite output");
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (&v.graph() != this) throw std::logic_error(std::string(op) + ": operands belong to different graphs");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor::like(n.value);
  return n.grad;
}

void Graph::backward(Var output, double seed) {
  if (&output.graph() != this) throw std::logic_error("backward: output belongs to a different graph");
  if (output.value().size() != 1) {
    throw std::invalid_argument("backward: output must be scalar, got shape " + to_string(output.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(output.id())[0] = seed;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad.same_shape(n.value)) continue;
    if (n.parameter != nullptr) {
      Tensor& pg = n.parameter->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
    if (n.backward) n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Convolution kernels (stride 1, zero padding, odd kernel extents).

namespace {

struct ConvDims {
  std::size_t n, c, h, w, o, kh, kw;
};

ConvDims conv_dims(const Shape& x, const Shape& k) {
  if (x.size() != 4 || k.size() != 4) {
    throw std::invalid_argument("conv2d: expected rank-4 input and kernel, got " + to_string(x) + " and " +
                                to_string(k));
  }
  if (x[1] != k[1]) {
    throw std::invalid_argument("conv2d: channel mismatch between input " + to_string(x) + " and kernel " +
                                to_string(k));
  }
  if (k[2] % 2 == 0 || k[3] % 2 == 0) throw std::invalid_argument("conv2d: kernel extents must be odd, got " + to_string(k));
  return {x[0], x[1], x[2], x[3], k[0], k[2], k[3]};
}

struct Tap {
  std::ptrdiff_t dy, dx;
  std::size_t y0, y1, x0, x1;
};

Tap make_tap(const ConvDims& d, std::size_t ky, std::size_t kx) {
  Tap t;
  t.dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(d.kh / 2);
  t.dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(d.kw / 2);
  const auto h = static_cast<std::ptrdiff_t>(d.h);
  const auto w = static_cast<std::ptrdiff_t>(d.w);
  t.y0 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-t.dy, 0, h));
  t.y1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(h - t.dy, 0, h));
  t.x0 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-t.dx, 0, w));
  t.x1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(w - t.dx, 0, w));
  return t;
}

void conv_forward(const ConvDims& d, const double* __restrict x, const double* __restrict k, double* __restrict y) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t o = 0; o < d.o; ++o) {
      double* yo = y + (n * d.o + o) * plane;
      for (std::size_t c = 0; c < d.c; ++c) {
        const double* xc = x + (n * d.c + c) * plane;
        for (std::size_t ky = 0; ky < d.kh; ++ky)
          for (std::size_t kx = 0; kx < d.kw; ++kx) {
            const double wv = k[((o * d.c + c) * d.kh + ky) * d.kw + kx];
            const Tap t = make_tap(d, ky, kx);
            for (std::size_t yy = t.y0; yy < t.y1; ++yy) {
              double* __restrict yr = yo + yy * d.w;
              const double* __restrict xr = xc + static_cast<std::ptrdiff_t>(yy * d.w) + t.dy * static_cast<std::ptrdiff_t>(d.w) + t.dx;
              for (std::size_t xx = t.x0; xx < t.x1; ++xx) yr[xx] += wv * xr[xx];
            }
          }
      }
    }
}

void conv_backward_input(const ConvDims& d, const double* __restrict gy, const double* __restrict k, double* __restrict gx) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t c = 0; c < d.c; ++c) {
      double* gxc = gx + (n * d.c + c) * plane;
      for (std::size_t o = 0; o < d.o; ++o) {
        const double* gyo = gy + (n * d.o + o) * plane;
        for (std::size_t ky = 0; ky < d.kh; ++ky)
          for (std::size_t kx = 0; kx < d.kw; ++kx) {
            const double wv = k[((o * d.c + c) * d.kh + ky) * d.kw + kx];
            const Tap t = make_tap(d, ky, kx);
            for (std::size_t yy = t.y0; yy < t.y1; ++yy) {
              const double* __restrict gyr = gyo + yy * d.w;
              double* __restrict gxr = gxc + static_cast<std::ptrdiff_t>(yy * d.w) + t.dy * static_cast<std::ptrdiff_t>(d.w) + t.dx;
              for (std::size_t xx = t.x0; xx < t.x1; ++xx) gxr[xx] += wv * gyr[xx];
            }
          }
      }
    }
}

void conv_backward_kernel(const ConvDims& d, const double* gy, const double* x, double* gk) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t o = 0; o < d.o; ++o)
    for (std::size_t c = 0; c < d.c; ++c)
      for (std::size_t ky = 0; ky < d.kh; ++ky)
        for (std::size_t kx = 0; kx < d.kw; ++kx) {
          const Tap t = make_tap(d, ky, kx);
          double acc = 0.0;
          for (std::size_t n = 0; n < d.n; ++n) {
            const double* gyo = gy + (n * d.o + o) * plane;
            const double* xc = x + (n * d.c + c) * plane;
            for (std::size_t yy = t.y0; yy < t.y1; ++yy) {
              const double* gyr = gyo + yy * d.w;
              const double* xr = xc + static_cast<std::ptrdiff_t>(yy * d.w) + t.dy * static_cast<std::ptrdiff_t>(d.w) + t.dx;
#pragma omp simd reduction(+ : acc)
              for (std::size_t xx = t.x0; xx < t.x1; ++xx) acc += gyr[xx] * xr[xx];
            }
          }
          gk[((o * d.c + c) * d.kh + ky) * d.kw + kx] += acc;
        }
}

// Broadcast iteration: calls f(out_index, in_index) for every output element.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& in_strides, F&& f) {
  const std::size_t rank = out.size();
  const std::size_t total = numel(out);
  if (total == 0) return;
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t inner = out[rank - 1];
  const std::size_t inner_stride = in_strides[rank - 1];
  std::size_t base = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(o + j, base + j * inner_stride);
    for (std::size_t dd = rank - 1; dd-- > 0;) {
      ++idx[dd];
      base += in_strides[dd];
      if (idx[dd] < out[dd]) break;
      base -= in_strides[dd] * out[dd];
      idx[dd] = 0;
    }
  }
}

template <class F, class D>
Var unary(const char* op, Var a, F&& f, D dfdx) {
  Tensor y = map(a.value(), f);
  return a.graph().record(op, std::move(y), {a}, [dfdx](Graph& g, std::size_t self) {
    const std::size_t in = g.input_id(self, 0);
    if (!g.requires_grad(in)) return;
    const Tensor& x = g.value(in);
    const Tensor& y = g.value(self);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(in);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfdx(x[i], y[i]);
  });
}

void require_positive(const char* op, const Tensor& x) {
  std::size_t bad = 0;
  for (double v : x.storage())
    if (!(v > 0.0)) ++bad;
  if (bad) {
    throw std::domain_error(std::string(op) + ": " + std::to_string(bad) + " non-positive input element(s)");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return x > 20.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  const ConvDims d = conv_dims(x.shape(), kernel.shape());
  Tensor y(Shape{d.n, d.o, d.h, d.w});
  conv_forward(d, x.data().data(), kernel.data().data(), y.data().data());
  return y;
}

namespace ad {

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  return a.graph().record("add", a.value() + b.value(), {a, b}, [](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t in = g.input_id(self, k);
      if (!g.requires_grad(in)) continue;
      Tensor& gx = g.grad_buffer(in);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  return a.graph().record("sub", a.value() - b.value(), {a, b}, [](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const std::size_t ia = g.input_id(self, 0), ib = g.input_id(self, 1);
    if (g.requires_grad(ia)) {
      Tensor& gx = g.grad_buffer(ia);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gx = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  return a.graph().record("mul", a.value() * b.value(), {a, b}, [](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const std::size_t ia = g.input_id(self, 0), ib = g.input_id(self, 1);
    if (g.requires_grad(ia)) {
      const Tensor& vb = g.value(ib);
      Tensor& gx = g.grad_buffer(ia);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * vb[i];
    }
    if (g.requires_grad(ib)) {
      const Tensor& va = g.value(ia);
      Tensor& gx = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * va[i];
    }
  });
}

Var div(Var a, Var b) {
  require_same_shape("div", a.value(), b.value());
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= b.value()[i];
  return a.graph().record("div", std::move(y), {a, b}, [](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const std::size_t ia = g.input_id(self, 0), ib = g.input_id(self, 1);
    const Tensor& vb = g.value(ib);
    if (g.requires_grad(ia)) {
      Tensor& gx = g.grad_buffer(ia);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] / vb[i];
    }
    if (g.requires_grad(ib)) {
      const Tensor& out = g.value(self);
      Tensor& gx = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= gy[i] * out[i] / vb[i];
    }
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor y(Shape{m, n});
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = va[i * k + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aip * vb[p * n + j];
    }
  return a.graph().record("matmul", std::move(y), {a, b}, [m, k, n](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const std::size_t ia = g.input_id(self, 0), ib = g.input_id(self, 1);
    const Tensor& va = g.value(ia);
    const Tensor& vb = g.value(ib);
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += gy[i * n + j] * vb[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = va[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * gy[i * n + j];
        }
    }
  });
}

Var transpose(Var a) {
  const Shape& s = a.shape();
  if (s.size() != 2) throw std::invalid_argument("transpose: expected rank 2, got " + to_string(s));
  const std::size_t m = s[0], n = s[1];
  Tensor y(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = a.value()[i * n + j];
  return a.graph().record("transpose", std::move(y), {a}, [m, n](Graph& g, std::size_t self) {
    const std::size_t in = g.input_id(self, 0);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(in);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += gy[j * m + i];
  });
}

Var conv2d(Var x, Var kernel) {
  const ConvDims d = conv_dims(x.shape(), kernel.shape());
  Tensor y(Shape{d.n, d.o, d.h, d.w});
  conv_forward(d, x.value().data().data(), kernel.value().data().data(), y.data().data());
  return x.graph().record("conv2d", std::move(y), {x, kernel}, [d](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const std::size_t ix = g.input_id(self, 0), ik = g.input_id(self, 1);
    if (g.requires_grad(ix)) {
      Tensor& gx = g.grad_buffer(ix);
      conv_backward_input(d, gy.data().data(), g.value(ik).data().data(), gx.data().data());
    }
    if (g.requires_grad(ik)) {
      Tensor& gk = g.grad_buffer(ik);
      conv_backward_kernel(d, gy.data().data(), g.value(ix).data().data(), gk.data().data());
    }
  });
}

Var sum(Var a) {
  return a.graph().record("sum", Tensor::scalar(recorrupt::sum(a.value())), {a}, [](Graph& g, std::size_t self) {
    const std::size_t in = g.input_id(self, 0);
    const double gy = g.grad(self)[0];
    Tensor& gx = g.grad_buffer(in);
    for (double& v : gx.storage()) v += gy;
  });
}

Var mean(Var a) {
  if (a.value().empty()) throw std::invalid_argument("mean: empty tensor");
  const double n = static_cast<double>(a.value().size());
  return a.graph().record("mean", Tensor::scalar(recorrupt::sum(a.value()) / n), {a}, [n](Graph& g, std::size_t self) {
    const std::size_t in = g.input_id(self, 0);
    const double gy = g.grad(self)[0] / n;
    Tensor& gx = g.grad_buffer(in);
    for (double& v : gx.storage()) v += gy;
  });
}

Var dot(Var a, Var b) {
  require_same_shape("dot", a.value(), b.value());
  return a.graph().record("dot", Tensor::scalar(recorrupt::dot(a.value(), b.value())), {a, b},
                          [](Graph& g, std::size_t self) {
                            const double gy = g.grad(self)[0];
                            const std::size_t ia = g.input_id(self, 0), ib = g.input_id(self, 1);
                            if (g.requires_grad(ia)) {
                              const Tensor& vb = g.value(ib);
                              Tensor& gx = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy * vb[i];
                            }
                            if (g.requires_grad(ib)) {
                              const Tensor& va = g.value(ia);
                              Tensor& gx = g.grad_buffer(ib);
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy * va[i];
                            }
                          });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  require_positive("sqrt", a.value());
  return unary("sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  require_positive("log", a.value());
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary("softplus", a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lower bound above upper bound");
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var broadcast_to(Var a, Shape shape) {
  const Shape& in = a.shape();
  if (in.size() > shape.size()) {
    throw std::invalid_argument("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
  }
  const std::size_t offset = shape.size() - in.size();
  std::vector<std::size_t> strides(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    const std::size_t od = shape[k + offset];
    if (in[k] != od && in[k] != 1) {
      throw std::invalid_argument("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
    }
    strides[k + offset] = in[k] == 1 ? 0 : stride;
    stride *= in[k];
  }
  Tensor y(shape);
  const Tensor& x = a.value();
  for_each_broadcast(shape, strides, [&](std::size_t o, std::size_t i) { y[o] = x[i]; });
  return a.graph().record("broadcast_to", std::move(y), {a},
                          [shape = std::move(shape), strides = std::move(strides)](Graph& g, std::size_t self) {
                            const std::size_t in_id = g.input_id(self, 0);
                            const Tensor& gy = g.grad(self);
                            Tensor& gx = g.grad_buffer(in_id);
                            for_each_broadcast(shape, strides, [&](std::size_t o, std::size_t i) { gx[i] += gy[o]; });
                          });
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return a.graph().record("reshape", std::move(y), {a}, [](Graph& g, std::size_t self) {
    const std::size_t in = g.input_id(self, 0);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(in);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || start + length > s[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") on axis " + std::to_string(axis) + " outside " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
  for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
  const std::size_t extent = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor y(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < length * inner; ++j) y[o * length * inner + j] = x[(o * extent + start) * inner + j];
  return a.graph().record("slice", std::move(y), {a},
                          [outer, inner, extent, start, length](Graph& g, std::size_t self) {
                            const std::size_t in = g.input_id(self, 0);
                            const Tensor& gy = g.grad(self);
                            Tensor& gx = g.grad_buffer(in);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t j = 0; j < length * inner; ++j)
                                gx[(o * extent + start) * inner + j] += gy[o * length * inner + j];
                          });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts.front().shape();
  if (axis >= s0.size()) throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for " + to_string(s0));
  std::vector<std::size_t> extents;
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = (k == axis) || s[k] == s0[k];
    if (!ok) throw std::invalid_argument("concat: shape mismatch " + to_string(s0) + " vs " + to_string(s));
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= s0[k];
  for (std::size_t k = axis + 1; k < s0.size(); ++k) inner *= s0[k];
  const std::size_t total = out_shape[axis];
  Tensor y(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < extents[p] * inner; ++j) y[(o * total + offset) * inner + j] = x[o * extents[p] * inner + j];
    offset += extents[p];
  }
  return parts.front().graph().record(
      "concat", std::move(y), parts, [extents, outer, inner, total](Graph& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::size_t in = g.input_id(self, p);
          if (g.requires_grad(in)) {
            Tensor& gx = g.grad_buffer(in);
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t j = 0; j < extents[p] * inner; ++j)
                gx[o * extents[p] * inner + j] += gy[(o * total + offset) * inner + j];
          }
          offset += extents[p];
        }
      });
}

Var stop_gradient(Var a) { return a.graph().record("stop_gradient", a.value(), {}, nullptr); }

} // namespace ad
} // namespace recorrupt
