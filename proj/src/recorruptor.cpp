#include "recorrupt/recorruptor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "recorrupt/optim.hpp"

namespace recorrupt {

namespace {

double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }

double softplus(double x) { return x > 20.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

} // namespace

void RecorruptorConfig::validate() const {
  if (depth < 1) throw std::domain_error("recorruptor: depth must be >= 1");
  if (width < 1) throw std::domain_error("recorruptor: width must be >= 1");
  if (kernel_size % 2 == 0) throw std::domain_error("recorruptor: kernel_size must be odd");
}

Recorruptor::Recorruptor(const RecorruptorConfig& cfg, RngStream& rng) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    const std::size_t in = l == 0 ? 1 : cfg_.width;
    const std::size_t out = l + 1 == cfg_.depth ? 1 : cfg_.width;
    Tensor w(Shape{out, in});
    for (double& v : w.storage()) v = softplus_inverse((0.5 + rng.uniform()) / static_cast<double>(in));
    Tensor b(Shape{out, 1});
    for (double& v : b.storage()) v = 0.1 * rng.normal();
    layers_.emplace_back("h.layer" + std::to_string(l) + ".raw_weight", std::move(w));
    layers_.emplace_back("h.layer" + std::to_string(l) + ".bias", std::move(b));
  }
  Tensor k(Shape{1, 1, cfg_.kernel_size, cfg_.kernel_size});
  k[k.size() / 2] = cfg_.kernel_init;
  kernel_ = Parameter("h.kernel", std::move(k));
}

std::vector<Parameter*> Recorruptor::parameters() {
  std::vector<Parameter*> out = mlp_parameters();
  out.push_back(&kernel_);
  return out;
}

std::vector<Parameter*> Recorruptor::mlp_parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : layers_) out.push_back(&p);
  return out;
}

Var Recorruptor::mlp(Graph& g, Var w) {
  const Shape shape = w.shape();
  const std::size_t n = w.value().size();
  Var a = ad::reshape(w, Shape{1, n});
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    Var wr = g.parameter(layers_[2 * l]);
    Var b = g.parameter(layers_[2 * l + 1]);
    const std::size_t out = layers_[2 * l].value.dim(0);
    a = ad::matmul(ad::softplus(wr), a) + ad::broadcast_to(b, Shape{out, n});
    if (l + 1 < cfg_.depth) a = ad::softplus(a);
  }
  return ad::reshape(a, shape);
}

Tensor Recorruptor::mlp(const Tensor& w) const {
  Tensor out = Tensor::like(w);
  std::vector<double> a, next;
  for (std::size_t i = 0; i < w.size(); ++i) {
    a.assign(1, w[i]);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      const Tensor& raw = layers_[2 * l].value;
      const Tensor& bias = layers_[2 * l + 1].value;
      const std::size_t rows = raw.dim(0), cols = raw.dim(1);
      next.assign(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        double z = bias[r];
        for (std::size_t c = 0; c < cols; ++c) z += softplus(raw[r * cols + c]) * a[c];
        next[r] = l + 1 < cfg_.depth ? softplus(z) : z;
      }
      a.swap(next);
    }
    out[i] = a[0];
  }
  return out;
}

double Recorruptor::mlp_scalar(double w) const { return mlp(Tensor(Shape{1}, w))[0]; }

Var Recorruptor::normalize(Var a) {
  const Shape shape = a.shape();
  Var centred = a - ad::broadcast_to(ad::mean(a), shape);
  Var sd = ad::sqrt(ad::add_scalar(ad::mean(ad::square(centred)), 1e-12));
  return centred / ad::broadcast_to(sd, shape);
}

Var Recorruptor::forward(Graph& g, const Tensor& w, const Tensor* y) {
  if (w.rank() != 4 || w.dim(1) != 1) throw std::invalid_argument("recorruptor: w must be (N, 1, H, W), got " + to_string(w.shape()));
  if (cfg_.pg_scale && !y) throw std::invalid_argument("recorruptor: pg_scale needs the measurement y");
  Var out = ad::conv2d(normalize(mlp(g, g.constant(w))), g.parameter(kernel_));
  if (cfg_.pg_scale) {
    require_same_shape("recorruptor", w, *y);
    std::size_t bad = 0;
    for (double v : y->storage())
      if (v < 0.0) ++bad;
    if (bad) throw std::domain_error("recorruptor: pg_scale needs y >= 0, found " + std::to_string(bad) + " negative pixel(s)");
    out = out * g.constant(map(*y, [](double v) { return std::sqrt(v); }));
  }
  return out;
}

Tensor Recorruptor::forward_value(const Tensor& w, const Tensor* y) {
  Graph g;
  return forward(g, w, y).value();
}

double identity_pretrain(Recorruptor& h, std::size_t n_steps, RngStream& rng, double lr) {
  RngStream held = rng.split(1);
  Tensor test(Shape{4096});
  for (double& v : test.storage()) v = held.normal();
  // Stop on an upper confidence bound so the target holds on fresh draws too.
  auto held_out = [&] {
    const Tensor out = h.mlp(test);
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const double e = (out[i] - test[i]) * (out[i] - test[i]);
      m += e;
      m2 += e * e;
    }
    const double n = static_cast<double>(test.size());
    m /= n;
    return std::pair{m, m + 4.0 * std::sqrt(std::max(0.0, m2 / n - m * m) / n)};
  };
  auto [err, bound] = held_out();
  if (n_steps == 0) return err;
  AdamW opt(h.mlp_parameters(), AdamWConfig{lr, 0.9, 0.999, 1e-8, 0.0});
  RngStream train = rng.split(2);
  for (std::size_t s = 0; s < n_steps && bound >= 1e-3; ++s) {
    Tensor w(Shape{1024});
    for (double& v : w.storage()) v = train.normal();
    opt.zero_grad();
    Graph g;
    Var loss = ad::mean(ad::square(h.mlp(g, g.constant(w)) - g.constant(w)));
    g.backward(loss);
    opt.step();
    if (s % 10 == 9 || s + 1 == n_steps) std::tie(err, bound) = held_out();
  }
  return err;
}

} // namespace recorrupt
