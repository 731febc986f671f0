#include "recorrupt/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace recorrupt {

void DenoiserConfig::validate() const {
  if (layers < 1) throw std::domain_error("denoiser: layers must be >= 1");
  if (channels < 1) throw std::domain_error("denoiser: channels must be >= 1");
  if (kernel_size % 2 == 0) throw std::domain_error("denoiser: kernel_size must be odd");
}

ToyCnn::ToyCnn(const DenoiserConfig& cfg, RngStream& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t k = cfg_.kernel_size;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::size_t in = l == 0 ? 1 : cfg_.channels;
    const std::size_t out = l + 1 == cfg_.layers ? 1 : cfg_.channels;
    const double fan_in = static_cast<double>(in * k * k);
    // He init; the last layer starts small so the residual net begins near the identity.
    const double sd = (l + 1 == cfg_.layers ? 0.1 : 1.0) * std::sqrt(2.0 / fan_in);
    Tensor w(Shape{out, in, k, k});
    for (double& v : w.storage()) v = sd * rng.normal();
    params_.emplace_back("f.conv" + std::to_string(l) + ".weight", std::move(w));
    params_.emplace_back("f.conv" + std::to_string(l) + ".bias", Tensor(Shape{1, out, 1, 1}));
  }
}

std::vector<Parameter*> ToyCnn::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

Var ToyCnn::forward(Graph& g, Var x) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 1) throw std::invalid_argument("denoiser: input must be (N, 1, H, W), got " + to_string(s));
  Var a = x;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    Var w = g.parameter(params_[2 * l]);
    Var b = g.parameter(params_[2 * l + 1]);
    a = ad::conv2d(a, w);
    a = a + ad::broadcast_to(b, a.shape());
    if (l + 1 < cfg_.layers) a = ad::relu(a);
  }
  if (cfg_.residual) a = a + x;
  if (cfg_.head == OutputHead::Sigmoid) a = ad::sigmoid(a);
  return a;
}

Tensor ToyCnn::operator()(const Tensor& x) {
  Graph g;
  return forward(g, g.constant(x)).value();
}

} // namespace recorrupt
