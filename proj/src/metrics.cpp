#include "recorrupt/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace recorrupt {

Psnr psnr(const Tensor& x, const Tensor& ref, double peak, double cap) {
  require_same_shape("psnr", x, ref);
  const double m = mse(x, ref);
  if (m == 0.0) return {cap, true};
  return {10.0 * std::log10(peak * peak / m), false};
}

namespace {

constexpr std::size_t kWin = 11;

std::vector<double> gaussian_window() {
  std::vector<double> w(kWin);
  double s = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

// Valid-region separable filtering of an h x w plane.
std::vector<double> filter(const std::vector<double>& img, std::size_t h, std::size_t w, const std::vector<double>& k) {
  const std::size_t oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < kWin; ++i) s += k[i] * img[y * w + x + i];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < kWin; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

} // namespace

double ssim(const Tensor& x, const Tensor& ref) {
  require_same_shape("ssim", x, ref);
  std::size_t h = 0, w = 0;
  if (x.rank() == 2) {
    h = x.dim(0);
    w = x.dim(1);
  } else if (x.rank() == 4 && x.dim(0) == 1 && x.dim(1) == 1) {
    h = x.dim(2);
    w = x.dim(3);
  } else {
    throw std::invalid_argument("ssim: expected (H, W) or (1, 1, H, W), got " + to_string(x.shape()));
  }
  if (h < kWin || w < kWin) throw std::invalid_argument("ssim: image " + to_string(x.shape()) + " is smaller than the 11x11 window");
  const std::vector<double> k = gaussian_window();
  const std::vector<double>& a = x.storage();
  const std::vector<double>& b = ref.storage();
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto ma = filter(a, h, w, k), mb = filter(b, h, w, k);
  const auto saa = filter(aa, h, w, k), sbb = filter(bb, h, w, k), sab = filter(ab, h, w, k);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cab = sab[i] - ma[i] * mb[i];
    total += (2.0 * ma[i] * mb[i] + c1) * (2.0 * cab + c2) / ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(ma.size());
}

} // namespace recorrupt
