#pragma once

#include "recorrupt/tensor.hpp"

namespace recorrupt {

struct Psnr {
  double db = 0.0;
  /// True when the images were identical and db holds the cap.
  bool capped = false;
};

/// 10 log10(peak^2 / MSE); identical inputs return `cap` with the flag set.
Psnr psnr(const Tensor& x, const Tensor& ref, double peak = 1.0, double cap = 99.0);

/// Mean local SSIM over the valid region of an 11x11 Gaussian window (std 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Accepts (H, W) or (1, 1, H, W).
double ssim(const Tensor& x, const Tensor& ref);

} // namespace recorrupt
