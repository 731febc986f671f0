#include "recorrupt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "recorrupt/autodiff.hpp"
#include "recorrupt/io.hpp"
#include "recorrupt/noise.hpp"

namespace recorrupt {

Tensor synthetic_image(std::size_t size, RngStream& rng) {
  if (size < 16) throw std::invalid_argument("dataset: image size must be >= 16, got " + std::to_string(size));
  const double s = static_cast<double>(size);
  Tensor img(Shape{1, 1, size, size});
  const double g0 = rng.uniform(), gx = rng.uniform() - 0.5, gy = rng.uniform() - 0.5;
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) img.at(0, 0, y, x) = g0 + gx * double(x) / s + gy * double(y) / s;
  const int rects = 2 + int(rng.uniform() * 4.0);
  for (int r = 0; r < rects; ++r) {
    const auto x0 = std::size_t(rng.uniform() * s), y0 = std::size_t(rng.uniform() * s);
    const auto w = std::size_t(s * (0.1 + 0.4 * rng.uniform())), h = std::size_t(s * (0.1 + 0.4 * rng.uniform()));
    const double v = rng.uniform();
    for (std::size_t y = y0; y < std::min(size, y0 + h); ++y)
      for (std::size_t x = x0; x < std::min(size, x0 + w); ++x) img.at(0, 0, y, x) = v;
  }
  const int blobs = 1 + int(rng.uniform() * 3.0);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform() * s, cy = rng.uniform() * s;
    const double rad = s * (0.05 + 0.15 * rng.uniform());
    const double amp = 2.0 * rng.uniform() - 1.0;
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = double(x) - cx, dy = double(y) - cy;
        img.at(0, 0, y, x) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * rad * rad));
      }
  }
  img = conv2d(img, gaussian_kernel(3, 0.7).reshaped(Shape{1, 1, 3, 3}));
  const auto [lo, hi] = std::minmax_element(img.storage().begin(), img.storage().end());
  const double mn = *lo, range = std::max(*hi - *lo, 1e-12);
  for (double& v : img.storage()) v = 0.05 + 0.9 * (v - mn) / range;
  return img;
}

Tensor synthetic_images(std::size_t n, std::size_t size, const RngStream& rng) {
  if (n == 0) return Tensor(Shape{0, 1, size, size});
  std::vector<Tensor> items;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream sub = rng.split(i);
    items.push_back(synthetic_image(size, sub));
  }
  return stack_batch(items);
}

std::vector<std::string> gen_dataset(std::size_t n_images, std::size_t size, std::uint64_t seed, const std::string& out_dir) {
  if (size < 16) throw std::invalid_argument("dataset: image size must be >= 16, got " + std::to_string(size));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + out_dir + "': " + ec.message());
  const RngStream rng(seed);
  std::vector<std::string> names;
  std::string manifest;
  for (std::size_t i = 0; i < n_images; ++i) {
    RngStream sub = rng.split(i);
    char name[32];
    std::snprintf(name, sizeof name, "img_%04zu.pgm", i);
    write_pgm(out_dir + "/" + name, synthetic_image(size, sub));
    names.emplace_back(name);
    manifest += std::string(name) + "\n";
  }
  write_file(out_dir + "/manifest.txt", manifest);
  return names;
}

Tensor load_dataset(const std::string& dir) {
  std::istringstream manifest(read_file(dir + "/manifest.txt"));
  std::vector<Tensor> items;
  std::string name;
  while (std::getline(manifest, name)) {
    if (name.empty()) continue;
    items.push_back(read_pgm(dir + "/" + name));
  }
  if (items.empty()) throw std::runtime_error("dataset '" + dir + "' lists no images");
  return stack_batch(items);
}

} // namespace recorrupt
