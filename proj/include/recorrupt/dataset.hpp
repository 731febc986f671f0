#pragma once

#include <string>
#include <vector>

#include "recorrupt/rng.hpp"
#include "recorrupt/tensor.hpp"

namespace recorrupt {

/// One piecewise-smooth image (1, 1, size, size) in [0.05, 0.95]: a linear gradient, random
/// rectangles and Gaussian blobs, lightly smoothed.
Tensor synthetic_image(std::size_t size, RngStream& rng);
/// n images stacked to (n, 1, size, size); image i draws from rng.split(i).
Tensor synthetic_images(std::size_t n, std::size_t size, const RngStream& rng);

/// Writes img_0000.pgm ... and manifest.txt (one file name per line) into out_dir.
std::vector<std::string> gen_dataset(std::size_t n_images, std::size_t size, std::uint64_t seed, const std::string& out_dir);
/// Reads every image listed in dir/manifest.txt, stacked to (n, 1, H, W).
Tensor load_dataset(const std::string& dir);

} // namespace recorrupt
