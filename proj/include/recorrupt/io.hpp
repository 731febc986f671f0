#pragma once

#include <string>
#include <vector>

#include "recorrupt/autodiff.hpp"

namespace recorrupt {

/// Binary P5 grayscale. Values in [0, 1] are clamped and quantized round-half-up to maxval
/// (255 or 65535; 16-bit samples are big-endian). Accepts (H, W) or (1, 1, H, W).
std::string encode_pgm(const Tensor& image, int maxval = 65535);
/// Returns (1, 1, H, W) with values sample / maxval.
Tensor decode_pgm(const std::string& bytes);
void write_pgm(const std::string& path, const Tensor& image, int maxval = 65535);
Tensor read_pgm(const std::string& path);

/// "TSR1", u32 LE rank, u32 LE dims, f64 LE row-major payload.
std::string encode_tsr(const Tensor& t);
Tensor decode_tsr(const std::string& bytes);
void write_tsr(const std::string& path, const Tensor& t);
Tensor read_tsr(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

/// Checkpoint: `path` holds every parameter flattened into one rank-1 TSR1 tensor;
/// `path`.manifest lists "name offset shape" per parameter (shape as 16x1x3x3).
void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params);
/// Parameters must match the manifest by name and shape.
void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

} // namespace recorrupt
