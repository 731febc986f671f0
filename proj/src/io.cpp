#include "recorrupt/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace recorrupt {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

void image_extent(const Tensor& t, std::size_t& h, std::size_t& w) {
  if (t.rank() == 2) {
    h = t.dim(0);
    w = t.dim(1);
  } else if (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1) {
    h = t.dim(2);
    w = t.dim(3);
  } else {
    throw std::invalid_argument("pgm: expected (H, W) or (1, 1, H, W), got " + to_string(t.shape()));
  }
}

// Skips whitespace and '#' comments, then reads an unsigned decimal.
std::size_t pgm_number(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) throw std::runtime_error("pgm: malformed header");
  std::size_t v = 0;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) v = v * 10 + std::size_t(s[pos++] - '0');
  return v;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[pos + std::size_t(i)])) << (8 * i);
  return v;
}

} // namespace

std::string encode_pgm(const Tensor& image, int maxval) {
  if (maxval != 255 && maxval != 65535) throw std::invalid_argument("pgm: maxval must be 255 or 65535");
  std::size_t h = 0, w = 0;
  image_extent(image, h, w);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  for (double v : image.storage()) {
    const double c = std::isnan(v) ? 0.0 : std::min(1.0, std::max(0.0, v));
    const auto q = static_cast<std::uint32_t>(std::floor(c * maxval + 0.5));
    if (maxval == 65535) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

Tensor decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw std::runtime_error("pgm: not a binary P5 file");
  std::size_t pos = 2;
  const std::size_t w = pgm_number(bytes, pos), h = pgm_number(bytes, pos), maxval = pgm_number(bytes, pos);
  if (maxval == 0 || maxval > 65535) throw std::runtime_error("pgm: maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw std::runtime_error("pgm: malformed header");
  ++pos;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos != w * h * bps) {
    throw std::runtime_error("pgm: expected " + std::to_string(w * h * bps) + " payload bytes, found " + std::to_string(bytes.size() - pos));
  }
  Tensor t(Shape{1, 1, h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    std::uint32_t q = static_cast<unsigned char>(bytes[pos + i * bps]);
    if (bps == 2) q = (q << 8) | static_cast<unsigned char>(bytes[pos + i * bps + 1]);
    t[i] = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return t;
}

void write_pgm(const std::string& path, const Tensor& image, int maxval) { write_file(path, encode_pgm(image, maxval)); }

Tensor read_pgm(const std::string& path) { return decode_pgm(read_file(path)); }

std::string encode_tsr(const Tensor& t) {
  std::string out = "TSR1";
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.storage()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

Tensor decode_tsr(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "TSR1") != 0) throw std::runtime_error("tsr: bad magic");
  const std::uint32_t rank = get_u32(bytes, 4);
  if (bytes.size() < 8 + 4 * std::size_t(rank)) throw std::runtime_error("tsr: truncated header");
  Shape shape(rank);
  for (std::uint32_t k = 0; k < rank; ++k) shape[k] = get_u32(bytes, 8 + 4 * std::size_t(k));
  const std::size_t pos = 8 + 4 * std::size_t(rank);
  const std::size_t n = numel(shape);
  if (bytes.size() - pos != 8 * n) {
    throw std::runtime_error("tsr: shape " + to_string(shape) + " needs " + std::to_string(8 * n) + " payload bytes, found " +
                             std::to_string(bytes.size() - pos));
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(bytes[pos + 8 * i + std::size_t(b)])) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tsr(const std::string& path, const Tensor& t) { write_file(path, encode_tsr(t)); }

Tensor read_tsr(const std::string& path) { return decode_tsr(read_file(path)); }

namespace {

std::string shape_text(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

} // namespace

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::vector<double> flat;
  std::string manifest;
  for (const Parameter* p : params) {
    manifest += p->name + " " + std::to_string(flat.size()) + " " + shape_text(p->value.shape()) + "\n";
    flat.insert(flat.end(), p->value.storage().begin(), p->value.storage().end());
  }
  const std::size_t n = flat.size();
  write_tsr(path, Tensor(Shape{n}, std::move(flat)));
  write_file(path + ".manifest", manifest);
}

void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  const Tensor flat = read_tsr(path);
  std::istringstream manifest(read_file(path + ".manifest"));
  std::string name, shape;
  std::size_t offset = 0;
  std::size_t k = 0;
  while (manifest >> name >> offset >> shape) {
    if (k >= params.size()) throw std::runtime_error("checkpoint: more entries than parameters (extra '" + name + "')");
    Parameter& p = *params[k++];
    if (name != p.name) throw std::runtime_error("checkpoint: expected '" + p.name + "', found '" + name + "'");
    if (shape != shape_text(p.value.shape())) {
      throw std::runtime_error("checkpoint: '" + name + "' has shape " + shape + ", model expects " + shape_text(p.value.shape()));
    }
    if (offset + p.value.size() > flat.size()) throw std::runtime_error("checkpoint: '" + name + "' runs past the payload");
    std::copy(flat.storage().begin() + static_cast<std::ptrdiff_t>(offset),
              flat.storage().begin() + static_cast<std::ptrdiff_t>(offset + p.value.size()), p.value.storage().begin());
  }
  if (k != params.size()) throw std::runtime_error("checkpoint: missing entry for '" + params[k]->name + "'");
}

} // namespace recorrupt
