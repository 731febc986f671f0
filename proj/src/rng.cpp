#include "recorrupt/rng.hpp"

#include <cmath>
#include <numbers>

namespace recorrupt {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(splitmix64(seed ^ splitmix64(stream_id ^ 0x5851f42d4c957f2dULL))) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return splitmix64(splitmix64(key_ + counter_ * kGolden) ^ key_);
}

double RngStream::uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

RngStream RngStream::split(std::uint64_t stream_id) const { return RngStream(key_, stream_id); }

} // namespace recorrupt
