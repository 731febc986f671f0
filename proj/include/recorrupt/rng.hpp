#pragma once

#include <cstdint>

namespace recorrupt {

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based generator: the n-th output is a pure function of
/// (seed, stream_id, n), so streams can be split without coordination.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// Independent child stream keyed by this stream's identity and `stream_id`.
  RngStream split(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

} // namespace recorrupt
