#pragma once

#include <cmath>
#include <cstdint>

namespace cdpm {

// Counter-based pseudorandom stream.
//
// Each draw hashes (key, counter) with the splitmix64 finalizer, so a
// stream is a pure function of (seed, stream id, position). This makes
// every consumer reproducible from its seed alone: no hidden generator
// state, and independent streams can be derived for parallel work
// without coordinating positions.
//
// Normals use the Box-Muller transform on two fresh uniforms per draw
// (no spare caching), so the stream position is always 2x the number of
// normal draws plus the number of uniform draws.

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

// Combines two ids into one stream id. Not commutative.
inline constexpr std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b) {
  return detail::mix64(a * 0xda942042e4dd58b5ull + detail::kGolden) ^ b;
}

inline constexpr std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b,
                                             std::uint64_t c) {
  return derive_stream(derive_stream(a, b), c);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(detail::mix64(detail::mix64(seed + detail::kGolden) ^
                           (stream * 0xda942042e4dd58b5ull + 1))),
        counter_(0) {}

  std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  // Uniform on the open interval (0, 1); 53-bit resolution, never 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Derives an independent stream; does not disturb this stream's position.
  RandomStream fork(std::uint64_t substream) const {
    RandomStream r(0, 0);
    r.key_ = detail::mix64(key_ ^ detail::mix64(substream + detail::kGolden));
    return r;
  }

  std::uint64_t position() const { return counter_; }
  void set_position(std::uint64_t p) { counter_ = p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace cdpm
