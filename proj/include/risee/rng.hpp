#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace risee::rng {

// Stream tags keep independent random substreams from colliding. A substream
// is addressed as (root_seed, tag, indices...) so trials can run in any order
// or in parallel and still reproduce bit-identical draws.
enum class StreamTag : std::uint64_t {
  kUserPositions = 1,
  kDirectChannel = 2,
  kBsRisChannel = 3,
  kRisUserChannel = 4,
  kExhaustiveStart = 5,
  kPhaseSearch = 6,
  kTrial = 7,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash an ordered list of seed parts into one 64-bit stream seed.
inline std::uint64_t mix(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x6a09e667f3bcc909ULL;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t p : parts) {
    state ^= p;
    h ^= splitmix64(state) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

/// Deterministic uniform/Gaussian stream. std::mt19937_64 output is fixed by
/// the standard and the Box-Muller transform below uses only that stream, so
/// draws are reproducible across platforms.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_positive() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller on the uniform stream.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Circularly-symmetric complex normal CN(0, 1): Re, Im ~ N(0, 1/2).
  std::complex<double> cnormal() {
    const double re = normal() * M_SQRT1_2;
    const double im = normal() * M_SQRT1_2;
    return {re, im};
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline Stream substream(std::uint64_t root, StreamTag tag,
                        std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t state = 0x6a09e667f3bcc909ULL;
  std::uint64_t h = splitmix64(state);
  state ^= root;
  h ^= splitmix64(state) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  state ^= static_cast<std::uint64_t>(tag);
  h ^= splitmix64(state) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  for (std::uint64_t idx : indices) {
    state ^= idx;
    h ^= splitmix64(state) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return Stream(h);
}

}  // namespace risee::rng
