// Counter-based deterministic RNG: splitmix64 core with explicit substream
// derivation, so ensemble members are reproducible regardless of scheduling.
#pragma once

#include <cmath>
#include <cstdint>

namespace asgdlab {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform on the open interval (0,1); never returns 0 or 1, so logs are safe.
  double next_u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare half of each pair is cached.
  double next_gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_u01();
    double u2 = next_u01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives the seed of substream `idx` from a master seed. Used for
// per-trajectory streams; the map is injective enough for ensemble use and
// has no sequential dependence between substreams.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t idx) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (idx + 1));
  return splitmix64_next(s);
}

}  // namespace asgdlab
