#pragma once

#include <cstdint>
#include <random>

namespace sevi {

// splitmix64 finalizer, used for seed derivation and stable hashing
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Seedable stream with cheap substreams: RngStream(seed, k) and
// RngStream(seed, k') are independent for k != k', so parallel work is
// reproducible from (seed, stream id) regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : gen_(hash_combine(seed, stream)) {}

  std::uint64_t next_u64() { return gen_(); }

  // strictly inside (0,1) so inverse-CDF transforms stay finite
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sevi
