#pragma once

#include <cstdint>

namespace sspn {

// splitmix64; stable across platforms, unlike std::uniform_int_distribution.
class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // unbiased uniform in [0,n)
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t mask = ~uint64_t{0} >> __builtin_clzll(n | 1);
    uint64_t r;
    do {
      r = next() & mask;
    } while (r >= n);
    return r;
  }

  // standard normal via Box-Muller
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    return __builtin_sqrt(-2.0 * __builtin_log(u1)) *
           __builtin_cos(6.283185307179586476925286766559 * u2);
  }

private:
  uint64_t state_;
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  SplitMix64 m(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
  return m.next();
}

template <class... Rest>
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c, Rest... rest) {
  return mix_seed(mix_seed(a, b), c, rest...);
}

}  // namespace sspn
