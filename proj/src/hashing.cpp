#include "sspn/hashing.hpp"

#include <stdexcept>

#include "sspn/random.hpp"

namespace sspn {

namespace {

inline bool is_pow2(uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

inline uint64_t mod61(unsigned __int128 x) {
  uint64_t lo = static_cast<uint64_t>(x & kMersenne61);
  uint64_t hi = static_cast<uint64_t>(x >> 61);
  uint64_t s = lo + hi;
  if (s >= kMersenne61) s -= kMersenne61;
  return s;
}

inline uint64_t mulmod61(uint64_t a, uint64_t b) {
  return mod61(static_cast<unsigned __int128>(a) * b);
}

inline uint64_t addmod61(uint64_t a, uint64_t b) {
  uint64_t s = a + b;
  if (s >= kMersenne61) s -= kMersenne61;
  return s;
}

uint64_t draw_residue(SplitMix64& rng) {
  // 2^61-1 rejects only the all-ones pattern
  for (;;) {
    uint64_t r = rng.next() & kMersenne61;
    if (r < kMersenne61) return r;
  }
}

uint64_t poly_mod(const HashFamily& f, int64_t value) {
  uint64_t x = mod61(static_cast<unsigned __int128>(static_cast<uint64_t>(value)));
  uint64_t acc = f.coefficients.back();
  for (size_t i = f.coefficients.size() - 1; i-- > 0;) {
    acc = addmod61(mulmod61(acc, x), f.coefficients[i]);
  }
  return acc;
}

}  // namespace

HashFamily make_family(HashKind kind, uint32_t degree, uint64_t width, uint64_t seed) {
  if (degree < 2) throw std::invalid_argument("hash family degree must be >= 2");
  if (kind == HashKind::location && !is_pow2(width))
    throw std::invalid_argument("location hash width must be a power of two");

  HashFamily f;
  f.kind = kind;
  f.degree = degree;
  f.seed = seed;
  f.width = kind == HashKind::location ? width : 0;

  SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(kind), degree, width));
  f.coefficients.resize(degree);
  for (uint32_t i = 0; i < degree; ++i) f.coefficients[i] = draw_residue(rng);
  while (f.coefficients.back() == 0) f.coefficients.back() = draw_residue(rng);
  return f;
}

uint64_t eval_location(const HashFamily& family, int64_t value) {
  if (family.kind != HashKind::location)
    throw std::invalid_argument("eval_location on a non-location family");
  return poly_mod(family, value) & (family.width - 1);
}

int eval_sign(const HashFamily& family, int64_t value) {
  if (family.kind != HashKind::sign)
    throw std::invalid_argument("eval_sign on a non-sign family");
  return static_cast<int>(2 * (poly_mod(family, value) & 1)) - 1;
}

EdgeHashAssignment make_edge_assignment(uint64_t master_seed, uint32_t edge, uint32_t copy,
                                        uint64_t width, uint32_t degree) {
  EdgeHashAssignment a;
  a.edge = edge;
  a.copy = copy;
  a.location = make_family(HashKind::location, degree, width,
                           mix_seed(master_seed, 0x10c4710ull, edge, copy));
  a.sign = make_family(HashKind::sign, degree, 0,
                       mix_seed(master_seed, 0x51900ull, edge, copy));
  return a;
}

}  // namespace sspn
