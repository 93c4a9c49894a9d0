#pragma once

#include <cstdint>
#include <vector>

namespace sspn {

inline constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;

enum class HashKind : uint8_t { location = 0, sign = 1 };

// Seeded k-universal polynomial hash over the Mersenne prime 2^61-1.
// location maps values into [0, width); sign maps values onto {-1, +1}.
struct HashFamily {
  HashKind kind;
  uint32_t degree;
  uint64_t seed;
  uint64_t width;  // location only; power of two
  std::vector<uint64_t> coefficients;
};

// Deterministic: equal arguments always produce the same coefficient vector.
// Throws std::invalid_argument for degree < 2 or a non-power-of-two width.
HashFamily make_family(HashKind kind, uint32_t degree, uint64_t width, uint64_t seed);

uint64_t eval_location(const HashFamily& family, int64_t value);
int eval_sign(const HashFamily& family, int64_t value);

// (location, sign) pair owned by one join edge within one estimator copy.
// Both endpoints of the edge evaluate through the same families.
struct EdgeHashAssignment {
  uint32_t edge = 0;
  uint32_t copy = 0;
  HashFamily location;
  HashFamily sign;
};

inline constexpr uint32_t kDefaultDegree = 4;

EdgeHashAssignment make_edge_assignment(uint64_t master_seed, uint32_t edge, uint32_t copy,
                                        uint64_t width, uint32_t degree = kDefaultDegree);

}  // namespace sspn
