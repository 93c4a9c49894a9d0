#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sspn {

inline constexpr uint32_t kRdcDefaultFeatures = 20;
inline constexpr double kRdcDefaultScale = 1.0 / 6.0;

// Randomized dependence coefficient: empirical copula (average ranks for
// ties), a constant-1 feature, k Gaussian random projections (std s), sine
// nonlinearity, then the largest canonical correlation between the two
// feature sets (ridge 1e-9). Deterministic given the seed; constant columns
// yield 0.
double rdc(std::span<const int64_t> x, std::span<const int64_t> y, uint32_t k, double s,
           uint64_t seed);

// n x k sine-feature block of one column; the embedding k-means clusters on.
std::vector<double> rdc_features(std::span<const int64_t> column, uint32_t k, double s,
                                 uint64_t seed);

// copula transform: average rank / n
std::vector<double> copula_transform(std::span<const int64_t> column);

}  // namespace sspn
