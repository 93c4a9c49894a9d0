#pragma once

#include <complex>
#include <span>
#include <vector>

namespace sspn {

// Iterative radix-2 transform. Forward is unnormalized; the inverse carries
// the 1/n factor, so idft(dft(x)) == x. Length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::vector<std::complex<double>> dft(std::span<const double> input);
std::vector<double> idft_real(std::vector<std::complex<double>> freq);

}  // namespace sspn
