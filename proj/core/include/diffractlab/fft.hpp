#pragma once

#include <complex>
#include <vector>

namespace dlab {

// In-place radix-2 DFT, length must be a power of two.
// sign = -1 gives the forward transform sum_j x_j e^{-2pi i jk/N}.
void fft_pow2(std::vector<std::complex<double>>& x, int sign);

// Forward DFT of arbitrary length via Bluestein's chirp transform.
// Returns X_k = sum_j x_j e^{-2pi i jk/N}, k = 0..N-1.
std::vector<std::complex<double>> dft_any(const std::vector<std::complex<double>>& x);

}  // namespace dlab
