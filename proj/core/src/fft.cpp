#include "diffractlab/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dlab {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

void fft_pow2(std::vector<std::complex<double>>& x, int sign) {
    const std::size_t n = x.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft_pow2: length must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = static_cast<double>(sign) * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = x[i + j];
                const std::complex<double> v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<std::complex<double>> dft_any(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    if (is_pow2(n)) {
        auto y = x;
        fft_pow2(y, -1);
        return y;
    }
    // Bluestein: X_k = conj(b_k) * IFFT(FFT(a) .* FFT(b)) with chirp
    // a_j = x_j e^{-i pi j^2 / n}, b_j = e^{+i pi j^2 / n}.
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<std::complex<double>> a(m, {0.0, 0.0});
    std::vector<std::complex<double>> b(m, {0.0, 0.0});
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        // j^2 mod 2n keeps the angle small, so large n loses no precision.
        const std::size_t j2 = (j * j) % (2 * n);
        const double ang = std::numbers::pi * static_cast<double>(j2) / static_cast<double>(n);
        chirp[j] = {std::cos(ang), -std::sin(ang)};
    }
    for (std::size_t j = 0; j < n; ++j) a[j] = x[j] * chirp[j];
    b[0] = {1.0, 0.0};
    for (std::size_t j = 1; j < n; ++j) {
        b[j] = std::conj(chirp[j]);
        b[m - j] = b[j];
    }
    fft_pow2(a, -1);
    fft_pow2(b, -1);
    for (std::size_t j = 0; j < m; ++j) a[j] *= b[j];
    fft_pow2(a, +1);
    const double scale = 1.0 / static_cast<double>(m);
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
    return out;
}

}  // namespace dlab
