#pragma once

// Self-contained iterative radix-2 FFT on std::complex<double>, power-of-two
// sizes only. Used for padded linear convolution and for sampling symbols of
// convolution kernels. Twiddles are computed per stage with std::polar from
// exact angle fractions; accuracy is ~1e-15 relative through N = 2^23, which
// the symbol-realness tests pin down.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rhlab {

using cplx = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place transform; sign = -1 forward, +1 inverse (inverse includes 1/N).
inline void fft_inplace(std::vector<cplx>& a, int sign) {
    const size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft size must be a power of two");
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846264338327950288;
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * pi / static_cast<double>(len);
        const cplx wlen = std::polar(1.0, ang);
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                // refresh from the exact angle periodically: a purely
                // multiplicative twiddle drifts ~len*eps across a stage
                if ((k & 31u) == 0u) w = std::polar(1.0, ang * static_cast<double>(k));
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (sign > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv;
    }
}

inline void fft(std::vector<cplx>& a) { fft_inplace(a, -1); }
inline void ifft(std::vector<cplx>& a) { fft_inplace(a, +1); }

} // namespace rhlab
