#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pk::fft {

using cdouble = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// In-place iterative radix-2 Cooley-Tukey. Size must be a power of two.
/// Forward is unnormalized; the inverse pass applies no 1/N scaling either.
inline void radix2(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cdouble step(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble u = a[i + k];
                const cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= step;
            }
        }
    }
}

/// Bluestein chirp-z transform for arbitrary sizes, built on radix-2
/// convolution. Same normalization convention as radix2().
inline void bluestein(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    const double sign = inverse ? 1.0 : -1.0;

    // Twiddles exp(sign*i*pi*k^2/n); k^2 reduced mod 2n keeps sin/cos accurate.
    std::vector<cdouble> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const unsigned long long k2 = (static_cast<unsigned long long>(k) * k) % (2ull * n);
        const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cdouble(std::cos(ang), std::sin(ang));
    }

    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cdouble> va(m, cdouble(0.0, 0.0));
    std::vector<cdouble> vb(m, cdouble(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) va[k] = a[k] * w[k];
    vb[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) vb[k] = vb[m - k] = std::conj(w[k]);

    radix2(va, false);
    radix2(vb, false);
    for (std::size_t k = 0; k < m; ++k) va[k] *= vb[k];
    radix2(va, true);

    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = va[k] * scale * w[k];
}

/// Unnormalized DFT of any size (radix-2 when possible, Bluestein otherwise).
inline void transform(std::vector<cdouble>& a, bool inverse) {
    if (a.empty()) return;
    if (is_pow2(a.size())) {
        radix2(a, inverse);
    } else {
        bluestein(a, inverse);
    }
}

inline std::vector<cdouble> forward(std::vector<cdouble> a) {
    transform(a, false);
    return a;
}

/// Inverse DFT with 1/N normalization.
inline std::vector<cdouble> inverse(std::vector<cdouble> a) {
    transform(a, true);
    const double scale = a.empty() ? 1.0 : 1.0 / static_cast<double>(a.size());
    for (auto& v : a) v *= scale;
    return a;
}

}  // namespace pk::fft
