#pragma once

// Iterative radix-2 FFT, power-of-two lengths. Forward is unnormalized,
// inverse scales by 1/n. Twiddle tables are cached per size.

#include <complex>
#include <map>
#include <vector>

#include "uwno/errors.hpp"

namespace uwno {

namespace detail {

inline const std::vector<std::complex<double>>& twiddle_table(std::size_t n) {
    thread_local std::map<std::size_t, std::vector<std::complex<double>>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> w(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        const double ang = -2.0 * M_PI * double(j) / double(n);
        w[j] = {std::cos(ang), std::sin(ang)};
    }
    return cache.emplace(n, std::move(w)).first->second;
}

}  // namespace detail

inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)))
        throw ValueError("fft: length " + std::to_string(n) + " is not a power of two");
    if (n == 1) return;
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& tw = detail::twiddle_table(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                std::complex<double> w = tw[j * step];
                if (inverse) w = std::conj(w);
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
    if (inverse) {
        const double s = 1.0 / double(n);
        for (auto& x : a) x *= s;
    }
}

/// Signed integer frequency of bin k for an n-point transform.
inline long fft_freq(std::size_t k, std::size_t n) {
    return (k <= n / 2) ? (long)k : (long)k - (long)n;
}

}  // namespace uwno
