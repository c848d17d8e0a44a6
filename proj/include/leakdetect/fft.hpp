#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace leakdetect {

using cdouble = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace fft_detail {

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
inline void transform_pow2(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / double(len);
        const cdouble wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cdouble u = a[i + j];
                const cdouble v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

// Bluestein's chirp-z for arbitrary n, built on the power-of-two kernel.
inline void transform_bluestein(std::vector<cdouble>& a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_power_of_two(2 * n + 1);
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cdouble> chirp(n);
    for (std::size_t i = 0; i < n; ++i) {
        // i^2 mod 2n keeps the angle argument small
        const double ang = sign * M_PI * double((i * i) % (2 * n)) / double(n);
        chirp[i] = cdouble(std::cos(ang), std::sin(ang));
    }

    std::vector<cdouble> x(m, cdouble{}), y(m, cdouble{});
    for (std::size_t i = 0; i < n; ++i) x[i] = a[i] * chirp[i];
    y[0] = std::conj(chirp[0]);
    for (std::size_t i = 1; i < n; ++i) y[i] = y[m - i] = std::conj(chirp[i]);

    transform_pow2(x, false);
    transform_pow2(y, false);
    for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
    transform_pow2(x, true);

    for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * chirp[i];
    if (inverse)
        for (auto& v : a) v /= double(n);
}

}  // namespace fft_detail

inline void fft(std::vector<cdouble>& a) {
    if (a.empty()) throw std::invalid_argument("fft: empty input");
    if (is_power_of_two(a.size()))
        fft_detail::transform_pow2(a, false);
    else
        fft_detail::transform_bluestein(a, false);
}

inline void ifft(std::vector<cdouble>& a) {
    if (a.empty()) throw std::invalid_argument("ifft: empty input");
    if (is_power_of_two(a.size()))
        fft_detail::transform_pow2(a, true);
    else
        fft_detail::transform_bluestein(a, true);
}

inline std::vector<cdouble> fft_real(const std::vector<double>& x) {
    std::vector<cdouble> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = cdouble(x[i], 0.0);
    fft(a);
    return a;
}

}  // namespace leakdetect
