#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace pathloss {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT. Length must be a power of two; the KDE grid
// guarantees this so no general-length machinery is needed.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft_radix2: length not a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Circular convolution of two real vectors of equal power-of-two length.
inline std::vector<double> circular_convolve(const std::vector<double>& x,
                                             const std::vector<double>& k) {
    if (x.size() != k.size()) throw std::invalid_argument("circular_convolve: size mismatch");
    const std::size_t n = x.size();
    std::vector<std::complex<double>> fx(n), fk(n);
    for (std::size_t i = 0; i < n; ++i) {
        fx[i] = x[i];
        fk[i] = k[i];
    }
    fft_radix2(fx, false);
    fft_radix2(fk, false);
    for (std::size_t i = 0; i < n; ++i) fx[i] *= fk[i];
    fft_radix2(fx, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fx[i].real();
    return out;
}

} // namespace pathloss
