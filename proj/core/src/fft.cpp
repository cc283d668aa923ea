#include "trait/fft.hpp"

#include "trait/errors.hpp"

#include <cmath>
#include <numbers>

namespace trait::fft {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Naive DFT kept for small prime radices inside the recursion.
std::vector<cd> dft_direct(const std::vector<cd>& v) {
    std::size_t n = v.size();
    std::vector<cd> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        cd acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            double ang = -kTwoPi * static_cast<double>((j * t) % n) / static_cast<double>(n);
            acc += v[t] * cd{std::cos(ang), std::sin(ang)};
        }
        out[j] = acc;
    }
    return out;
}

std::size_t smallest_prime_factor(std::size_t n) {
    if (n % 2 == 0) return 2;
    for (std::size_t p = 3; p * p <= n; p += 2) {
        if (n % p == 0) return p;
    }
    return n;
}

std::vector<cd> fft_rec(const std::vector<cd>& v);

// Radix-2 iterative FFT for power-of-two lengths (used by Bluestein).
void fft_pow2(std::vector<cd>& a, bool inverse) {
    std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        cd wl{std::cos(ang), std::sin(ang)};
        for (std::size_t i = 0; i < n; i += len) {
            cd w{1.0, 0.0};
            for (std::size_t k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd t = a[i + k + len / 2] * w;
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (cd& x : a) x /= static_cast<double>(n);
    }
}

// Bluestein chirp-z: expresses an arbitrary-length DFT as a convolution,
// evaluated with a power-of-two FFT of length >= 2n-1.
std::vector<cd> fft_bluestein(const std::vector<cd>& v) {
    std::size_t n = v.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    // chirp w_k = exp(-i*pi*k^2/n); k^2 taken mod 2n to keep the angle exact.
    std::vector<cd> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t k2 = (k * k) % (2 * n);
        double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cd{std::cos(ang), std::sin(ang)};
    }

    std::vector<cd> a(m, cd{0.0, 0.0});
    std::vector<cd> b(m, cd{0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) a[k] = v[k] * w[k];
    b[0] = std::conj(w[0]);
    for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(w[k]);
        b[m - k] = std::conj(w[k]);
    }

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);

    std::vector<cd> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * w[k];
    return out;
}

// Mixed-radix Cooley-Tukey: split by the smallest prime factor p into p
// interleaved sub-transforms and recombine with twiddles.
std::vector<cd> fft_mixed_radix(const std::vector<cd>& v, std::size_t p) {
    std::size_t n = v.size();
    std::size_t m = n / p;

    std::vector<std::vector<cd>> sub(p);
    for (std::size_t r = 0; r < p; ++r) {
        sub[r].resize(m);
        for (std::size_t t = 0; t < m; ++t) sub[r][t] = v[t * p + r];
        sub[r] = fft_rec(sub[r]);
    }

    std::vector<cd> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        cd acc{0.0, 0.0};
        for (std::size_t r = 0; r < p; ++r) {
            double ang = -kTwoPi * static_cast<double>((r * j) % n) / static_cast<double>(n);
            acc += sub[r][j % m] * cd{std::cos(ang), std::sin(ang)};
        }
        out[j] = acc;
    }
    return out;
}

std::vector<cd> fft_rec(const std::vector<cd>& v) {
    std::size_t n = v.size();
    if (n == 1) return v;
    std::size_t p = smallest_prime_factor(n);
    if (p == n) {
        // prime length: direct for small, Bluestein beyond
        if (n <= 61) return dft_direct(v);
        return fft_bluestein(v);
    }
    return fft_mixed_radix(v, p);
}

} // namespace

std::vector<cd> fft_complex(std::vector<cd> v) {
    if (v.empty()) throw ShapeError("fft: empty input");
    return fft_rec(v);
}

std::vector<cd> fft_real(const std::vector<double>& v) {
    if (v.empty()) throw ShapeError("fft: empty input");
    std::vector<cd> c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) c[i] = cd{v[i], 0.0};
    return fft_rec(c);
}

std::vector<double> magnitude_spectrum(const std::vector<double>& v) {
    std::vector<cd> x = fft_real(v);
    std::size_t half = one_sided_length(v.size());
    std::vector<double> mag(half);
    for (std::size_t i = 0; i < half; ++i) mag[i] = std::abs(x[i]);
    return mag;
}

} // namespace trait::fft
