#pragma once

#include <complex>
#include <vector>

namespace trait::fft {

// Discrete Fourier transform of a real vector, X_j = sum_t v_t exp(-2*pi*i*j*t/n).
// Mixed-radix Cooley-Tukey; prime lengths above a small cutoff go through
// Bluestein's chirp-z so non-power-of-two inputs are exact-length, not padded.
// All arithmetic in 64-bit.
std::vector<std::complex<double>> fft_real(const std::vector<double>& v);

// In-place complex FFT (same definition), exposed for tests.
std::vector<std::complex<double>> fft_complex(std::vector<std::complex<double>> v);

// One-sided magnitude spectrum |X_0 .. X_{floor(n/2)}| of fft_real(v).
std::vector<double> magnitude_spectrum(const std::vector<double>& v);

// One-sided spectrum length for an input of length n.
inline std::size_t one_sided_length(std::size_t n) { return n / 2 + 1; }

} // namespace trait::fft
