#pragma once

#include <complex>
#include <vector>

namespace imdd {

/// Unnormalized forward DFT (exp(-j...)) of arbitrary length.
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);

/// Inverse DFT including the 1/N scale, so ifft(fft(x)) == x.
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x);

/// Angular frequency (rad/s) of DFT bin k for length n at sample rate fs,
/// with bins above n/2 mapped to negative frequencies.
double bin_angular_frequency(std::size_t k, std::size_t n, double fs);

}  // namespace imdd
