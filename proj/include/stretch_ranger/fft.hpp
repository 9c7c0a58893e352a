#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "stretch_ranger/error.hpp"

namespace stretch_ranger::fft {

inline std::size_t next_pow2(std::size_t n) { return std::bit_ceil(n < 1 ? std::size_t{1} : n); }

// In-place iterative radix-2 transform. Forward uses exp(-i 2 pi k n / N);
// the inverse is scaled by 1/N.
template <typename T>
void transform(std::span<std::complex<T>> data, bool inverse = false) {
  const std::size_t n = data.size();
  require(std::has_single_bit(n), ErrorKind::invalid_parameter, "FFT length must be a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const T sign = inverse ? T(1) : T(-1);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const T angle = sign * T(2) * std::numbers::pi_v<T> / static_cast<T>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly per index; recurrence drift is visible at 2^16.
    std::vector<std::complex<T>> tw(half);
    for (std::size_t k = 0; k < half; ++k)
      tw[k] = std::polar(T(1), angle * static_cast<T>(k));
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = data[start + k];
        const auto v = data[start + k + half] * tw[k];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const T scale = T(1) / static_cast<T>(n);
    for (auto& x : data) x *= scale;
  }
}

// Zero-padded forward transform of a real sequence.
template <typename T>
std::vector<std::complex<T>> real_forward(std::span<const T> input, std::size_t n_fft) {
  require(n_fft >= input.size(), ErrorKind::invalid_parameter, "FFT length shorter than input");
  std::vector<std::complex<T>> buf(n_fft);
  for (std::size_t i = 0; i < input.size(); ++i) buf[i] = input[i];
  transform<T>(buf);
  return buf;
}

}  // namespace stretch_ranger::fft
