#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wpeloc::detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. Length must be a power of two.
// inverse = true computes the unscaled inverse transform; the caller divides by n.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("fft length must be a power of two");
  if (n == 1) return;

  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
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
}

// One-sided spectrum (n/2+1 bins) of a real frame of power-of-two length n.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = std::complex<double>(frame[i], 0.0);
  fft_inplace(buf, false);
  buf.resize(n / 2 + 1);
  return buf;
}

// Real frame of length n from its one-sided spectrum (n/2+1 bins).
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half, std::size_t n) {
  if (half.size() != n / 2 + 1) throw std::invalid_argument("irfft: bin count does not match n");
  std::vector<std::complex<double>> buf(n);
  for (std::size_t f = 0; f <= n / 2; ++f) buf[f] = half[f];
  for (std::size_t f = n / 2 + 1; f < n; ++f) buf[f] = std::conj(half[n - f]);
  fft_inplace(buf, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() / static_cast<double>(n);
  return out;
}

// Linear convolution of two real sequences via zero-padded FFT.
inline std::vector<double> fft_convolve(const std::vector<double>& x, const std::vector<double>& h) {
  if (x.empty() || h.empty()) return {};
  const std::size_t out_len = x.size() + h.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  std::vector<std::complex<double>> a(n), b(n);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  for (std::size_t i = 0; i < h.size(); ++i) b[i] = h[i];
  fft_inplace(a, false);
  fft_inplace(b, false);
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
  fft_inplace(a, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = a[i].real() / static_cast<double>(n);
  return out;
}

}  // namespace wpeloc::detail
