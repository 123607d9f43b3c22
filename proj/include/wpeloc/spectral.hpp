#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpeloc/detail/fft.hpp"
#include "wpeloc/matrix.hpp"

namespace wpeloc {

enum class Window { Rect, Hann, SqrtHann };

/// Complex time-frequency matrix with its analysis parameters.
/// data is indexed (frame n, one-sided bin f); bins() == n_fft/2 + 1.
struct Spectrogram {
  Matrix<std::complex<double>> data;
  int n_fft{0};
  int hop{0};
  double sample_rate{0.0};
  Window window{Window::SqrtHann};

  std::size_t frames() const { return data.rows; }
  std::size_t bins() const { return data.cols; }
  std::complex<double>& operator()(std::size_t n, std::size_t f) { return data(n, f); }
  const std::complex<double>& operator()(std::size_t n, std::size_t f) const { return data(n, f); }
};

/// Per-bin mean power of a segment, length bins().
struct PowerProfile {
  std::vector<double> values;
};

/// Per-bin nonnegative comparison weights; sums to at most 1.
struct WeightVector {
  std::vector<double> values;
};

inline std::vector<double> make_window(Window kind, int n_fft) {
  std::vector<double> w(static_cast<std::size_t>(n_fft), 1.0);
  const double pi = 3.14159265358979323846;
  switch (kind) {
    case Window::Rect:
      break;
    case Window::Hann:
      for (int i = 0; i < n_fft; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * i / n_fft);
      break;
    case Window::SqrtHann:
      for (int i = 0; i < n_fft; ++i) w[i] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * pi * i / n_fft));
      break;
  }
  return w;
}

inline Spectrogram stft(const std::vector<double>& signal, int n_fft, int hop,
                        Window window = Window::SqrtHann, double sample_rate = 16000.0) {
  if (n_fft <= 0 || !detail::is_power_of_two(static_cast<std::size_t>(n_fft)))
    throw std::invalid_argument("stft: n_fft must be a positive power of two");
  if (hop <= 0 || hop > n_fft) throw std::invalid_argument("stft: need 0 < hop <= n_fft");
  if (signal.size() < static_cast<std::size_t>(n_fft)) throw std::runtime_error("segment too short");

  const std::size_t num_frames = 1 + (signal.size() - n_fft) / hop;
  const std::size_t num_bins = static_cast<std::size_t>(n_fft) / 2 + 1;
  const std::vector<double> w = make_window(window, n_fft);

  Spectrogram spec;
  spec.n_fft = n_fft;
  spec.hop = hop;
  spec.sample_rate = sample_rate;
  spec.window = window;
  spec.data = Matrix<std::complex<double>>(num_frames, num_bins);

  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  for (std::size_t n = 0; n < num_frames; ++n) {
    const double* src = signal.data() + n * hop;
    for (int i = 0; i < n_fft; ++i) frame[i] = src[i] * w[i];
    const std::vector<std::complex<double>> bins = detail::rfft(frame);
    std::complex<double>* dst = spec.data.row_ptr(n);
    for (std::size_t f = 0; f < num_bins; ++f) dst[f] = bins[f];
  }
  return spec;
}

namespace detail {

// Periodic sum of squared window values over hop shifts; constant iff the
// window/hop pair reconstructs with a flat overlap-add gain.
inline bool cola_ok(const std::vector<double>& w, int hop) {
  const int n = static_cast<int>(w.size());
  if (n % hop != 0) return false;
  double lo = 0.0, hi = 0.0;
  for (int t = 0; t < hop; ++t) {
    double s = 0.0;
    for (int j = t; j < n; j += hop) s += w[j] * w[j];
    if (t == 0) {
      lo = hi = s;
    } else {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  return hi > 0.0 && (hi - lo) <= 1e-9 * hi;
}

}  // namespace detail

/// Weighted overlap-add inverse with per-sample normalization.
/// Output length is (frames-1)*hop + n_fft.
inline std::vector<double> istft(const Spectrogram& spec) {
  if (spec.frames() == 0) throw std::invalid_argument("istft: empty spectrogram");
  const int n_fft = spec.n_fft;
  const int hop = spec.hop;
  const std::vector<double> w = make_window(spec.window, n_fft);
  if (!detail::cola_ok(w, hop)) throw std::runtime_error("istft: window/hop pair is not COLA");

  const std::size_t out_len = (spec.frames() - 1) * hop + n_fft;
  std::vector<double> out(out_len, 0.0);
  std::vector<double> den(out_len, 0.0);
  std::vector<std::complex<double>> half(spec.bins());
  for (std::size_t n = 0; n < spec.frames(); ++n) {
    const std::complex<double>* src = spec.data.row_ptr(n);
    for (std::size_t f = 0; f < spec.bins(); ++f) half[f] = src[f];
    const std::vector<double> frame = detail::irfft(half, static_cast<std::size_t>(n_fft));
    const std::size_t off = n * hop;
    for (int i = 0; i < n_fft; ++i) {
      out[off + i] += w[i] * frame[i];
      den[off + i] += w[i] * w[i];
    }
  }
  for (std::size_t t = 0; t < out_len; ++t)
    if (den[t] > 1e-12) out[t] /= den[t];
  return out;
}

/// Mean power per bin: values[f] = (1/N) * sum_n |X(n,f)|^2.
inline PowerProfile mean_power(const Spectrogram& spec) {
  if (spec.frames() == 0) throw std::invalid_argument("mean_power: empty spectrogram");
  PowerProfile p;
  p.values.assign(spec.bins(), 0.0);
  for (std::size_t n = 0; n < spec.frames(); ++n) {
    const std::complex<double>* row = spec.data.row_ptr(n);
    for (std::size_t f = 0; f < spec.bins(); ++f) p.values[f] += std::norm(row[f]);
  }
  const double inv = 1.0 / static_cast<double>(spec.frames());
  for (double& v : p.values) v *= inv;
  return p;
}

/// Joint-energy weights: eps_f = sqrt of the product of the two normalized
/// power profiles. Sums to at most 1 (Cauchy-Schwarz).
inline WeightVector joint_energy_weights(const PowerProfile& p1, const PowerProfile& p2) {
  if (p1.values.size() != p2.values.size())
    throw std::invalid_argument("joint_energy_weights: profile length mismatch");
  const std::size_t num_bins = p1.values.size();
  double t1 = 0.0, t2 = 0.0;
  for (double v : p1.values) t1 += v;
  for (double v : p2.values) t2 += v;
  const double silent = 1e-12 * static_cast<double>(num_bins);
  if (t1 <= silent || t2 <= silent) throw std::runtime_error("silent segment");

  WeightVector w;
  w.values.resize(num_bins);
  for (std::size_t f = 0; f < num_bins; ++f)
    w.values[f] = std::sqrt((p1.values[f] / t1) * (p2.values[f] / t2));
  return w;
}

}  // namespace wpeloc
