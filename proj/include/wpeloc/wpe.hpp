#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "wpeloc/detail/linalg.hpp"
#include "wpeloc/spectral.hpp"

namespace wpeloc {

struct WpeConfig {
  int taps{10};             // prediction filter length K
  int delay{3};             // frames skipped before the first tap
  int iterations{3};        // alternations of power update and filter solve
  double power_floor{1e-6}; // lambda floor relative to per-bin peak power

  void validate() const {
    if (taps < 1 || delay < 1 || iterations < 1 || power_floor <= 0.0)
      throw std::invalid_argument("WpeConfig: need taps>=1, delay>=1, iterations>=1, power_floor>0");
  }
};

/// Per-segment prediction filters G (taps x bins) plus the segment's mean
/// power profile, kept for later joint-energy weighting.
struct WpeFilter {
  Matrix<std::complex<double>> coeffs;  // (tap k, bin f)
  WpeConfig config;
  PowerProfile power;

  std::size_t taps() const { return coeffs.rows; }
  std::size_t bins() const { return coeffs.cols; }
};

struct DereverbResult {
  WpeFilter filter;
  Spectrogram residual;  // same shape as the input
};

namespace detail {

// Prediction for one bin: pred(n) = sum_k conj(g[k]) * X(n-D-k), taps
// zero-padded before frame 0. Works on a zero-prefixed copy of the bin so the
// frame loop is branch-free. zbuf layout: zbuf[D+K-1 + n] = X(n); the reversed
// tap slice of frame n is zbuf[n .. n+K).
inline void predict_bin(const std::vector<std::complex<double>>& zbuf,
                        const std::vector<std::complex<double>>& g_rev, std::size_t num_frames,
                        std::vector<std::complex<double>>& pred) {
  const std::size_t taps = g_rev.size();
  pred.assign(num_frames, {0.0, 0.0});
  for (std::size_t n = 0; n < num_frames; ++n) {
    std::complex<double> acc{0.0, 0.0};
    const std::complex<double>* s = zbuf.data() + n;
    for (std::size_t u = 0; u < taps; ++u) acc += std::conj(g_rev[u]) * s[u];
    pred[n] = acc;
  }
}

}  // namespace detail

/// Iterative maximum-likelihood WPE for one bin-major spectrogram: per
/// frequency, alternate a power estimate lambda with a lambda-weighted
/// least-squares solve for the late-tail predictor, then subtract the
/// prediction. Returns the filters and the dereverberated residual.
inline DereverbResult estimate_wpe(const Spectrogram& spec, const WpeConfig& cfg) {
  cfg.validate();
  const std::size_t num_frames = spec.frames();
  const std::size_t num_bins = spec.bins();
  const std::size_t taps = static_cast<std::size_t>(cfg.taps);
  const std::size_t delay = static_cast<std::size_t>(cfg.delay);
  if (num_frames <= delay + taps) throw std::runtime_error("segment too short for WPE");

  DereverbResult res;
  res.filter.config = cfg;
  res.filter.coeffs = Matrix<std::complex<double>>(taps, num_bins);
  res.filter.power = mean_power(spec);
  res.residual = spec;

  const std::size_t pad = delay + taps - 1;
  std::vector<std::complex<double>> zbuf(pad + num_frames);
  std::vector<std::complex<double>> col(num_frames), err(num_frames), pred(num_frames);
  std::vector<std::complex<double>> R(taps * taps), r(taps), g_rev(taps), Rwork(taps * taps);
  std::vector<double> lambda(num_frames);

  for (std::size_t f = 0; f < num_bins; ++f) {
    double max_power = 0.0;
    for (std::size_t n = 0; n < num_frames; ++n) {
      col[n] = spec(n, f);
      max_power = std::max(max_power, std::norm(col[n]));
    }
    if (max_power <= 0.0) {
      // silent bin: zero filter, residual stays equal to the input
      for (std::size_t k = 0; k < taps; ++k) res.filter.coeffs(k, f) = {0.0, 0.0};
      continue;
    }
    const double floor = cfg.power_floor * max_power;

    // zero-prefixed bin; zbuf[pad + n - delay - k] is tap k of frame n
    std::fill(zbuf.begin(), zbuf.begin() + pad, std::complex<double>{0.0, 0.0});
    std::copy(col.begin(), col.end(), zbuf.begin() + pad);

    err = col;  // E initialized to X
    for (int it = 0; it < cfg.iterations; ++it) {
      for (std::size_t n = 0; n < num_frames; ++n) lambda[n] = std::max(std::norm(err[n]), floor);

      std::fill(R.begin(), R.end(), std::complex<double>{0.0, 0.0});
      std::fill(r.begin(), r.end(), std::complex<double>{0.0, 0.0});
      for (std::size_t n = 0; n < num_frames; ++n) {
        const double w = 1.0 / lambda[n];
        const std::complex<double>* s = zbuf.data() + n;  // reversed taps of frame n
        const std::complex<double> xw = std::conj(col[n]) * w;
        for (std::size_t u = 0; u < taps; ++u) {
          const std::complex<double> su_w = s[u] * w;
          std::complex<double>* Ru = R.data() + u * taps;
          for (std::size_t v = u; v < taps; ++v) Ru[v] += su_w * std::conj(s[v]);
          r[u] += s[u] * xw;
        }
      }
      // Hermitian completion and diagonal loading
      double trace = 0.0;
      for (std::size_t u = 0; u < taps; ++u) trace += R[u * taps + u].real();
      const double load = 1e-8 * trace / static_cast<double>(taps);
      for (std::size_t u = 0; u < taps; ++u) {
        R[u * taps + u] += load;
        for (std::size_t v = 0; v < u; ++v) R[u * taps + v] = std::conj(R[v * taps + u]);
      }
      Rwork = R;
      g_rev = detail::hermitian_solve(Rwork, r, taps);
      detail::predict_bin(zbuf, g_rev, num_frames, pred);
      for (std::size_t n = 0; n < num_frames; ++n) err[n] = col[n] - pred[n];
    }

    // g_rev[u] corresponds to tap k = taps-1-u
    for (std::size_t u = 0; u < taps; ++u) res.filter.coeffs(taps - 1 - u, f) = g_rev[u];
    for (std::size_t n = 0; n < num_frames; ++n) res.residual(n, f) = err[n];
  }
  return res;
}

/// Subtracts the filter's prediction from a spectrogram, using the filter's
/// own delay. apply_wpe(spec, estimate_wpe(spec, cfg).filter) reproduces the
/// estimate's residual exactly.
inline Spectrogram apply_wpe(const Spectrogram& spec, const WpeFilter& filter) {
  if (spec.bins() != filter.bins()) throw std::invalid_argument("apply_wpe: bin count mismatch");
  const std::size_t num_frames = spec.frames();
  const std::size_t taps = filter.taps();
  const std::size_t delay = static_cast<std::size_t>(filter.config.delay);
  const std::size_t pad = delay + taps - 1;

  Spectrogram out = spec;
  std::vector<std::complex<double>> zbuf(pad + num_frames), g_rev(taps), pred;
  for (std::size_t f = 0; f < spec.bins(); ++f) {
    std::fill(zbuf.begin(), zbuf.begin() + pad, std::complex<double>{0.0, 0.0});
    for (std::size_t n = 0; n < num_frames; ++n) zbuf[pad + n] = spec(n, f);
    for (std::size_t u = 0; u < taps; ++u) g_rev[u] = filter.coeffs(taps - 1 - u, f);
    detail::predict_bin(zbuf, g_rev, num_frames, pred);
    for (std::size_t n = 0; n < num_frames; ++n) out(n, f) = spec(n, f) - pred[n];
  }
  return out;
}

}  // namespace wpeloc
