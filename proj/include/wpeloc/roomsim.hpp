#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wpeloc/detail/fft.hpp"
#include "wpeloc/timeline.hpp"

namespace wpeloc {

using Position = std::array<double, 3>;

struct RoomSpec {
  Position dims{6.0, 5.0, 3.0};
  double rt60{0.0};  // > 0 selects the Sabine/Eyring conversion
  std::optional<std::array<double, 6>> reflection;  // walls x0,x1,y0,y1,z0,z1
  double speed_of_sound{343.0};
  double sample_rate{16000.0};

  void validate() const {
    for (double d : dims)
      if (!(d > 0.0)) throw std::invalid_argument("RoomSpec: dimensions must be positive");
    if (!(speed_of_sound > 0.0) || !(sample_rate > 0.0))
      throw std::invalid_argument("RoomSpec: speed of sound and sample rate must be positive");
    if (reflection) {
      for (double b : *reflection)
        if (!(b >= 0.0) || b >= 1.0)
          throw std::invalid_argument("RoomSpec: reflection coefficients must lie in [0,1)");
    } else if (!(rt60 > 0.0)) {
      throw std::invalid_argument("RoomSpec: need rt60 > 0 or reflection coefficients");
    }
  }
};

struct Rir {
  std::vector<double> taps;
  double sample_rate{16000.0};
  Position src{};
  Position mic{};
};

struct RirParts {
  std::vector<double> direct;
  std::vector<double> early;
  std::vector<double> late;
};

namespace detail {

inline constexpr int kSincHalfWidth = 40;  // 81-tap windowed-sinc kernel

// Uniform wall coefficient from rt60: Sabine absorption, switching to Eyring
// when Sabine exceeds the physical range.
inline std::array<double, 6> wall_reflections(const RoomSpec& room) {
  if (room.reflection) return *room.reflection;
  const double v = room.dims[0] * room.dims[1] * room.dims[2];
  const double s = 2.0 * (room.dims[0] * room.dims[1] + room.dims[0] * room.dims[2] +
                          room.dims[1] * room.dims[2]);
  double alpha = 0.161 * v / (s * room.rt60);
  if (alpha >= 1.0) alpha = 1.0 - std::exp(-0.161 * v / (s * room.rt60));
  alpha = std::min(std::max(alpha, 1e-6), 1.0 - 1e-6);
  const double beta = std::sqrt(1.0 - alpha);
  return {beta, beta, beta, beta, beta, beta};
}

// Reverberation time implied by the spec, via Eyring when only wall
// coefficients are given. Drives the generated RIR length.
inline double rt60_estimate(const RoomSpec& room) {
  if (room.rt60 > 0.0) return room.rt60;
  const auto& b = *room.reflection;
  const double sx = room.dims[1] * room.dims[2];
  const double sy = room.dims[0] * room.dims[2];
  const double sz = room.dims[0] * room.dims[1];
  const double v = room.dims[0] * room.dims[1] * room.dims[2];
  const double s = 2.0 * (sx + sy + sz);
  double absorbed = sx * (2.0 - b[0] * b[0] - b[1] * b[1]) + sy * (2.0 - b[2] * b[2] - b[3] * b[3]) +
                    sz * (2.0 - b[4] * b[4] - b[5] * b[5]);
  const double alpha = std::min(absorbed / s, 1.0 - 1e-9);
  return std::max(0.161 * v / (-s * std::log(1.0 - alpha)), 0.05);
}

}  // namespace detail

/// Allen-Berkley image-method room impulse response. Per-image amplitude is
/// the product of wall reflection coefficients over 4*pi*distance, deposited
/// with an 81-tap Hann-windowed sinc at the fractional delay. max_order < 0
/// means unlimited; the RIR length (1.25 * rt60 plus the direct path) then
/// bounds which images contribute.
inline Rir image_rir(const RoomSpec& room, const Position& src, const Position& mic,
                     int max_order = -1) {
  room.validate();
  for (int d = 0; d < 3; ++d) {
    if (!(src[d] > 0.0) || !(src[d] < room.dims[d]) || !(mic[d] > 0.0) || !(mic[d] < room.dims[d]))
      throw std::invalid_argument("image_rir: positions must be strictly inside the room");
  }
  if (src == mic) throw std::invalid_argument("image_rir: source and microphone coincide");

  const double fs = room.sample_rate;
  const double c = room.speed_of_sound;
  const std::array<double, 6> beta = detail::wall_reflections(room);
  const double direct_dist = std::sqrt((src[0] - mic[0]) * (src[0] - mic[0]) +
                                       (src[1] - mic[1]) * (src[1] - mic[1]) +
                                       (src[2] - mic[2]) * (src[2] - mic[2]));
  const std::size_t n_taps = static_cast<std::size_t>(
      std::ceil((1.25 * detail::rt60_estimate(room) + direct_dist / c) * fs) +
      2 * detail::kSincHalfWidth + 1);

  Rir rir;
  rir.taps.assign(n_taps, 0.0);
  rir.sample_rate = fs;
  rir.src = src;
  rir.mic = mic;

  const double max_dist = c * static_cast<double>(n_taps + detail::kSincHalfWidth) / fs;
  std::array<int, 3> range;
  for (int d = 0; d < 3; ++d) range[d] = static_cast<int>(std::ceil(max_dist / (2.0 * room.dims[d]))) + 1;

  const double pi = 3.14159265358979323846;
  for (int nx = -range[0]; nx <= range[0]; ++nx) {
    for (int ny = -range[1]; ny <= range[1]; ++ny) {
      for (int nz = -range[2]; nz <= range[2]; ++nz) {
        for (int q = 0; q < 8; ++q) {
          const int qx = q & 1, qy = (q >> 1) & 1, qz = (q >> 2) & 1;
          const int order = std::abs(nx - qx) + std::abs(nx) + std::abs(ny - qy) + std::abs(ny) +
                            std::abs(nz - qz) + std::abs(nz);
          if (max_order >= 0 && order > max_order) continue;
          const double ix = (1 - 2 * qx) * src[0] + 2.0 * nx * room.dims[0] - mic[0];
          const double iy = (1 - 2 * qy) * src[1] + 2.0 * ny * room.dims[1] - mic[1];
          const double iz = (1 - 2 * qz) * src[2] + 2.0 * nz * room.dims[2] - mic[2];
          const double dist = std::sqrt(ix * ix + iy * iy + iz * iz);
          const double center = dist / c * fs;
          if (center > static_cast<double>(n_taps + detail::kSincHalfWidth)) continue;
          const double amp = std::pow(beta[0], std::abs(nx - qx)) * std::pow(beta[1], std::abs(nx)) *
                             std::pow(beta[2], std::abs(ny - qy)) * std::pow(beta[3], std::abs(ny)) *
                             std::pow(beta[4], std::abs(nz - qz)) * std::pow(beta[5], std::abs(nz)) /
                             (4.0 * pi * dist);
          const int lo = std::max(0, static_cast<int>(std::ceil(center - detail::kSincHalfWidth)));
          const int hi = std::min(static_cast<int>(n_taps) - 1,
                                  static_cast<int>(std::floor(center + detail::kSincHalfWidth)));
          for (int j = lo; j <= hi; ++j) {
            const double u = j - center;
            const double w = 0.5 * (1.0 + std::cos(pi * u / detail::kSincHalfWidth));
            const double sinc = u == 0.0 ? 1.0 : std::sin(pi * u) / (pi * u);
            rir.taps[j] += amp * w * sinc;
          }
        }
      }
    }
  }
  return rir;
}

/// Splits an RIR into direct path, early reflections, and late tail around its
/// peak. Parts are full-length vectors that are zero outside their span, so
/// they sum to the input exactly.
inline RirParts decompose_rir(const Rir& rir, double direct_win_ms, double early_ms) {
  if (direct_win_ms < 0.0 || early_ms < direct_win_ms)
    throw std::invalid_argument("decompose_rir: need 0 <= direct_win_ms <= early_ms");
  const std::size_t n = rir.taps.size();
  if (n == 0) throw std::invalid_argument("decompose_rir: empty rir");
  std::size_t peak = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(rir.taps[i]) > std::abs(rir.taps[peak])) peak = i;

  const auto ms_to_samps = [&](double ms) {
    return static_cast<long long>(std::llround(ms * 1e-3 * rir.sample_rate));
  };
  const long long p = static_cast<long long>(peak);
  const long long direct_lo = std::max(0LL, p - ms_to_samps(direct_win_ms));
  const long long direct_hi = p + ms_to_samps(direct_win_ms);
  const long long early_hi = p + ms_to_samps(early_ms);
  if (direct_hi >= static_cast<long long>(n) || early_hi >= static_cast<long long>(n))
    throw std::invalid_argument("decompose_rir: boundaries exceed rir length");

  RirParts parts;
  parts.direct.assign(n, 0.0);
  parts.early.assign(n, 0.0);
  parts.late.assign(n, 0.0);
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    if (i >= direct_lo && i <= direct_hi)
      parts.direct[i] = rir.taps[i];
    else if (i > direct_hi && i <= early_hi)
      parts.early[i] = rir.taps[i];
    else
      parts.late[i] = rir.taps[i];
  }
  return parts;
}

enum class RenderMode { Concat, Mix };

struct SceneSource {
  std::vector<double> signal;
  Position position{};
  std::string label;
  double onset{0.0};  // seconds; used by Mix, ignored by Concat
};

struct RenderResult {
  std::vector<double> signal;
  Timeline timeline;
  double sample_rate{16000.0};
};

namespace detail {

inline constexpr double kSilenceDbfs = -50.0;
inline constexpr double kConcatGapSec = 0.5;

// [first, last] span of samples above the stripping threshold; empty optional
// when the whole signal is digital silence.
inline std::optional<std::pair<std::size_t, std::size_t>> nonsilent_span(
    const std::vector<double>& x) {
  const double thr = std::pow(10.0, kSilenceDbfs / 20.0);
  std::size_t first = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > thr) {
      first = i;
      break;
    }
  }
  if (first == x.size()) return std::nullopt;
  std::size_t last = first;
  for (std::size_t i = x.size(); i-- > first;) {
    if (std::abs(x[i]) > thr) {
      last = i;
      break;
    }
  }
  return std::make_pair(first, last);
}

}  // namespace detail

/// Renders sources through their image-method RIRs to one microphone signal
/// with a ground-truth timeline. Concat strips digital silence from each
/// source and places them sequentially with fixed gaps; Mix sums them at their
/// given onsets. The output is peak-normalized to 0.9 full scale; timeline
/// entries mark dry-source activity, not the reverberant tails.
inline RenderResult render_scene(const std::vector<SceneSource>& sources, const RoomSpec& room,
                                 const Position& mic, RenderMode mode, int max_order = -1) {
  room.validate();
  if (sources.empty()) throw std::invalid_argument("render_scene: no sources");
  for (const auto& s : sources)
    if (s.signal.empty()) throw std::invalid_argument("render_scene: empty source signal");

  const double fs = room.sample_rate;
  std::map<Position, Rir> rir_cache;
  const auto rir_for = [&](const Position& pos) -> const Rir& {
    auto it = rir_cache.find(pos);
    if (it == rir_cache.end()) it = rir_cache.emplace(pos, image_rir(room, pos, mic, max_order)).first;
    return it->second;
  };

  RenderResult out;
  out.sample_rate = fs;
  std::size_t cursor = 0;
  for (const auto& src : sources) {
    std::vector<double> dry = src.signal;
    std::size_t onset_samps = 0;
    if (mode == RenderMode::Concat) {
      const auto span = detail::nonsilent_span(dry);
      if (!span) throw std::runtime_error("render_scene: source is all silence");
      dry.assign(src.signal.begin() + span->first, src.signal.begin() + span->second + 1);
      onset_samps = cursor;
    } else {
      onset_samps = static_cast<std::size_t>(std::llround(std::max(src.onset, 0.0) * fs));
    }
    const std::vector<double> wet = detail::fft_convolve(dry, rir_for(src.position).taps);
    if (out.signal.size() < onset_samps + wet.size()) out.signal.resize(onset_samps + wet.size(), 0.0);
    for (std::size_t i = 0; i < wet.size(); ++i) out.signal[onset_samps + i] += wet[i];
    const double t0 = static_cast<double>(onset_samps) / fs;
    out.timeline.push_back({src.label, t0, t0 + static_cast<double>(dry.size()) / fs});
    if (mode == RenderMode::Concat)
      cursor = onset_samps + dry.size() + static_cast<std::size_t>(std::llround(detail::kConcatGapSec * fs));
  }

  double peak = 0.0;
  for (double v : out.signal) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double gain = 0.9 / peak;
    for (double& v : out.signal) v *= gain;
  }
  return out;
}

}  // namespace wpeloc
