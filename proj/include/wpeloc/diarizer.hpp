#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wpeloc/matrix.hpp"
#include "wpeloc/pairscore.hpp"
#include "wpeloc/spectral.hpp"
#include "wpeloc/timeline.hpp"
#include "wpeloc/wpe.hpp"

namespace wpeloc {

struct ClusterMode {
  enum class Kind { KnownCount, Threshold };
  Kind kind{Kind::Threshold};
  int count{2};
  double threshold{0.0};

  static ClusterMode known_count(int n) { return {Kind::KnownCount, n, 0.0}; }
  static ClusterMode with_threshold(double t) { return {Kind::Threshold, 0, t}; }
};

struct DiarizeConfig {
  double window{4.0};
  double shift{0.5};
  ClusterMode cluster{};
  double chunk_len{0.0};  // > 0 splits the recording into independent chunks
  int n_fft{256};
  int hop{128};
  Window window_kind{Window::SqrtHann};

  void validate() const {
    if (!(window > 0.0) || !(shift > 0.0) || shift > window)
      throw std::invalid_argument("DiarizeConfig: need 0 < shift <= window");
    if (chunk_len < 0.0) throw std::invalid_argument("DiarizeConfig: negative chunk length");
    if (cluster.kind == ClusterMode::Kind::KnownCount && cluster.count < 1)
      throw std::invalid_argument("DiarizeConfig: cluster count must be >= 1");
    if (cluster.kind == ClusterMode::Kind::Threshold && !std::isfinite(cluster.threshold))
      throw std::invalid_argument("DiarizeConfig: threshold must be finite");
    if (n_fft < 2 || hop < 1 || hop > n_fft)
      throw std::invalid_argument("DiarizeConfig: bad stft geometry");
  }
};

/// Windows over the speech regions of an oracle timeline. The minimum usable
/// window length is the caller's problem (pass min_window); diarize derives it
/// from the analysis geometry.
inline std::vector<std::pair<double, double>> segment_windows(const Timeline& speech,
                                                              const DiarizeConfig& cfg,
                                                              double min_window = 0.0) {
  if (speech.empty()) throw std::invalid_argument("segment_windows: empty speech timeline");
  cfg.validate();
  return segment_windows(speech_regions(speech), cfg.window, cfg.shift, min_window);
}

struct ScoreMatrix {
  Matrix<double> values;
  int failures{0};  // pairs whose estimators failed, scored at min_train_score
};

/// Pairwise fused scores between all filters. The matrix is symmetric by
/// construction and the diagonal carries a +inf sentinel that clustering
/// ignores. Estimator failures for a pair fall back to the lowest score seen
/// in training so the pair clusters apart as weakly as the data allows.
inline ScoreMatrix score_matrix(const std::vector<WpeFilter>& filters, const ScoreModel& model) {
  if (filters.size() < 2) throw std::invalid_argument("score_matrix: need at least 2 filters");
  const std::size_t n = filters.size();
  ScoreMatrix out;
  out.values = Matrix<double>(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.values(i, i) = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double score;
      try {
        score = pair_features(filters[i], filters[j], model).fused;
      } catch (const std::runtime_error&) {
        score = model.min_train_score;
        ++out.failures;
      }
      out.values(i, j) = score;
      out.values(j, i) = score;
    }
  }
  return out;
}

/// Average-linkage agglomerative clustering on a similarity matrix. Merges the
/// highest-scoring pair first, lowest index pair on ties; KnownCount stops at
/// the requested cluster count, Threshold stops when the best merge falls
/// below the threshold. Labels are dense ids ordered by first appearance.
inline std::vector<int> ahc_cluster(const Matrix<double>& matrix, const ClusterMode& mode) {
  if (matrix.rows != matrix.cols || matrix.rows == 0)
    throw std::invalid_argument("ahc_cluster: need a nonempty square matrix");
  const std::size_t n = matrix.rows;

  // active-cluster similarity table updated by Lance-Williams averaging
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = matrix(i, j);
  std::vector<std::vector<int>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {static_cast<int>(i)};

  const std::size_t target =
      mode.kind == ClusterMode::Kind::KnownCount
          ? std::min<std::size_t>(n, static_cast<std::size_t>(std::max(mode.count, 1)))
          : 1;
  while (members.size() > target) {
    std::size_t bi = 0, bj = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        if (sim[i][j] > best) {
          best = sim[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (mode.kind == ClusterMode::Kind::Threshold && best < mode.threshold) break;
    const double wi = static_cast<double>(members[bi].size());
    const double wj = static_cast<double>(members[bj].size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k == bi || k == bj) continue;
      const double merged = (wi * sim[bi][k] + wj * sim[bj][k]) / (wi + wj);
      sim[bi][k] = merged;
      sim[k][bi] = merged;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members.erase(members.begin() + bj);
    for (auto& row : sim) row.erase(row.begin() + bj);
    sim.erase(sim.begin() + bj);
  }

  std::vector<int> labels(n, -1);
  for (auto& m : members) std::sort(m.begin(), m.end());
  std::sort(members.begin(), members.end());
  for (std::size_t c = 0; c < members.size(); ++c)
    for (int item : members[c]) labels[item] = static_cast<int>(c);
  return labels;
}

struct DiarizeReport {
  int windows{0};
  int dropped_windows{0};
  int score_failures{0};
  int chunks{1};
};

/// Full pipeline for one recording: slide windows over oracle speech, extract
/// a WPE filter per window, score all pairs, cluster, and convert window
/// labels back to a timeline. With chunk_len set the recording is split into
/// equal chunks processed independently; labels are then namespaced per chunk
/// since no stitching is attempted.
inline Timeline diarize(const std::vector<double>& audio, const Timeline& speech,
                        const DiarizeConfig& cfg, const WpeConfig& wpe_cfg, const ScoreModel& model,
                        double sample_rate = 16000.0, DiarizeReport* report = nullptr) {
  cfg.validate();
  wpe_cfg.validate();
  model.validate();
  if (!(sample_rate > 0.0)) throw std::invalid_argument("diarize: bad sample rate");

  DiarizeReport rep;
  Timeline hypothesis;
  const double total_dur = static_cast<double>(audio.size()) / sample_rate;
  const double min_window =
      (cfg.n_fft + (wpe_cfg.delay + wpe_cfg.taps) * cfg.hop) / sample_rate;
  const std::vector<std::pair<double, double>> regions = speech_regions(speech);

  const int n_chunks =
      cfg.chunk_len > 0.0 ? std::max(1, static_cast<int>(std::ceil(total_dur / cfg.chunk_len))) : 1;
  rep.chunks = n_chunks;

  for (int chunk = 0; chunk < n_chunks; ++chunk) {
    std::vector<std::pair<double, double>> chunk_regions;
    if (n_chunks == 1) {
      chunk_regions = regions;
    } else {
      const double lo = chunk * cfg.chunk_len;
      const double hi = std::min(total_dur, (chunk + 1) * cfg.chunk_len);
      for (const auto& [a, b] : regions) {
        const double ca = std::max(a, lo);
        const double cb = std::min(b, hi);
        if (cb > ca) chunk_regions.emplace_back(ca, cb);
      }
    }
    const std::vector<std::pair<double, double>> windows =
        segment_windows(chunk_regions, cfg.window, cfg.shift, min_window);

    std::vector<std::pair<double, double>> kept;
    std::vector<WpeFilter> filters;
    for (const auto& [b, e] : windows) {
      const std::size_t lo = static_cast<std::size_t>(std::llround(b * sample_rate));
      const std::size_t hi =
          std::min(audio.size(), static_cast<std::size_t>(std::llround(e * sample_rate)));
      if (hi <= lo) {
        ++rep.dropped_windows;
        continue;
      }
      try {
        const std::vector<double> cut(audio.begin() + lo, audio.begin() + hi);
        const Spectrogram spec = stft(cut, cfg.n_fft, cfg.hop, cfg.window_kind, sample_rate);
        filters.push_back(estimate_wpe(spec, wpe_cfg).filter);
        kept.emplace_back(b, e);
      } catch (const std::runtime_error&) {
        ++rep.dropped_windows;
      }
    }
    rep.windows += static_cast<int>(kept.size());
    if (kept.empty()) continue;

    std::vector<int> labels;
    if (kept.size() == 1) {
      labels = {0};
    } else {
      const ScoreMatrix scores = score_matrix(filters, model);
      rep.score_failures += scores.failures;
      labels = ahc_cluster(scores.values, cfg.cluster);
    }

    const std::string prefix = n_chunks > 1 ? "c" + std::to_string(chunk) + "_" : "";
    std::vector<LabeledWindow> labeled;
    labeled.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      labeled.push_back({kept[i].first, kept[i].second, prefix + "spk" + std::to_string(labels[i] + 1)});
    const Timeline chunk_timeline = windows_to_timeline(labeled);
    hypothesis.insert(hypothesis.end(), chunk_timeline.begin(), chunk_timeline.end());
  }

  if (report) *report = rep;
  return hypothesis;
}

}  // namespace wpeloc
