#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wpeloc/detail/linalg.hpp"
#include "wpeloc/timeline.hpp"

namespace wpeloc {

struct DerBreakdown {
  double miss{0.0};
  double false_alarm{0.0};
  double confusion{0.0};
  double total_speech{0.0};

  double der() const { return (miss + false_alarm + confusion) / total_speech; }
};

namespace detail {

// 0.1 ms ticks; diarization boundaries are well above this resolution, and
// integer ticks make the interval sweep exact.
inline std::int64_t to_tick(double seconds) { return std::llround(seconds * 1e4); }

struct TickSegment {
  int label;
  std::int64_t begin;
  std::int64_t end;
};

inline std::vector<TickSegment> to_ticks(const Timeline& timeline, std::map<std::string, int>& ids) {
  std::vector<TickSegment> out;
  out.reserve(timeline.size());
  for (const auto& seg : timeline) {
    const std::int64_t b = to_tick(seg.begin);
    const std::int64_t e = to_tick(seg.end);
    if (e <= b) continue;
    const auto [it, inserted] = ids.emplace(seg.label, static_cast<int>(ids.size()));
    out.push_back({it->second, b, e});
  }
  return out;
}

}  // namespace detail

/// Diarization error rate with no collar and overlapping speech scored.
/// Hypothesis labels are mapped to reference speakers one-to-one so that the
/// total attributed time is maximal; in each interval between boundaries,
/// unmatched reference speakers count as miss, surplus hypothesis speakers as
/// false alarm, and co-active but unmapped pairs as confusion. The denominator
/// is reference speech time counted with overlap multiplicity.
inline DerBreakdown der(const Timeline& reference, const Timeline& hypothesis) {
  std::map<std::string, int> ref_ids, hyp_ids;
  const std::vector<detail::TickSegment> ref = detail::to_ticks(reference, ref_ids);
  const std::vector<detail::TickSegment> hyp = detail::to_ticks(hypothesis, hyp_ids);
  if (ref.empty()) throw std::runtime_error("nothing to score");

  std::vector<std::int64_t> bounds;
  bounds.reserve(2 * (ref.size() + hyp.size()));
  for (const auto& s : ref) {
    bounds.push_back(s.begin);
    bounds.push_back(s.end);
  }
  for (const auto& s : hyp) {
    bounds.push_back(s.begin);
    bounds.push_back(s.end);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  const std::size_t nr = ref_ids.size();
  const std::size_t nh = hyp_ids.size();
  // active-label sets per interval, deduplicated so a speaker overlapping
  // itself counts once
  std::vector<std::vector<int>> ref_active(bounds.size() - 1), hyp_active(bounds.size() - 1);
  auto fill_active = [&](const std::vector<detail::TickSegment>& segs, std::vector<std::vector<int>>& act) {
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      std::set<int> labels;
      for (const auto& s : segs)
        if (s.begin <= bounds[i] && bounds[i + 1] <= s.end) labels.insert(s.label);
      act[i].assign(labels.begin(), labels.end());
    }
  };
  fill_active(ref, ref_active);
  fill_active(hyp, hyp_active);

  // overlap time per (ref, hyp) label pair drives the global mapping
  std::vector<std::vector<double>> overlap(nr, std::vector<double>(nh, 0.0));
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double dur = static_cast<double>(bounds[i + 1] - bounds[i]);
    for (int r : ref_active[i])
      for (int h : hyp_active[i]) overlap[r][h] += dur;
  }

  // map on the smaller side; detail::max_assignment needs cols <= 20
  std::vector<int> ref_to_hyp(nr, -1);
  if (nr > 0 && nh > 0) {
    if (std::min(nr, nh) > 20) throw std::runtime_error("der: too many speakers to map");
    if (nh <= nr) {
      ref_to_hyp = detail::max_assignment(overlap);
    } else {
      std::vector<std::vector<double>> t(nh, std::vector<double>(nr, 0.0));
      for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t h = 0; h < nh; ++h) t[h][r] = overlap[r][h];
      const std::vector<int> hyp_to_ref = detail::max_assignment(t);
      for (std::size_t h = 0; h < nh; ++h)
        if (hyp_to_ref[h] >= 0) ref_to_hyp[hyp_to_ref[h]] = static_cast<int>(h);
    }
  }

  DerBreakdown out;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double dur = static_cast<double>(bounds[i + 1] - bounds[i]) * 1e-4;
    const int r = static_cast<int>(ref_active[i].size());
    const int h = static_cast<int>(hyp_active[i].size());
    if (r == 0 && h == 0) continue;
    int matched = 0;
    for (int rl : ref_active[i]) {
      const int hm = ref_to_hyp[rl];
      if (hm >= 0 && std::find(hyp_active[i].begin(), hyp_active[i].end(), hm) != hyp_active[i].end())
        ++matched;
    }
    out.total_speech += r * dur;
    out.miss += std::max(0, r - h) * dur;
    out.false_alarm += std::max(0, h - r) * dur;
    out.confusion += (std::min(r, h) - matched) * dur;
  }
  return out;
}

/// Uniform-random labeling of the given windows, converted to a timeline the
/// same way the diarizer converts its own. Label draws use raw engine outputs
/// modulo n_spk so results are reproducible across library versions.
inline Timeline random_baseline(const std::vector<std::pair<double, double>>& windows, int n_spk,
                                std::uint64_t seed) {
  if (n_spk < 1) throw std::invalid_argument("random_baseline: need at least one speaker");
  std::mt19937_64 rng(seed);
  std::vector<LabeledWindow> labeled;
  labeled.reserve(windows.size());
  for (const auto& [b, e] : windows) {
    const int id = static_cast<int>(rng() % static_cast<std::uint64_t>(n_spk));
    labeled.push_back({b, e, "spk" + std::to_string(1 + id)});
  }
  if (labeled.empty()) return {};
  return windows_to_timeline(labeled);
}

struct DerRow {
  std::string recording;
  DerBreakdown breakdown;
};

inline void write_der_csv(std::ostream& out, const std::vector<DerRow>& rows) {
  out << "recording_id,miss,false_alarm,confusion,der\n";
  char buf[160];
  for (const auto& row : rows) {
    const DerBreakdown& b = row.breakdown;
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f", b.miss, b.false_alarm, b.confusion,
                  b.der());
    out << row.recording << "," << buf << "\n";
  }
}

}  // namespace wpeloc
