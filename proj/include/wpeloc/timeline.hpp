#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wpeloc {

struct Segment {
  std::string label;
  double begin{0.0};
  double end{0.0};

  double duration() const { return end - begin; }
};

/// A diarization annotation for one recording. Segments may overlap (two
/// speakers talking at once is two overlapping segments).
using Timeline = std::vector<Segment>;

/// Union of all segments, merged into disjoint intervals sorted by onset.
inline std::vector<std::pair<double, double>> speech_regions(const Timeline& timeline) {
  std::vector<std::pair<double, double>> spans;
  spans.reserve(timeline.size());
  for (const auto& seg : timeline) {
    if (seg.end <= seg.begin) continue;
    spans.emplace_back(seg.begin, seg.end);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }
  return merged;
}

struct LabeledWindow {
  double begin{0.0};
  double end{0.0};
  std::string label;
};

/// Sliding-window positions over disjoint regions. Within a region, full
/// windows advance by shift while they fit; a leftover tail shorter than half
/// a window extends the last window, otherwise it becomes its own window.
/// Regions shorter than one window are kept whole when at least min_window
/// long, else dropped.
inline std::vector<std::pair<double, double>> segment_windows(
    const std::vector<std::pair<double, double>>& regions, double window, double shift,
    double min_window = 0.0) {
  if (window <= 0.0 || shift <= 0.0) throw std::invalid_argument("segment_windows: window and shift must be positive");
  std::vector<std::pair<double, double>> out;
  for (const auto& [a, b] : regions) {
    const double len = b - a;
    if (len <= 0.0) continue;
    if (len < window) {
      if (len >= min_window) out.emplace_back(a, b);
      continue;
    }
    double covered_end = a;
    for (double s = a; s + window <= b + 1e-12; s += shift) {
      out.emplace_back(s, s + window);
      covered_end = s + window;
    }
    const double leftover = b - covered_end;
    if (leftover > 1e-12) {
      if (leftover >= 0.5 * window && leftover >= min_window)
        out.emplace_back(covered_end, b);
      else
        out.back().second = b;
    }
  }
  return out;
}

/// Collapses a run of (possibly overlapping) labeled windows into contiguous
/// segments. Consecutive same-label windows merge; at a label change the
/// boundary is the midpoint of the overlap region; disjoint windows always
/// break the run so gaps stay unlabeled.
inline Timeline windows_to_timeline(std::vector<LabeledWindow> windows) {
  std::stable_sort(windows.begin(), windows.end(),
                   [](const LabeledWindow& a, const LabeledWindow& b) { return a.begin < b.begin; });
  Timeline out;
  if (windows.empty()) return out;

  double run_begin = windows.front().begin;
  double run_end = windows.front().end;
  std::string run_label = windows.front().label;
  for (std::size_t i = 1; i < windows.size(); ++i) {
    const LabeledWindow& w = windows[i];
    const bool disjoint = w.begin > run_end + 1e-12;
    if (!disjoint && w.label == run_label) {
      run_end = std::max(run_end, w.end);
      continue;
    }
    const double boundary = disjoint ? run_end : 0.5 * (w.begin + run_end);
    out.push_back({run_label, run_begin, boundary});
    run_begin = disjoint ? w.begin : boundary;
    run_end = std::max(w.end, boundary);
    run_label = w.label;
  }
  out.push_back({run_label, run_begin, run_end});
  return out;
}

/// Parses an RTTM file into per-recording timelines. Only SPEAKER lines are
/// used; ";;"-comments and blank lines are skipped. Malformed SPEAKER lines
/// raise.
inline std::map<std::string, Timeline> read_rttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rttm file: " + path);
  std::map<std::string, Timeline> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind(";;", 0) == 0) continue;
    std::istringstream ss(line);
    std::string type;
    ss >> type;
    if (type.empty()) continue;
    if (type != "SPEAKER") continue;
    std::string rec, chan, ortho, stype, name;
    double tbeg = 0.0, tdur = 0.0;
    if (!(ss >> rec >> chan >> tbeg >> tdur >> ortho >> stype >> name))
      throw std::runtime_error("malformed rttm line " + std::to_string(lineno) + " in " + path);
    if (tdur < 0.0) throw std::runtime_error("negative duration on rttm line " + std::to_string(lineno));
    out[rec].push_back({name, tbeg, tbeg + tdur});
  }
  return out;
}

inline void write_rttm(std::ostream& out, const std::string& recording, const Timeline& timeline) {
  char buf[64];
  for (const auto& seg : timeline) {
    std::snprintf(buf, sizeof(buf), "%.3f", seg.begin);
    std::string tbeg(buf);
    std::snprintf(buf, sizeof(buf), "%.3f", seg.duration());
    std::string tdur(buf);
    out << "SPEAKER " << recording << " 1 " << tbeg << " " << tdur << " <NA> <NA> " << seg.label
        << " <NA> <NA>\n";
  }
}

inline void write_rttm(const std::string& path, const std::string& recording, const Timeline& timeline) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rttm file: " + path);
  write_rttm(out, recording, timeline);
}

}  // namespace wpeloc
