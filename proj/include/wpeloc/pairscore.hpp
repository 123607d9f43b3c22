#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wpeloc/spectral.hpp"
#include "wpeloc/wpe.hpp"

namespace wpeloc {

inline constexpr double kKappaMax = 500.0;
inline constexpr double kVarianceFloor = 1e-6;

/// Normalization of the filter magnitude-ratio average. Normalized rescales
/// the weights per tap so identical filters give exactly 1; Verbatim divides
/// the raw weighted sum by taps*bins instead.
enum class AlphaNorm { Normalized, Verbatim };

struct PairFeatures {
  double log_alpha{0.0};
  int delay_bin{0};
  double llr_mag{0.0};
  double llr_delay{0.0};
  double fused{0.0};
};

struct ScoreModel {
  double sigma2_same{1.0};
  double sigma2_diff{1.0};
  double kappa_same{0.0};
  std::array<double, 2> lda_w{1.0, 1.0};
  double lda_b{0.0};
  int delay_bins{256};
  double min_train_score{0.0};
  WpeConfig wpe;  // settings the training filters were extracted with

  void validate() const {
    if (sigma2_same <= 0.0 || sigma2_diff <= 0.0 || kappa_same < 0.0 || delay_bins < 2)
      throw std::invalid_argument("ScoreModel: invalid parameters");
  }
};

/// Weighted average over taps and bins of |G1|/|G2|. Bins where the
/// denominator filter is vanishingly small are excluded and the weights
/// renormalized over the surviving terms.
inline double estimate_alpha(const WpeFilter& g1, const WpeFilter& g2, const WeightVector& eps,
                             AlphaNorm norm = AlphaNorm::Normalized) {
  if (!g1.coeffs.same_shape(g2.coeffs)) throw std::invalid_argument("estimate_alpha: filter shape mismatch");
  if (eps.values.size() != g1.bins()) throw std::invalid_argument("estimate_alpha: weight length mismatch");
  const std::size_t taps = g1.taps();
  const std::size_t bins = g1.bins();

  double g2_max = 0.0;
  for (const auto& c : g2.coeffs.data) g2_max = std::max(g2_max, std::abs(c));
  const double guard = 1e-12 * g2_max;

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    for (std::size_t f = 0; f < bins; ++f) {
      const double w = eps.values[f];
      if (w <= 0.0) continue;
      const double mag2 = std::abs(g2.coeffs(k, f));
      if (mag2 <= guard) continue;
      num += w * std::abs(g1.coeffs(k, f)) / mag2;
      den += w;
    }
  }
  if (den <= 0.0) throw std::runtime_error("no comparable energy");
  if (norm == AlphaNorm::Normalized) return num / den;
  return num / (static_cast<double>(taps) * static_cast<double>(bins));
}

/// Delay-difference estimate: argmax over d of the real part of the
/// phase-normalized cross spectrum of the two filters, summed over taps and
/// averaged over bins with joint-energy weights. delay_bins = 0 derives the
/// circular support from the bin count (the analysis FFT length).
inline int estimate_delay(const WpeFilter& g1, const WpeFilter& g2, const WeightVector& eps,
                          int delay_bins = 0) {
  if (!g1.coeffs.same_shape(g2.coeffs)) throw std::invalid_argument("estimate_delay: filter shape mismatch");
  if (eps.values.size() != g1.bins()) throw std::invalid_argument("estimate_delay: weight length mismatch");
  const std::size_t taps = g1.taps();
  const std::size_t bins = g1.bins();
  const int support = delay_bins > 0 ? delay_bins : 2 * (static_cast<int>(bins) - 1);
  if (support < 2) throw std::invalid_argument("estimate_delay: bad delay-candidate count");

  // phase-only cross terms eps_f * G1 G2* / |G1 G2*|, zero-magnitude skipped
  std::vector<std::complex<double>> cross(taps * bins, {0.0, 0.0});
  bool any = false;
  for (std::size_t k = 0; k < taps; ++k) {
    for (std::size_t f = 0; f < bins; ++f) {
      const std::complex<double> c = g1.coeffs(k, f) * std::conj(g2.coeffs(k, f));
      const double mag = std::abs(c);
      if (mag < 1e-30 || eps.values[f] <= 0.0) continue;
      cross[k * bins + f] = c * (eps.values[f] / mag);
      any = true;
    }
  }
  if (!any) throw std::runtime_error("no comparable energy");

  const double two_pi = 2.0 * 3.14159265358979323846;
  int best_d = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int d = 0; d < support; ++d) {
    double score = 0.0;
    for (std::size_t f = 0; f < bins; ++f) {
      const double phase = two_pi * static_cast<double>(d) * static_cast<double>(f) / support;
      const std::complex<double> rot(std::cos(phase), std::sin(phase));
      std::complex<double> col{0.0, 0.0};
      for (std::size_t k = 0; k < taps; ++k) col += cross[k * bins + f];
      score += (col * rot).real();
    }
    if (score > best_score) {
      best_score = score;
      best_d = d;
    }
  }
  return best_d;
}

/// Log likelihood ratio of same vs different location from the log magnitude
/// ratio, under zero-mean Gaussians with the model's two variances.
inline double magnitude_llr(double log_alpha, const ScoreModel& model) {
  model.validate();
  return 0.5 * (std::log(model.sigma2_diff / model.sigma2_same) +
                log_alpha * log_alpha * (1.0 / model.sigma2_diff - 1.0 / model.sigma2_same));
}

/// Log likelihood ratio from the delay bin: discretized von Mises centered at
/// zero against a uniform distribution on the same circular support.
inline double delay_llr(int delay_bin, const ScoreModel& model) {
  model.validate();
  const int support = model.delay_bins;
  if (delay_bin < 0 || delay_bin >= support) throw std::invalid_argument("delay_llr: bin out of range");
  const double two_pi = 2.0 * 3.14159265358979323846;
  const double kappa = model.kappa_same;
  // log normalizer with the max term factored out so large kappa stays finite
  double sum = 0.0;
  for (int d = 0; d < support; ++d) sum += std::exp(kappa * (std::cos(two_pi * d / support) - 1.0));
  const double log_z = kappa + std::log(sum);
  return kappa * std::cos(two_pi * delay_bin / support) - log_z + std::log(static_cast<double>(support));
}

namespace detail {

// Order-invariant features of a filter pair: the log magnitude ratio is the
// symmetrized half-difference of the two directed ratio estimates, so swapping
// the arguments negates it exactly; the delay estimate maps to (T-d) mod T.
inline std::pair<double, int> pair_log_alpha_and_delay(const WpeFilter& g1, const WpeFilter& g2,
                                                       const WeightVector& eps, int delay_bins,
                                                       AlphaNorm norm) {
  const double a12 = estimate_alpha(g1, g2, eps, norm);
  const double a21 = estimate_alpha(g2, g1, eps, norm);
  if (a12 <= 0.0 || a21 <= 0.0) throw std::runtime_error("no comparable energy");
  const double log_alpha = 0.5 * (std::log(a12) - std::log(a21));
  const int d = estimate_delay(g1, g2, eps, delay_bins);
  return {log_alpha, d};
}

}  // namespace detail

/// Full comparison of two filters: joint-energy weights from the stored power
/// profiles, magnitude and delay estimates, both LLRs, and the LDA-fused score.
inline PairFeatures pair_features(const WpeFilter& g1, const WpeFilter& g2, const ScoreModel& model,
                                  AlphaNorm norm = AlphaNorm::Normalized) {
  model.validate();
  const WeightVector eps = joint_energy_weights(g1.power, g2.power);
  PairFeatures out;
  const auto [log_alpha, delay] = detail::pair_log_alpha_and_delay(g1, g2, eps, model.delay_bins, norm);
  out.log_alpha = log_alpha;
  out.delay_bin = delay;
  out.llr_mag = magnitude_llr(out.log_alpha, model);
  out.llr_delay = delay_llr(out.delay_bin, model);
  out.fused = model.lda_w[0] * out.llr_mag + model.lda_w[1] * out.llr_delay + model.lda_b;
  return out;
}

struct LdaFit {
  std::array<double, 2> w{0.0, 0.0};
  double b{0.0};
};

/// Two-class LDA on 2-D points with pooled within-class covariance; the bias
/// places the equal-prior decision boundary at score zero.
inline LdaFit fit_lda(const std::vector<std::array<double, 2>>& pos,
                      const std::vector<std::array<double, 2>>& neg) {
  if (pos.size() < 2 || neg.size() < 2) throw std::runtime_error("fit_lda: need at least 2 points per class");
  auto mean_of = [](const std::vector<std::array<double, 2>>& pts) {
    std::array<double, 2> m{0.0, 0.0};
    for (const auto& p : pts) {
      m[0] += p[0];
      m[1] += p[1];
    }
    m[0] /= pts.size();
    m[1] /= pts.size();
    return m;
  };
  const std::array<double, 2> mu_p = mean_of(pos);
  const std::array<double, 2> mu_n = mean_of(neg);

  double s00 = 0.0, s01 = 0.0, s11 = 0.0;
  auto accumulate = [&](const std::vector<std::array<double, 2>>& pts, const std::array<double, 2>& mu) {
    for (const auto& p : pts) {
      const double d0 = p[0] - mu[0];
      const double d1 = p[1] - mu[1];
      s00 += d0 * d0;
      s01 += d0 * d1;
      s11 += d1 * d1;
    }
  };
  accumulate(pos, mu_p);
  accumulate(neg, mu_n);
  const double denom = static_cast<double>(pos.size() + neg.size() - 2);
  s00 /= denom;
  s01 /= denom;
  s11 /= denom;
  // ridge keeps degenerate (constant-feature) training data solvable
  const double ridge = 1e-9 * std::max(s00 + s11, 1.0);
  s00 += ridge;
  s11 += ridge;

  const double det = s00 * s11 - s01 * s01;
  const std::array<double, 2> diff{mu_p[0] - mu_n[0], mu_p[1] - mu_n[1]};
  LdaFit fit;
  fit.w[0] = (s11 * diff[0] - s01 * diff[1]) / det;
  fit.w[1] = (-s01 * diff[0] + s00 * diff[1]) / det;
  fit.b = -0.5 * (fit.w[0] * (mu_p[0] + mu_n[0]) + fit.w[1] * (mu_p[1] + mu_n[1]));
  return fit;
}

/// Fits the score model from labeled filter pairs: Gaussian variances of the
/// log magnitude ratio per class, von Mises concentration of the same-class
/// delays via the mean-resultant-length approximation, then LDA over the two
/// LLR features. Records the minimum fused training score for downstream
/// failure handling.
inline ScoreModel train_model(const std::vector<std::pair<WpeFilter, WpeFilter>>& same_pairs,
                              const std::vector<std::pair<WpeFilter, WpeFilter>>& diff_pairs,
                              int delay_bins, AlphaNorm norm = AlphaNorm::Normalized) {
  if (same_pairs.size() < 2 || diff_pairs.size() < 2)
    throw std::runtime_error("train_model: need at least 2 pairs per class");
  if (delay_bins < 2) throw std::invalid_argument("train_model: bad delay-candidate count");

  struct Raw {
    double log_alpha;
    int delay;
  };
  auto extract = [&](const std::vector<std::pair<WpeFilter, WpeFilter>>& pairs) {
    std::vector<Raw> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      const WeightVector eps = joint_energy_weights(a.power, b.power);
      const auto [la, d] = detail::pair_log_alpha_and_delay(a, b, eps, delay_bins, norm);
      out.push_back({la, d});
    }
    return out;
  };
  const std::vector<Raw> same_raw = extract(same_pairs);
  const std::vector<Raw> diff_raw = extract(diff_pairs);

  ScoreModel model;
  model.delay_bins = delay_bins;
  model.wpe = same_pairs.front().first.config;

  auto mean_square = [](const std::vector<Raw>& raw) {
    double s = 0.0;
    for (const auto& r : raw) s += r.log_alpha * r.log_alpha;
    return s / static_cast<double>(raw.size());
  };
  model.sigma2_same = std::max(mean_square(same_raw), kVarianceFloor);
  model.sigma2_diff = std::max(mean_square(diff_raw), kVarianceFloor);

  const double two_pi = 2.0 * 3.14159265358979323846;
  double rbar = 0.0;
  for (const auto& r : same_raw) rbar += std::cos(two_pi * r.delay / delay_bins);
  rbar /= static_cast<double>(same_raw.size());
  if (rbar >= 1.0) {
    model.kappa_same = kKappaMax;
  } else if (rbar <= 0.0) {
    model.kappa_same = 0.0;
  } else {
    const double kappa = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
    model.kappa_same = std::min(std::max(kappa, 0.0), kKappaMax);
  }

  auto features_of = [&](const std::vector<Raw>& raw) {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(raw.size());
    for (const auto& r : raw)
      pts.push_back({magnitude_llr(r.log_alpha, model), delay_llr(r.delay, model)});
    return pts;
  };
  const std::vector<std::array<double, 2>> same_pts = features_of(same_raw);
  const std::vector<std::array<double, 2>> diff_pts = features_of(diff_raw);
  const LdaFit lda = fit_lda(same_pts, diff_pts);
  model.lda_w = lda.w;
  model.lda_b = lda.b;

  double min_score = std::numeric_limits<double>::infinity();
  for (const auto& pts : {same_pts, diff_pts})
    for (const auto& p : pts)
      min_score = std::min(min_score, model.lda_w[0] * p[0] + model.lda_w[1] * p[1] + model.lda_b);
  model.min_train_score = min_score;
  return model;
}

inline constexpr int kScoreModelSchemaVersion = 1;

inline nlohmann::json score_model_to_json(const ScoreModel& model) {
  return nlohmann::json{{"schema_version", kScoreModelSchemaVersion},
                        {"sigma2_same", model.sigma2_same},
                        {"sigma2_diff", model.sigma2_diff},
                        {"kappa_same", model.kappa_same},
                        {"lda_w", {model.lda_w[0], model.lda_w[1]}},
                        {"lda_b", model.lda_b},
                        {"delay_bins", model.delay_bins},
                        {"min_train_score", model.min_train_score},
                        {"wpe",
                         {{"taps", model.wpe.taps},
                          {"delay", model.wpe.delay},
                          {"iterations", model.wpe.iterations},
                          {"power_floor", model.wpe.power_floor}}}};
}

inline ScoreModel score_model_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kScoreModelSchemaVersion)
    throw std::runtime_error("score model: unsupported schema version");
  ScoreModel model;
  model.sigma2_same = j.at("sigma2_same").get<double>();
  model.sigma2_diff = j.at("sigma2_diff").get<double>();
  model.kappa_same = j.at("kappa_same").get<double>();
  model.lda_w[0] = j.at("lda_w").at(0).get<double>();
  model.lda_w[1] = j.at("lda_w").at(1).get<double>();
  model.lda_b = j.at("lda_b").get<double>();
  model.delay_bins = j.at("delay_bins").get<int>();
  model.min_train_score = j.at("min_train_score").get<double>();
  const auto& w = j.at("wpe");
  model.wpe.taps = w.at("taps").get<int>();
  model.wpe.delay = w.at("delay").get<int>();
  model.wpe.iterations = w.at("iterations").get<int>();
  model.wpe.power_floor = w.at("power_floor").get<double>();
  model.validate();
  return model;
}

inline void save_score_model(const std::string& path, const ScoreModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << score_model_to_json(model).dump(2) << "\n";
}

inline ScoreModel load_score_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  return score_model_from_json(j);
}

}  // namespace wpeloc
