#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <vector>

#include "testutil.hpp"
#include "wpeloc/pairscore.hpp"

using namespace wpeloc;
using Catch::Approx;

namespace {

using cd = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

WeightVector flat_weights(std::size_t bins) {
  WeightVector w;
  w.values.assign(bins, 1.0 / static_cast<double>(bins));
  return w;
}

// filter pair with exactly known magnitude ratio and delay:
// g1 = ratio * g2 * exp(-j 2 pi d f / T)
std::pair<WpeFilter, WpeFilter> controlled_pair(const WpeFilter& base, double ratio, int d, int T) {
  WpeFilter g1 = base;
  for (std::size_t k = 0; k < base.taps(); ++k)
    for (std::size_t f = 0; f < base.bins(); ++f)
      g1.coeffs(k, f) = ratio * base.coeffs(k, f) *
                        std::polar(1.0, -2.0 * kPi * d * static_cast<double>(f) / T);
  return {g1, base};
}

// independent evaluation of the delay objective at one candidate
double delay_objective(const WpeFilter& g1, const WpeFilter& g2, const WeightVector& eps, int T,
                       int d) {
  double score = 0.0;
  for (std::size_t k = 0; k < g1.taps(); ++k) {
    for (std::size_t f = 0; f < g1.bins(); ++f) {
      const cd cross = g1.coeffs(k, f) * std::conj(g2.coeffs(k, f));
      if (std::abs(cross) < 1e-30) continue;
      const cd rot = std::polar(eps.values[f] / std::abs(cross),
                                2.0 * kPi * d * static_cast<double>(f) / T);
      score += (cross * rot).real();
    }
  }
  return score;
}

ScoreModel toy_model(double s2_same = 0.04, double s2_diff = 1.0, double kappa = 3.0, int T = 16) {
  ScoreModel m;
  m.sigma2_same = s2_same;
  m.sigma2_diff = s2_diff;
  m.kappa_same = kappa;
  m.lda_w = {0.7, 1.3};
  m.lda_b = -0.25;
  m.delay_bins = T;
  return m;
}

}  // namespace

TEST_CASE("alpha: constant-ratio filters", "[pairscore]") {
  const WpeFilter g2 = testutil::random_filter(4, 9, 5);
  WpeFilter g1 = g2;
  for (auto& v : g1.coeffs.data) v *= 2.0;
  const WeightVector eps = flat_weights(9);

  REQUIRE(estimate_alpha(g1, g2, eps) == Approx(2.0).margin(1e-12));
  REQUIRE(estimate_alpha(g2, g2, eps) == Approx(1.0).margin(1e-12));
}

TEST_CASE("alpha: concentrated weights reduce to a per-tap mean", "[pairscore]") {
  const WpeFilter g1 = testutil::random_filter(4, 9, 6);
  const WpeFilter g2 = testutil::random_filter(4, 9, 7);
  const std::size_t f0 = 3;
  WeightVector eps;
  eps.values.assign(9, 0.0);
  eps.values[f0] = 0.8;

  double expect = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    expect += std::abs(g1.coeffs(k, f0)) / std::abs(g2.coeffs(k, f0));
  expect /= 4.0;
  REQUIRE(estimate_alpha(g1, g2, eps) == Approx(expect).margin(1e-12));
}

TEST_CASE("alpha: verbatim normalization divides by taps times bins", "[pairscore]") {
  const WpeFilter g2 = testutil::random_filter(4, 9, 8);
  const WeightVector eps = flat_weights(9);
  // identical filters: weighted sum is taps * sum(eps) = 4, verbatim divides by 36
  REQUIRE(estimate_alpha(g2, g2, eps, AlphaNorm::Verbatim) == Approx(4.0 / 36.0).margin(1e-12));
}

TEST_CASE("alpha: guarded denominators are excluded and weights renormalized", "[pairscore]") {
  WpeFilter g1 = testutil::make_filter(2, 3, [](std::size_t, std::size_t) { return cd{3.0, 0.0}; });
  WpeFilter g2 = testutil::make_filter(2, 3, [](std::size_t, std::size_t f) {
    return f == 1 ? cd{1.0, 0.0} : cd{1e-15, 0.0};
  });
  const WeightVector eps = flat_weights(3);
  // only bin 1 survives the 1e-12 * max|G2| guard
  REQUIRE(estimate_alpha(g1, g2, eps) == Approx(3.0).margin(1e-12));

  WpeFilter zero = testutil::make_filter(2, 3, [](std::size_t, std::size_t) { return cd{0.0, 0.0}; });
  REQUIRE_THROWS_WITH(estimate_alpha(g1, zero, eps), "no comparable energy");
}

TEST_CASE("delay: identical filters peak at zero", "[pairscore]") {
  const WpeFilter g = testutil::random_filter(4, 9, 9);
  REQUIRE(estimate_delay(g, g, flat_weights(9)) == 0);
}

TEST_CASE("delay: known circular shift is recovered, swap reverses it", "[pairscore]") {
  const WpeFilter base = testutil::random_filter(4, 9, 10);
  const auto [g1, g2] = controlled_pair(base, 1.0, 5, 16);
  const WeightVector eps = flat_weights(9);
  REQUIRE(estimate_delay(g1, g2, eps) == 5);
  REQUIRE(estimate_delay(g2, g1, eps) == 11);  // (16 - 5) mod 16
}

TEST_CASE("delay: matches brute-force argmax on random filters", "[pairscore]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WpeFilter g1 = testutil::random_filter(3, 9, 100 + seed);
    const WpeFilter g2 = testutil::random_filter(3, 9, 200 + seed);
    std::mt19937_64 rng(300 + seed);
    WeightVector eps;
    for (int f = 0; f < 9; ++f) eps.values.push_back(0.01 + static_cast<double>(rng() % 100) / 100.0);

    const int T = 16;
    int best_d = 0;
    double best = -1e300;
    for (int d = 0; d < T; ++d) {
      const double v = delay_objective(g1, g2, eps, T, d);
      if (v > best) {
        best = v;
        best_d = d;
      }
    }
    REQUIRE(estimate_delay(g1, g2, eps, T) == best_d);
  }
}

TEST_CASE("delay: all-zero cross terms are an error", "[pairscore]") {
  const WpeFilter g = testutil::random_filter(4, 9, 11);
  const WpeFilter zero = testutil::make_filter(4, 9, [](std::size_t, std::size_t) { return cd{0.0, 0.0}; });
  REQUIRE_THROWS_WITH(estimate_delay(g, zero, flat_weights(9)), "no comparable energy");
}

TEST_CASE("magnitude llr closed forms", "[pairscore]") {
  ScoreModel equal = toy_model(0.5, 0.5, 1.0);
  REQUIRE(magnitude_llr(0.0, equal) == Approx(0.0).margin(1e-12));
  REQUIRE(magnitude_llr(1.7, equal) == Approx(0.0).margin(1e-12));

  ScoreModel m = toy_model(0.01, 1.0, 1.0);
  REQUIRE(magnitude_llr(0.0, m) == Approx(0.5 * std::log(100.0)).margin(1e-12));
  REQUIRE(magnitude_llr(0.0, m) == Approx(2.302585092994046).margin(1e-12));

  // crossover where the two class densities are equal
  const double cross2 = std::log(m.sigma2_diff / m.sigma2_same) /
                        (1.0 / m.sigma2_same - 1.0 / m.sigma2_diff);
  REQUIRE(magnitude_llr(std::sqrt(cross2), m) == Approx(0.0).margin(1e-12));
  REQUIRE(magnitude_llr(-std::sqrt(cross2), m) == Approx(0.0).margin(1e-12));
}

TEST_CASE("delay llr: uniform degeneracy, extremes, brute-force normalizer", "[pairscore]") {
  ScoreModel flat = toy_model(0.04, 1.0, 0.0, 16);
  for (int d = 0; d < 16; ++d) REQUIRE(delay_llr(d, flat) == Approx(0.0).margin(1e-12));

  ScoreModel m = toy_model(0.04, 1.0, 2.0, 8);
  const double best = delay_llr(0, m);
  const double worst = delay_llr(4, m);  // d = T/2
  for (int d = 1; d < 8; ++d) {
    REQUIRE(delay_llr(d, m) <= best + 1e-12);
    REQUIRE(worst <= delay_llr(d, m) + 1e-12);
  }

  double z = 0.0;
  for (int d = 0; d < 8; ++d) z += std::exp(2.0 * std::cos(2.0 * kPi * d / 8.0));
  REQUIRE(delay_llr(0, m) == Approx(2.0 - std::log(z) + std::log(8.0)).margin(1e-9));

  REQUIRE_THROWS_AS(delay_llr(-1, m), std::invalid_argument);
  REQUIRE_THROWS_AS(delay_llr(8, m), std::invalid_argument);
}

TEST_CASE("delay llr stays finite at the kappa cap", "[pairscore]") {
  ScoreModel m = toy_model(0.04, 1.0, kKappaMax, 256);
  const double at_mode = delay_llr(0, m);
  const double at_far = delay_llr(128, m);
  REQUIRE(std::isfinite(at_mode));
  REQUIRE(std::isfinite(at_far));
  REQUIRE(at_mode > 0.0);
  REQUIRE(at_far < -500.0);
  // shifted normalizer: exponents are all <= 0, so the sum is safe in doubles
  double zs = 0.0;
  for (int d = 0; d < 256; ++d) zs += std::exp(kKappaMax * (std::cos(2.0 * kPi * d / 256.0) - 1.0));
  REQUIRE(at_mode == Approx(std::log(256.0) - std::log(zs)).margin(1e-9));
}

TEST_CASE("delay llr is exactly calibrated over its support", "[pairscore]") {
  ScoreModel m = toy_model(0.04, 1.0, 3.7, 16);
  double mean_ratio = 0.0;
  for (int d = 0; d < 16; ++d) mean_ratio += std::exp(delay_llr(d, m)) / 16.0;
  REQUIRE(mean_ratio == Approx(1.0).margin(1e-6));
}

TEST_CASE("magnitude llr is calibrated under monte carlo", "[pairscore]") {
  ScoreModel m = toy_model(0.25, 1.0, 1.0);
  std::mt19937_64 rng(424242);
  std::normal_distribution<double> diff_draw(0.0, std::sqrt(m.sigma2_diff));
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += std::exp(magnitude_llr(diff_draw(rng), m));
  REQUIRE(acc / n == Approx(1.0).margin(2e-2));
}

TEST_CASE("pair features: swap invariance of the fused score", "[pairscore]") {
  const ScoreModel m = toy_model();
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    WpeFilter g1 = testutil::random_filter(4, 9, 1000 + trial);
    WpeFilter g2 = testutil::random_filter(4, 9, 2000 + trial);
    for (auto* g : {&g1, &g2})
      for (double& p : g->power.values) p = 0.05 + static_cast<double>(rng() % 1000) / 250.0;

    const PairFeatures fwd = pair_features(g1, g2, m);
    const PairFeatures rev = pair_features(g2, g1, m);
    REQUIRE(rev.log_alpha == Approx(-fwd.log_alpha).margin(1e-12));
    REQUIRE(rev.delay_bin == (m.delay_bins - fwd.delay_bin) % m.delay_bins);
    REQUIRE(std::abs(fwd.fused - rev.fused) < 1e-9);
  }
}

TEST_CASE("pair features: affine recomputation and identity-model positivity", "[pairscore]") {
  const ScoreModel m = toy_model();
  const WpeFilter base = testutil::random_filter(4, 9, 50);
  const auto [g1, g2] = controlled_pair(base, 1.6, 3, m.delay_bins);
  const PairFeatures pf = pair_features(g1, g2, m);

  REQUIRE(pf.log_alpha == Approx(std::log(1.6)).margin(1e-9));
  REQUIRE(pf.delay_bin == 3);
  REQUIRE(pf.llr_mag == Approx(magnitude_llr(pf.log_alpha, m)).margin(1e-12));
  REQUIRE(pf.llr_delay == Approx(delay_llr(pf.delay_bin, m)).margin(1e-12));
  REQUIRE(pf.fused == Approx(m.lda_w[0] * pf.llr_mag + m.lda_w[1] * pf.llr_delay + m.lda_b).margin(1e-12));

  ScoreModel identity = toy_model(0.04, 1.0, 3.0);
  identity.lda_w = {1.0, 1.0};
  identity.lda_b = 0.0;
  const PairFeatures same = pair_features(base, base, identity);
  REQUIRE(same.fused > 0.0);
}

TEST_CASE("lda fit matches hand computation and is antisymmetric", "[pairscore]") {
  const std::vector<std::array<double, 2>> pos = {{2.0, 1.0}, {3.0, 2.0}, {2.5, 1.2}, {3.5, 1.8}};
  const std::vector<std::array<double, 2>> neg = {{-1.0, 0.5}, {-2.0, -0.5}, {-1.5, 0.2}, {-0.5, -0.2}};

  const LdaFit fit = fit_lda(pos, neg);

  // independent pooled-covariance computation
  std::array<double, 2> mp{0, 0}, mn{0, 0};
  for (const auto& p : pos) {
    mp[0] += p[0] / pos.size();
    mp[1] += p[1] / pos.size();
  }
  for (const auto& p : neg) {
    mn[0] += p[0] / neg.size();
    mn[1] += p[1] / neg.size();
  }
  double s00 = 0, s01 = 0, s11 = 0;
  for (const auto& p : pos) {
    s00 += (p[0] - mp[0]) * (p[0] - mp[0]);
    s01 += (p[0] - mp[0]) * (p[1] - mp[1]);
    s11 += (p[1] - mp[1]) * (p[1] - mp[1]);
  }
  for (const auto& p : neg) {
    s00 += (p[0] - mn[0]) * (p[0] - mn[0]);
    s01 += (p[0] - mn[0]) * (p[1] - mn[1]);
    s11 += (p[1] - mn[1]) * (p[1] - mn[1]);
  }
  s00 /= 6.0;
  s01 /= 6.0;
  s11 /= 6.0;
  const double det = s00 * s11 - s01 * s01;
  const double d0 = mp[0] - mn[0], d1 = mp[1] - mn[1];
  const double w0 = (s11 * d0 - s01 * d1) / det;
  const double w1 = (-s01 * d0 + s00 * d1) / det;
  REQUIRE(fit.w[0] == Approx(w0).epsilon(1e-6));
  REQUIRE(fit.w[1] == Approx(w1).epsilon(1e-6));
  REQUIRE(fit.b == Approx(-0.5 * (w0 * (mp[0] + mn[0]) + w1 * (mp[1] + mn[1]))).epsilon(1e-6));

  const LdaFit swapped = fit_lda(neg, pos);
  REQUIRE(swapped.w[0] == Approx(-fit.w[0]).margin(1e-12));
  REQUIRE(swapped.w[1] == Approx(-fit.w[1]).margin(1e-12));
  REQUIRE(swapped.b == Approx(-fit.b).margin(1e-12));
}

TEST_CASE("train: degenerate perfect data hits the floors and the kappa cap", "[pairscore]") {
  const WpeFilter a = testutil::random_filter(4, 9, 60);
  const WpeFilter b = testutil::random_filter(4, 9, 61);
  const auto [d1, d2] = controlled_pair(a, 3.0, 4, 16);
  const auto [d3, d4] = controlled_pair(b, 0.25, 8, 16);

  const ScoreModel model = train_model({{a, a}, {b, b}}, {{d1, d2}, {d3, d4}}, 16);
  REQUIRE(model.sigma2_same == Approx(kVarianceFloor).margin(1e-15));
  REQUIRE(model.kappa_same == Approx(kKappaMax).margin(1e-12));
  REQUIRE(model.sigma2_diff > kVarianceFloor);
  REQUIRE(model.delay_bins == 16);
  REQUIRE(std::isfinite(model.min_train_score));
}

TEST_CASE("train: hand dataset matches a from-scratch recomputation", "[pairscore]") {
  const int T = 16;
  const std::vector<double> same_ratios = {1.05, 0.95, 1.1, 0.9};
  const std::vector<int> same_delays = {0, 1, 15, 0};
  const std::vector<double> diff_ratios = {3.0, 0.3, 2.5, 0.4};
  const std::vector<int> diff_delays = {4, 8, 12, 6};

  std::vector<std::pair<WpeFilter, WpeFilter>> same, diff;
  for (std::size_t i = 0; i < 4; ++i) {
    same.push_back(controlled_pair(testutil::random_filter(4, 9, 70 + i), same_ratios[i], same_delays[i], T));
    diff.push_back(controlled_pair(testutil::random_filter(4, 9, 80 + i), diff_ratios[i], diff_delays[i], T));
  }
  const ScoreModel model = train_model(same, diff, T);

  double s2s = 0.0, s2d = 0.0, rbar = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    s2s += std::pow(std::log(same_ratios[i]), 2) / 4.0;
    s2d += std::pow(std::log(diff_ratios[i]), 2) / 4.0;
    rbar += std::cos(2.0 * kPi * same_delays[i] / T) / 4.0;
  }
  const double kappa = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
  REQUIRE(model.sigma2_same == Approx(s2s).epsilon(1e-9));
  REQUIRE(model.sigma2_diff == Approx(s2d).epsilon(1e-9));
  REQUIRE(model.kappa_same == Approx(kappa).epsilon(1e-9));

  // LDA over the two LLR features, recomputed through the public pieces
  std::vector<std::array<double, 2>> same_pts, diff_pts;
  for (std::size_t i = 0; i < 4; ++i) {
    same_pts.push_back({magnitude_llr(std::log(same_ratios[i]), model), delay_llr(same_delays[i], model)});
    diff_pts.push_back({magnitude_llr(std::log(diff_ratios[i]), model), delay_llr(diff_delays[i], model)});
  }
  const LdaFit lda = fit_lda(same_pts, diff_pts);
  REQUIRE(model.lda_w[0] == Approx(lda.w[0]).epsilon(1e-9));
  REQUIRE(model.lda_w[1] == Approx(lda.w[1]).epsilon(1e-9));
  REQUIRE(model.lda_b == Approx(lda.b).epsilon(1e-9));

  double min_score = 1e300;
  for (const auto& pts : {same_pts, diff_pts})
    for (const auto& p : pts)
      min_score = std::min(min_score, lda.w[0] * p[0] + lda.w[1] * p[1] + lda.b);
  REQUIRE(model.min_train_score == Approx(min_score).margin(1e-9));

  // same-class pairs should outscore diff-class pairs under the fused model
  for (std::size_t i = 0; i < 4; ++i) {
    const double s = pair_features(same[i].first, same[i].second, model).fused;
    const double d = pair_features(diff[i].first, diff[i].second, model).fused;
    REQUIRE(s > d);
  }
}

TEST_CASE("train: swapped class labels flip the fused score sign", "[pairscore]") {
  const int T = 16;
  std::vector<std::pair<WpeFilter, WpeFilter>> same, diff;
  for (std::size_t i = 0; i < 3; ++i) {
    same.push_back(controlled_pair(testutil::random_filter(4, 9, 90 + i), 1.0 + 0.05 * i, (i == 2) ? 15 : static_cast<int>(i), T));
    diff.push_back(controlled_pair(testutil::random_filter(4, 9, 95 + i), 2.0 + 0.5 * i, 4 + 2 * static_cast<int>(i), T));
  }
  const ScoreModel fwd = train_model(same, diff, T);
  // identical sigma/kappa inputs make the LDA stage the only asymmetry, so the
  // cleanest check is at the feature level via fit_lda (done in the lda test);
  // here the end-to-end ordering must hold
  const double same_score = pair_features(same[0].first, same[0].second, fwd).fused;
  const double diff_score = pair_features(diff[0].first, diff[0].second, fwd).fused;
  REQUIRE(same_score > diff_score);
}

TEST_CASE("train rejects undersized classes", "[pairscore]") {
  const WpeFilter a = testutil::random_filter(4, 9, 99);
  REQUIRE_THROWS_AS(train_model({{a, a}}, {{a, a}, {a, a}}, 16), std::runtime_error);
}

TEST_CASE("score model json round trip", "[pairscore]") {
  ScoreModel m = toy_model(0.123, 4.56, 78.9, 256);
  m.lda_w = {0.11, -0.22};
  m.lda_b = 0.33;
  m.min_train_score = -1.5;
  m.wpe.taps = 12;
  m.wpe.delay = 2;
  m.wpe.iterations = 5;
  m.wpe.power_floor = 1e-7;

  const auto dir = std::filesystem::temp_directory_path() / "wpeloc_pairscore_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.json").string();
  save_score_model(path, m);
  const ScoreModel back = load_score_model(path);

  REQUIRE(back.sigma2_same == Approx(m.sigma2_same));
  REQUIRE(back.sigma2_diff == Approx(m.sigma2_diff));
  REQUIRE(back.kappa_same == Approx(m.kappa_same));
  REQUIRE(back.lda_w[0] == Approx(m.lda_w[0]));
  REQUIRE(back.lda_w[1] == Approx(m.lda_w[1]));
  REQUIRE(back.lda_b == Approx(m.lda_b));
  REQUIRE(back.delay_bins == m.delay_bins);
  REQUIRE(back.min_train_score == Approx(m.min_train_score));
  REQUIRE(back.wpe.taps == 12);
  REQUIRE(back.wpe.power_floor == Approx(1e-7));

  auto j = score_model_to_json(m);
  j["schema_version"] = 999;
  REQUIRE_THROWS_AS(score_model_from_json(j), std::runtime_error);
  REQUIRE_THROWS_AS(load_score_model((dir / "missing.json").string()), std::runtime_error);
}
