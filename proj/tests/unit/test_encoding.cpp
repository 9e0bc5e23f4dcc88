#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "layerscope/encoding.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/stats.hpp"
#include "layerscope/synth.hpp"
#include "test_util.hpp"

namespace layerscope {
namespace {

using testing::error_of;

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(r, c);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TEST(Ridge, MatchesNormalEquations) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Matrix x = gaussian(80, 12, seed);
    const Matrix y = gaussian(80, 3, seed + 10);
    const double alpha = 0.3 + 5.0 * static_cast<double>(seed);
    const Matrix direct = (x.transpose() * x + alpha * Matrix::Identity(12, 12)).ldlt().solve(x.transpose() * y);
    EXPECT_LT((ridge_solve(x, y, alpha) - direct).cwiseAbs().maxCoeff(), 1e-8);
  }
  // Wide design (D' > T) goes through the same thin factorization.
  const Matrix xw = gaussian(20, 50, 3);
  const Matrix yw = gaussian(20, 2, 4);
  const Matrix direct = (xw.transpose() * xw + 2.0 * Matrix::Identity(50, 50)).ldlt().solve(xw.transpose() * yw);
  EXPECT_LT((ridge_solve(xw, yw, 2.0) - direct).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ridge, NoiselessAndPenaltyLimits) {
  const Matrix x = gaussian(200, 10, 1);
  const Matrix w0 = gaussian(10, 4, 2);
  const Matrix y = x * w0;
  const double lambda1 = RidgeSvd(x).singular_values().maxCoeff();
  const Matrix w = ridge_solve(x, y, 1e-10 * lambda1 * lambda1);
  EXPECT_LT((w - w0).norm() / w0.norm(), 1e-6);
  EXPECT_LT(ridge_solve(x, y, 1e14).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ridge, ContinuousInAlpha) {
  const Matrix x = gaussian(60, 8, 5);
  const Matrix y = gaussian(60, 2, 6);
  for (double alpha : {1e-3, 1.0, 1e3}) {
    EXPECT_LT((ridge_solve(x, y, alpha) - ridge_solve(x, y, alpha * (1.0 + 1e-9))).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Ridge, ProjectRotatePredictAgreesWithWeights) {
  const Matrix x = gaussian(70, 9, 7);
  const Matrix y = gaussian(70, 3, 8);
  const Matrix x_new = gaussian(15, 9, 9);
  const RidgeSvd svd(x);
  for (double alpha : {0.1, 10.0}) {
    const Matrix a = svd.predict(svd.project(x_new), svd.rotate(y), alpha);
    EXPECT_LT((a - x_new * svd.weights(y, alpha)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Ridge, Errors) {
  const Matrix x = gaussian(10, 2, 1);
  Matrix y = gaussian(10, 1, 2);
  EXPECT_EQ(error_of([&] { ridge_solve(x, y, 0.0); }), "encoding:invalid-argument");
  y(3, 0) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(error_of([&] { ridge_solve(x, y, 1.0); }), "encoding:non-finite");
  EXPECT_EQ(error_of([&] { ridge_cv(x.topRows(3), y.topRows(3), default_alpha_grid(), 5); }), "encoding:too-few-rows");
  EXPECT_EQ(error_of([&] { ridge_cv(x, gaussian(10, 1, 2), std::vector<double>{}, 5); }), "encoding:invalid-argument");
}

TEST(AlphaGrid, TenLogSpacedValues) {
  const auto grid = default_alpha_grid();
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_NEAR(grid.front(), 10.0, 1e-9);
  EXPECT_NEAR(grid.back(), 1e6, 1e-3);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(std::log10(grid[i] / grid[i - 1]), 5.0 / 9.0, 1e-12);
}

TEST(RidgeCv, NoiselessPicksSmallestAlpha) {
  const Matrix x = gaussian(500, 10, 1);
  const Matrix y = x * gaussian(10, 5, 2);
  const std::vector<double> alphas = {1e-6, 1e-2, 1.0, 100.0};
  const RidgeFit fit = ridge_cv(x, y, alphas);
  for (double a : fit.alpha_per_channel) EXPECT_EQ(a, 1e-6);
  for (double r : column_correlations(x * fit.weights, y)) EXPECT_GT(r, 1.0 - 1e-9);
  EXPECT_EQ(fit.cv.kind, "contiguous-chunks");
  EXPECT_EQ(fit.cv.n_chunks, 5u);
}

TEST(RidgeCv, NullHeldOutCorrelationIsSmall) {
  const Matrix x = gaussian(2500, 10, 3);
  const Matrix y = gaussian(2500, 40, 4);
  const Split split = Split::tail(2500, 0.2);
  const RidgeFit fit = ridge_cv(take_rows(x, split.train), take_rows(y, split.train), default_alpha_grid());
  const auto r = column_correlations(take_rows(x, split.test) * fit.weights, take_rows(y, split.test));
  const auto small = std::count_if(r.begin(), r.end(), [](double v) { return std::abs(v) < 0.1; });
  EXPECT_GE(static_cast<double>(small), 0.95 * 40);
}

TEST(RidgeCv, NoisierChannelsPreferLargerAlphas) {
  const Matrix x = gaussian(400, 30, 5);
  const Matrix w = gaussian(30, 32, 6);
  const Matrix noise = gaussian(400, 32, 7);
  Matrix y = x * w;
  std::vector<double> noise_sd(32);
  for (Index c = 0; c < 32; ++c) {
    noise_sd[static_cast<std::size_t>(c)] = 0.5 * std::pow(1.25, static_cast<double>(c));
    y.col(c) += noise_sd[static_cast<std::size_t>(c)] * noise.col(c);
  }
  std::vector<double> alphas;
  for (int i = 0; i < 25; ++i) alphas.push_back(std::pow(10.0, -1.0 + 0.25 * i));
  const RidgeFit fit = ridge_cv(x, y, alphas);
  EXPECT_GT(spearman(noise_sd, fit.alpha_per_channel), 0.0);
}

TEST(RidgeCv, ChannelsDecouple) {
  const Matrix x = gaussian(300, 6, 1);
  const Matrix y = x * gaussian(6, 4, 2) + gaussian(300, 4, 3);
  const auto alphas = default_alpha_grid();
  const RidgeFit joint = ridge_cv(x, y, alphas);
  for (Index c = 0; c < 4; ++c) {
    const RidgeFit single = ridge_cv(x, y.col(c), alphas);
    EXPECT_EQ(single.alpha_per_channel[0], joint.alpha_per_channel[static_cast<std::size_t>(c)]);
    EXPECT_LT((single.weights.col(0) - joint.weights.col(c)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RidgeCv, IndependentOfThreadCount) {
  const Matrix x = gaussian(400, 12, 1);
  const Matrix y = gaussian(400, 6, 2);
  set_max_threads(1);
  const RidgeFit a = ridge_cv(x, y, default_alpha_grid());
  set_max_threads(4);
  const RidgeFit b = ridge_cv(x, y, default_alpha_grid());
  reset_max_threads();
  EXPECT_EQ(a.cv_scores, b.cv_scores);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Correlation, AffineInvariantAndZeroVariance) {
  const Matrix a = gaussian(50, 3, 1);
  const Matrix b = gaussian(50, 3, 2);
  const auto r = column_correlations(a, b);
  const auto r2 = column_correlations(Matrix((a.array() * 3.5 + 2.0).matrix()), b);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(r[c], r2[c], 1e-12);
    EXPECT_LE(std::abs(r[c]), 1.0);
  }
  EXPECT_EQ(column_correlations(Matrix::Ones(50, 1), b.col(0))[0], 0.0);
}

TEST(Standardizer, UsesTrainingStatistics) {
  const Matrix x = gaussian(100, 3, 1) * 4.0 + Matrix::Constant(100, 3, 7.0);
  const Standardizer s = Standardizer::fit(x);
  const Matrix z = s.apply(x);
  EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  for (Index c = 0; c < 3; ++c) EXPECT_NEAR((z.col(c).array().square().sum()) / 99.0, 1.0, 1e-12);
  const Standardizer flat = Standardizer::fit(Matrix::Constant(10, 1, 2.0));
  EXPECT_EQ(flat.scale(0), 1.0);
}

TEST(Split, TailBlock) {
  const Split s = Split::tail(100, 0.2, 4);
  ASSERT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.test.front(), 80);
  EXPECT_EQ(s.train.front(), 4);
  EXPECT_EQ(s.train.back(), 79);
  EXPECT_EQ(s.train.size(), 76u);
  EXPECT_EQ(error_of([] { Split::tail(3, 0.1); }), "encoding:empty-test");
}

TEST(Fmri, DesignWidth) {
  IrregularFeatureSeries f({0.5, 1.0, 3.0}, gaussian(3, 512, 1));
  const std::vector<std::size_t> delays = {1, 2, 3, 4};
  EXPECT_EQ(fmri_design(f, 2.0, 10, delays).cols(), 2048);
}

TEST(Fmri, NoiselessCaseIsNearlyPerfect) {
  const std::vector<double> snr = {std::numeric_limits<double>::infinity()};
  const EncodingCase c = encoding_case(1200, 8, 6, snr, 3);
  const EncodingResult r = encode_fmri(c.features, c.response);
  for (double v : r.r) EXPECT_GT(v, 0.99);
  EXPECT_EQ(c.ceiling, std::vector<double>(6, 1.0));
}

TEST(Fmri, RecoversNoiseCeiling) {
  const std::vector<double> snr = {1.0};
  const EncodingCase c = encoding_case(2000, 8, 16, snr, 4);
  const EncodingResult r = encode_fmri(c.features, c.response);
  EXPECT_NEAR(median(r.r), std::sqrt(0.5), 0.06);
  EXPECT_EQ(r.n_test, 400u);
  EXPECT_EQ(r.n_train, 1596u);
}

TEST(Fmri, CircularShiftGivesNullScores) {
  const std::vector<double> snr = {4.0};
  const EncodingCase c = encoding_case(2000, 8, 16, snr, 5);
  const Matrix& y = c.response.values();
  const Index shift = 700;
  Matrix shifted(y.rows(), y.cols());
  for (Index t = 0; t < y.rows(); ++t) shifted.row((t + shift) % y.rows()) = y.row(t);
  const ResponseSeries null(shifted, c.response.sampling(), c.response.channel_ids());
  const EncodingResult r = encode_fmri(c.features, null);
  EXPECT_NEAR(median(r.r), 0.0, 0.05);
}

// Bumps placed 0.5 s after each onset, scaled by feature 0.
ResponseSeries delayed_response(const IrregularFeatureSeries& f, double rate, Index n_times, double delay) {
  Matrix y = Matrix::Zero(n_times, 1);
  const double width = 0.03;
  for (Index e = 0; e < f.n_events(); ++e) {
    const double centre = f.times[static_cast<std::size_t>(e)] + delay;
    const Index lo = std::max<Index>(0, static_cast<Index>((centre - 5 * width) * rate));
    const Index hi = std::min<Index>(n_times - 1, static_cast<Index>((centre + 5 * width) * rate) + 1);
    for (Index t = lo; t <= hi; ++t) {
      const double dt = static_cast<double>(t) / rate - centre;
      y(t, 0) += f.features(e, 0) * std::exp(-dt * dt / (2 * width * width));
    }
  }
  return ResponseSeries(y, Sampling::from_rate(rate));
}

IrregularFeatureSeries word_events(Index n, std::uint64_t seed, double start = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(0.3, 0.5);
  std::vector<double> times;
  double t = start;
  for (Index i = 0; i < n; ++i) {
    times.push_back(t);
    t += gap(rng);
  }
  return {times, gaussian(n, 6, seed + 1)};
}

TEST(Ecog, LagGrid) {
  const auto lags = lag_grid(128, -2.0, 2.0);
  ASSERT_EQ(lags.size(), 128u);
  EXPECT_EQ(lags.front(), -2.0);
  EXPECT_EQ(lags.back(), 2.0);
  EXPECT_NEAR(lags[1] - lags[0], 4.0 / 127.0, 1e-15);
  EXPECT_EQ(error_of([] { lag_grid(1, -2.0, 2.0); }), "encoding:invalid-argument");
}

TEST(Ecog, RecoversHalfSecondLag) {
  const double rate = 100.0;
  const IrregularFeatureSeries f = word_events(1500, 7);
  const auto n_times = static_cast<Index>((f.times.back() + 3.0) * rate);
  const EncodingResult r = encode_ecog(f, delayed_response(f, rate, n_times, 0.5));
  ASSERT_TRUE(r.best_lag.has_value());
  EXPECT_NEAR((*r.best_lag)[0], 0.5, 4.0 / 127.0);
  EXPECT_GT(r.r[0], 0.9);
  ASSERT_TRUE(r.per_lag_r.has_value());
  EXPECT_EQ(r.per_lag_r->cols(), 128);
  EXPECT_EQ(r.lags.size(), 128u);
}

TEST(Ecog, NullResponseStaysSmall) {
  const double rate = 100.0;
  const IrregularFeatureSeries f = word_events(2000, 8);
  const auto n_times = static_cast<Index>((f.times.back() + 3.0) * rate);
  const ResponseSeries noise(gaussian(n_times, 2, 9), Sampling::from_rate(rate));
  const EncodingResult r = encode_ecog(f, noise);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_LT(r.r[c], 0.15);
    const double lag0 = (*r.per_lag_r)(static_cast<Index>(c), 64);
    EXPECT_GE(r.r[c], lag0);
  }
}

TEST(Ecog, RejectsLagsOutsideRecording) {
  const IrregularFeatureSeries f({1.0, 1.1}, gaussian(2, 3, 1));
  const ResponseSeries y(gaussian(200, 1, 2), Sampling::from_rate(100.0));
  EcogOptions opt;
  opt.lag_lo = 5.0;
  opt.lag_hi = 6.0;
  EXPECT_EQ(error_of([&] { encode_ecog(f, y, opt); }), "encoding:lag-out-of-range");
  opt.lag_lo = -0.5;
  opt.lag_hi = 0.5;
  EXPECT_EQ(error_of([&] { encode_ecog(f, y, opt); }), "encoding:too-few-events");
}

}  // namespace
}  // namespace layerscope
