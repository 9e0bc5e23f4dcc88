#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "layerscope/probes.hpp"
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

// Gaussian blobs around class centres placed `gap` apart along random directions.
ProbeData blobs(Index n, Index d, std::size_t classes, double gap, std::uint64_t seed) {
  const Matrix centres = gap * gaussian(static_cast<Index>(classes), d, 999);
  ProbeData out{gaussian(n, d, seed), {}};
  std::mt19937_64 rng(seed + 1);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  for (Index i = 0; i < n; ++i) {
    const std::size_t y = pick(rng);
    out.labels.push_back(y);
    out.x.row(i) += centres.row(static_cast<Index>(y));
  }
  return out;
}

TEST(Classifier, SeparableBlobs) {
  const ProbeData tr = blobs(2000, 10, 2, 6.0, 1), va = blobs(300, 10, 2, 6.0, 2), te = blobs(500, 10, 2, 6.0, 3);
  const ProbeResult r = train_classifier_probe(tr, va, te);
  EXPECT_GT(r.value, 0.99);
  EXPECT_EQ(r.metric, "accuracy");
  EXPECT_EQ(r.n_train, 2000u);
  EXPECT_EQ(r.n_val, 300u);
  EXPECT_EQ(r.n_test, 500u);
  EXPECT_GE(r.best_epoch, 1u);
  EXPECT_LE(r.best_epoch, 15u);
}

TEST(Classifier, ShuffledLabelsAreAtChance) {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    ProbeData tr = blobs(600, 8, 4, 3.0, 10 * s + 1), va = blobs(200, 8, 4, 3.0, 10 * s + 2),
              te = blobs(1000, 8, 4, 3.0, 10 * s + 3);
    std::mt19937_64 rng(s);
    for (ProbeData* p : {&tr, &va, &te}) std::shuffle(p->labels.begin(), p->labels.end(), rng);
    ClassifierOptions opt;
    opt.seed = s;
    opt.classes = 4;
    const double acc = train_classifier_probe(tr, va, te, opt).value;
    EXPECT_NEAR(acc, 0.25, 0.05);
    total += acc;
  }
  EXPECT_NEAR(total / 20.0, 0.25, 0.02);
}

TEST(Classifier, InvariantToWhitening) {
  // Correlated inputs, then the whitening transform estimated on the training split.
  const Matrix mix = gaussian(6, 6, 7) + 2.0 * Matrix::Identity(6, 6);
  const Eigen::RowVectorXd shift = 5.0 * gaussian(1, 6, 8);
  auto correlate = [&](ProbeData p) {
    p.x = (p.x * mix).rowwise() + shift;
    return p;
  };
  const ProbeData tr = correlate(blobs(6000, 6, 3, 1.2, 4)), va = correlate(blobs(1000, 6, 3, 1.2, 5)),
                  te = correlate(blobs(3000, 6, 3, 1.2, 6));
  const Eigen::RowVectorXd mean = tr.x.colwise().mean();
  const Matrix centered = tr.x.rowwise() - mean;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered / 5999.0);
  const Matrix w = eig.operatorInverseSqrt();
  auto whiten = [&](const ProbeData& p) { return ProbeData{Matrix((p.x.rowwise() - mean) * w), p.labels}; };
  const double base = train_classifier_probe(tr, va, te).value;
  const double white = train_classifier_probe(whiten(tr), whiten(va), whiten(te)).value;
  EXPECT_NEAR(base, white, 0.02);
}

TEST(Classifier, Errors) {
  ProbeData tr = blobs(50, 3, 2, 3.0, 1);
  const ProbeData va = blobs(20, 3, 2, 3.0, 2);
  ClassifierOptions opt;
  opt.classes = 1;
  EXPECT_EQ(error_of([&] { train_classifier_probe(tr, va, va, opt); }), "probes:label-out-of-range");
  std::fill(tr.labels.begin(), tr.labels.end(), 0);
  ProbeData va0 = va;
  std::fill(va0.labels.begin(), va0.labels.end(), 0);
  EXPECT_EQ(error_of([&] { train_classifier_probe(tr, va0, va0); }), "probes:single-class");
}

TEST(Accuracy, Counts) {
  Matrix scores(3, 2);
  scores << 1, 0, 0, 1, 2, 3;
  EXPECT_NEAR(accuracy(scores, std::vector<std::size_t>{0, 1, 0}), 2.0 / 3.0, 1e-15);
}

TEST(RSquared, MatchesDefinition) {
  const Matrix y = gaussian(40, 3, 1);
  const Matrix p = y + 0.3 * gaussian(40, 3, 2);
  double oracle = 0.0;
  for (Index c = 0; c < 3; ++c) {
    const double mean = y.col(c).mean();
    double sse = 0.0, sst = 0.0;
    for (Index i = 0; i < 40; ++i) {
      sse += (y(i, c) - p(i, c)) * (y(i, c) - p(i, c));
      sst += (y(i, c) - mean) * (y(i, c) - mean);
    }
    oracle += (1.0 - sse / sst) / 3.0;
  }
  EXPECT_NEAR(r_squared(y, p), oracle, 1e-14);
  EXPECT_EQ(r_squared(y, y), 1.0);
}

TEST(RegressionProbe, RealizableAndNull) {
  const Matrix x = gaussian(1000, 12, 1);
  const Matrix w = gaussian(12, 4, 2);
  const Matrix y = x * w;
  const auto alphas = default_alpha_grid();
  const ProbeResult real = train_regression_probe(x.topRows(800), y.topRows(800), x.bottomRows(200),
                                                  y.bottomRows(200), std::vector<double>{1e-6, 1e-3, 1.0});
  EXPECT_GT(real.value, 0.99);
  EXPECT_EQ(real.metric, "r_squared");
  EXPECT_TRUE(std::isnan(real.val_value));

  const Matrix noise = gaussian(1000, 4, 3);
  const ProbeResult null = train_regression_probe(x.topRows(800), noise.topRows(800), x.bottomRows(200),
                                                  noise.bottomRows(200), alphas);
  EXPECT_LE(null.value, 0.05);
}

}  // namespace
}  // namespace layerscope
