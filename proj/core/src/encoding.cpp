#include "layerscope/encoding.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"

namespace layerscope {

namespace {

[[noreturn]] void enc_error(const std::string& code, const std::string& message) {
  throw Error("encoding", code, message);
}

void check_alphas(std::span<const double> alphas) {
  if (alphas.empty()) enc_error("invalid-argument", "alpha grid is empty");
  for (double a : alphas)
    if (!(a > 0.0) || !std::isfinite(a)) enc_error("invalid-argument", "alphas must be positive and finite");
}

Vector shrinkage(const Vector& s, double alpha) { return s.array() / (s.array().square() + alpha); }

}  // namespace

RidgeSvd::RidgeSvd(const Matrix& x) {
  if (!x.allFinite()) enc_error("non-finite", "design matrix contains non-finite values");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  s_ = svd.singularValues();
  v_ = svd.matrixV();
}

Matrix RidgeSvd::weights(const Matrix& y, double alpha) const {
  if (!(alpha > 0.0)) enc_error("invalid-argument", "alpha must be positive");
  if (!y.allFinite()) enc_error("non-finite", "targets contain non-finite values");
  return v_ * (shrinkage(s_, alpha).asDiagonal() * (u_.transpose() * y));
}

Matrix RidgeSvd::weights(const Matrix& y, std::span<const double> alphas) const {
  if (static_cast<Index>(alphas.size()) != y.cols()) enc_error("invalid-argument", "one alpha per target column");
  if (!y.allFinite()) enc_error("non-finite", "targets contain non-finite values");
  const Matrix rotated = u_.transpose() * y;
  Matrix w(v_.rows(), y.cols());
  std::vector<double> distinct(alphas.begin(), alphas.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (double a : distinct) {
    if (!(a > 0.0)) enc_error("invalid-argument", "alpha must be positive");
    const Vector shrink = shrinkage(s_, a);
    for (Index c = 0; c < y.cols(); ++c)
      if (alphas[static_cast<std::size_t>(c)] == a) w.col(c) = v_ * (shrink.asDiagonal() * rotated.col(c));
  }
  return w;
}

Matrix RidgeSvd::predict(const Matrix& projected, const Matrix& rotated, double alpha) const {
  return projected * (shrinkage(s_, alpha).asDiagonal() * rotated);
}

Matrix ridge_solve(const Matrix& x, const Matrix& y, double alpha) {
  if (x.rows() != y.rows()) enc_error("invalid-shape", "X and Y row counts differ");
  return RidgeSvd(x).weights(y, alpha);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(10);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = std::pow(10.0, 1.0 + 5.0 * static_cast<double>(i) / 9.0);
  return grid;
}

std::vector<double> column_correlations(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) enc_error("invalid-shape", "correlation inputs differ in shape");
  std::vector<double> r(static_cast<std::size_t>(a.cols()), 0.0);
  for (Index c = 0; c < a.cols(); ++c) {
    const Vector x = a.col(c).array() - a.col(c).mean();
    const Vector y = b.col(c).array() - b.col(c).mean();
    const double den = x.norm() * y.norm();
    if (den > 0.0) r[static_cast<std::size_t>(c)] = std::clamp(x.dot(y) / den, -1.0, 1.0);
  }
  return r;
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale.resize(x.cols());
  const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  for (Index c = 0; c < x.cols(); ++c) {
    const double sd = std::sqrt((x.col(c).array() - s.mean(c)).square().sum() / denom);
    s.scale(c) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Split Split::tail(Index n, double test_frac, Index skip_head) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) enc_error("invalid-argument", "test fraction must lie in (0, 1)");
  const auto n_test = static_cast<Index>(std::llround(test_frac * static_cast<double>(n)));
  if (n_test < 1) enc_error("empty-test", "test set is empty");
  Split split;
  for (Index i = skip_head; i < n - n_test; ++i) split.train.push_back(i);
  for (Index i = n - n_test; i < n; ++i) split.test.push_back(i);
  if (split.train.empty()) enc_error("empty-train", "training set is empty");
  return split;
}

Matrix take_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

RidgeFit ridge_cv(const Matrix& x, const Matrix& y, std::span<const double> alphas, std::size_t n_chunks) {
  check_alphas(alphas);
  if (x.rows() != y.rows()) enc_error("invalid-shape", "X and Y row counts differ");
  if (n_chunks < 2) enc_error("invalid-argument", "need at least 2 CV chunks");
  const Index t = x.rows();
  if (t < static_cast<Index>(n_chunks)) enc_error("too-few-rows", "fewer rows than CV chunks");
  if (!x.allFinite() || !y.allFinite()) enc_error("non-finite", "non-finite inputs to ridge_cv");

  const auto n_alpha = static_cast<Index>(alphas.size());
  const Index channels = y.cols();
  std::vector<Matrix> fold_scores(n_chunks, Matrix::Zero(n_alpha, channels));

  parallel_for(n_chunks, [&](std::size_t f) {
    const Index begin = static_cast<Index>(f) * t / static_cast<Index>(n_chunks);
    const Index end = static_cast<Index>(f + 1) * t / static_cast<Index>(n_chunks);
    Matrix x_train(t - (end - begin), x.cols());
    Matrix y_train(t - (end - begin), channels);
    x_train.topRows(begin) = x.topRows(begin);
    x_train.bottomRows(t - end) = x.bottomRows(t - end);
    y_train.topRows(begin) = y.topRows(begin);
    y_train.bottomRows(t - end) = y.bottomRows(t - end);

    const RidgeSvd svd(x_train);
    const Matrix projected = svd.project(x.middleRows(begin, end - begin));
    const Matrix rotated = svd.rotate(y_train);
    const Matrix held_out = y.middleRows(begin, end - begin);
    for (Index a = 0; a < n_alpha; ++a) {
      const auto r = column_correlations(svd.predict(projected, rotated, alphas[static_cast<std::size_t>(a)]), held_out);
      for (Index c = 0; c < channels; ++c) fold_scores[f](a, c) = r[static_cast<std::size_t>(c)];
    }
  });

  RidgeFit fit;
  fit.cv.n_chunks = n_chunks;
  fit.cv_scores = Matrix::Zero(n_alpha, channels);
  for (const Matrix& s : fold_scores) fit.cv_scores += s;
  fit.cv_scores /= static_cast<double>(n_chunks);

  fit.alpha_per_channel.resize(static_cast<std::size_t>(channels));
  for (Index c = 0; c < channels; ++c) {
    Index best = 0;
    for (Index a = 1; a < n_alpha; ++a)
      if (fit.cv_scores(a, c) > fit.cv_scores(best, c)) best = a;
    fit.alpha_per_channel[static_cast<std::size_t>(c)] = alphas[static_cast<std::size_t>(best)];
  }
  fit.weights = RidgeSvd(x).weights(y, fit.alpha_per_channel);
  return fit;
}

Matrix fmri_design(const IrregularFeatureSeries& features, double period, std::size_t n_times,
                   std::span<const std::size_t> delays, const LanczosOptions& lanczos) {
  return fir_delays(lanczos_downsample(features, period, n_times, lanczos), delays);
}

EncodingResult encode_fmri(const IrregularFeatureSeries& features, const ResponseSeries& response,
                           const FmriOptions& options) {
  if (options.delays.empty()) enc_error("invalid-argument", "delay list is empty");
  const Index t = response.n_times();
  const double period = response.sampling().period();
  const Matrix design = fmri_design(features, period, static_cast<std::size_t>(t), options.delays, options.lanczos);

  const auto skip = static_cast<Index>(*std::max_element(options.delays.begin(), options.delays.end()));
  const Split split = Split::tail(t, options.test_frac, skip);

  const Matrix x_train = take_rows(design, split.train);
  const Matrix y_train = take_rows(response.values(), split.train);
  const Standardizer xs = Standardizer::fit(x_train);
  const Standardizer ys = Standardizer::fit(y_train);

  const RidgeFit fit = ridge_cv(xs.apply(x_train), ys.apply(y_train), options.alphas, options.n_chunks);
  const Matrix pred = xs.apply(take_rows(design, split.test)) * fit.weights;

  EncodingResult result;
  result.channel_ids = response.channel_ids();
  result.r = column_correlations(pred, ys.apply(take_rows(response.values(), split.test)));
  result.alpha = fit.alpha_per_channel;
  result.n_train = split.train.size();
  result.n_test = split.test.size();
  return result;
}

std::vector<double> lag_grid(std::size_t n_lags, double lo, double hi) {
  if (n_lags < 2) enc_error("invalid-argument", "need at least 2 lags");
  if (!(lo < hi)) enc_error("invalid-argument", "lag range must satisfy lo < hi");
  std::vector<double> lags(n_lags);
  for (std::size_t i = 0; i < n_lags; ++i)
    lags[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_lags - 1);
  return lags;
}

EncodingResult encode_ecog(const IrregularFeatureSeries& features, const ResponseSeries& response,
                           const EcogOptions& options) {
  const std::vector<double> lags = lag_grid(options.n_lags, options.lag_lo, options.lag_hi);
  const double rate = response.sampling().rate();
  const Index t = response.n_times();
  const double last_pos = static_cast<double>(t - 1);
  auto position = [&](double onset, double lag) { return (onset + lag) * rate; };
  auto inside = [&](double pos) { return pos >= 0.0 && pos <= last_pos; };

  for (double lag : lags) {
    const bool any = std::any_of(features.times.begin(), features.times.end(),
                                 [&](double onset) { return inside(position(onset, lag)); });
    if (!any) enc_error("lag-out-of-range", "lag " + std::to_string(lag) + " s pushes every event outside the recording");
  }

  std::vector<Index> events;
  for (Index e = 0; e < features.n_events(); ++e) {
    const double onset = features.times[static_cast<std::size_t>(e)];
    if (inside(position(onset, lags.front())) && inside(position(onset, lags.back()))) events.push_back(e);
  }
  if (events.size() < 2 * options.n_chunks)
    enc_error("too-few-events", "only " + std::to_string(events.size()) + " events fall inside the recording at every lag");

  const Index n = static_cast<Index>(events.size());
  const Index channels = response.n_channels();
  const auto n_lags = static_cast<Index>(lags.size());
  const Matrix x = take_rows(features.features, events);
  Matrix y(n, n_lags * channels);
  for (Index l = 0; l < n_lags; ++l) {
    for (Index r = 0; r < n; ++r) {
      const double pos = position(features.times[static_cast<std::size_t>(events[static_cast<std::size_t>(r)])],
                                  lags[static_cast<std::size_t>(l)]);
      const auto i0 = static_cast<Index>(std::floor(pos));
      const double frac = pos - static_cast<double>(i0);
      for (Index c = 0; c < channels; ++c) {
        const double v0 = response.values()(i0, c);
        const double v1 = i0 + 1 < t ? response.values()(i0 + 1, c) : v0;
        y(r, l * channels + c) = v0 + frac * (v1 - v0);
      }
    }
  }

  const Split split = Split::tail(n, options.test_frac);
  const Matrix x_train = take_rows(x, split.train);
  const Matrix y_train = take_rows(y, split.train);
  const Standardizer xs = Standardizer::fit(x_train);
  const Standardizer ys = Standardizer::fit(y_train);
  const RidgeFit fit = ridge_cv(xs.apply(x_train), ys.apply(y_train), options.alphas, options.n_chunks);
  const auto r_all = column_correlations(xs.apply(take_rows(x, split.test)) * fit.weights,
                                         ys.apply(take_rows(y, split.test)));

  EncodingResult result;
  result.channel_ids = response.channel_ids();
  result.lags = lags;
  result.n_train = split.train.size();
  result.n_test = split.test.size();
  Matrix per_lag(channels, n_lags);
  std::vector<double> best_lag(static_cast<std::size_t>(channels));
  result.r.resize(static_cast<std::size_t>(channels));
  result.alpha.resize(static_cast<std::size_t>(channels));
  for (Index c = 0; c < channels; ++c) {
    Index best = 0;
    for (Index l = 0; l < n_lags; ++l) {
      per_lag(c, l) = r_all[static_cast<std::size_t>(l * channels + c)];
      if (per_lag(c, l) > per_lag(c, best)) best = l;
    }
    result.r[static_cast<std::size_t>(c)] = per_lag(c, best);
    best_lag[static_cast<std::size_t>(c)] = lags[static_cast<std::size_t>(best)];
    result.alpha[static_cast<std::size_t>(c)] = fit.alpha_per_channel[static_cast<std::size_t>(best * channels + c)];
  }
  result.per_lag_r = std::move(per_lag);
  result.best_lag = std::move(best_lag);
  return result;
}

}  // namespace layerscope
