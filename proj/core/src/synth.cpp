#include "layerscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/QR>

#include "layerscope/encoding.hpp"
#include "layerscope/error.hpp"

namespace layerscope {

namespace {

[[noreturn]] void synth_error(const std::string& code, const std::string& message) {
  throw Error("synth", code, message);
}

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

void add_noise(Matrix& x, double sd, Rng& rng) {
  if (sd == 0.0) return;
  x += sd * gaussian(x.rows(), x.cols(), rng);
}

Manifest synthetic_meta(const std::string& model, int layer = 0) {
  Manifest m;
  m.modality = Modality::synthetic;
  m.model = model;
  m.layer = layer;
  return m;
}

Matrix zscore_columns(const Matrix& x) { return Standardizer::fit(x).apply(x); }

Timeline word_timeline(const std::vector<double>& onsets) {
  std::vector<Event> events;
  events.reserve(onsets.size());
  for (std::size_t i = 0; i < onsets.size(); ++i) events.push_back({"w" + std::to_string(i), onsets[i], onsets[i]});
  return Timeline(std::move(events));
}

}  // namespace

Matrix random_orthonormal(Index rows, Index cols, Rng& rng) {
  if (cols < 1 || rows < cols) synth_error("invalid-argument", "need rows >= cols >= 1");
  const Eigen::HouseholderQR<Matrix> qr(gaussian(rows, cols, rng));
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Sign convention from R's diagonal makes the draw Haar distributed.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

ActivationMatrix hypercube(std::size_t n, std::size_t d, std::size_t ambient, double noise_sd, std::uint64_t seed) {
  if (d < 1 || d > ambient) synth_error("invalid-argument", "need 1 <= d <= D");
  if (n < 2) synth_error("invalid-argument", "need at least 2 points");
  if (!(noise_sd >= 0.0)) synth_error("invalid-argument", "noise_sd must be >= 0");
  Rng rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix cube(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < cube.rows(); ++i)
    for (Index j = 0; j < cube.cols(); ++j) cube(i, j) = unit(rng);
  Rng embed_rng(derive_seed(seed, 1));
  Matrix x = cube * random_orthonormal(static_cast<Index>(ambient), static_cast<Index>(d), embed_rng).transpose();
  Rng noise_rng(derive_seed(seed, 2));
  add_noise(x, noise_sd, noise_rng);
  Manifest meta = synthetic_meta("hypercube");
  meta.extra["intrinsic_dim"] = std::to_string(d);
  return ActivationMatrix(std::move(x), std::move(meta));
}

ActivationMatrix swiss_roll(std::size_t n, std::size_t ambient, std::uint64_t seed, double noise_sd) {
  if (ambient < 3) synth_error("invalid-argument", "swiss roll needs D >= 3");
  if (n < 2) synth_error("invalid-argument", "need at least 2 points");
  Rng rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> angle(1.5 * std::numbers::pi, 4.5 * std::numbers::pi);
  std::uniform_real_distribution<double> height(0.0, 21.0);
  Matrix roll(static_cast<Index>(n), 3);
  for (Index i = 0; i < roll.rows(); ++i) {
    const double t = angle(rng);
    roll(i, 0) = t * std::cos(t);
    roll(i, 1) = height(rng);
    roll(i, 2) = t * std::sin(t);
  }
  Rng embed_rng(derive_seed(seed, 1));
  Matrix x = roll * random_orthonormal(static_cast<Index>(ambient), 3, embed_rng).transpose();
  Rng noise_rng(derive_seed(seed, 2));
  add_noise(x, noise_sd, noise_rng);
  Manifest meta = synthetic_meta("swiss-roll");
  meta.extra["intrinsic_dim"] = "2";
  return ActivationMatrix(std::move(x), std::move(meta));
}

double noise_ceiling(double snr) {
  if (!(snr >= 0.0)) synth_error("invalid-argument", "snr must be >= 0");
  if (std::isinf(snr)) return 1.0;
  return std::sqrt(snr / (1.0 + snr));
}

EncodingCase encoding_case(std::size_t n_times, std::size_t n_features, std::size_t n_channels,
                           std::span<const double> snr, std::uint64_t seed, const EncodingCaseOptions& options) {
  if (n_times < 2 || n_features < 1 || n_channels < 1) synth_error("invalid-argument", "sizes must be positive");
  if (snr.size() != n_channels && snr.size() != 1) synth_error("invalid-argument", "give one SNR, or one per channel");
  if (!(options.period > 0.0) || !(options.words_per_second > 0.0))
    synth_error("invalid-argument", "period and word rate must be positive");

  const double duration = static_cast<double>(n_times) * options.period;
  const auto n_words = static_cast<std::size_t>(std::ceil(duration * options.words_per_second));
  Rng time_rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> when(0.0, duration);
  std::vector<double> onsets(n_words);
  for (double& t : onsets) t = when(time_rng);
  std::sort(onsets.begin(), onsets.end());

  Rng feature_rng(derive_seed(seed, 1));
  IrregularFeatureSeries features(onsets, gaussian(static_cast<Index>(n_words), static_cast<Index>(n_features), feature_rng));

  const Matrix design =
      zscore_columns(fmri_design(features, options.period, n_times, options.delays, LanczosOptions{}));
  Rng weight_rng(derive_seed(seed, 2));
  const Matrix signal = zscore_columns(design * gaussian(design.cols(), static_cast<Index>(n_channels), weight_rng));
  Rng noise_rng(derive_seed(seed, 3));
  const Matrix noise = zscore_columns(gaussian(static_cast<Index>(n_times), static_cast<Index>(n_channels), noise_rng));

  Matrix y(static_cast<Index>(n_times), static_cast<Index>(n_channels));
  std::vector<double> ceiling(n_channels);
  for (std::size_t c = 0; c < n_channels; ++c) {
    const double s = snr.size() == 1 ? snr[0] : snr[c];
    ceiling[c] = noise_ceiling(s);
    const double a = ceiling[c];
    const double b = std::isinf(s) ? 0.0 : std::sqrt(1.0 / (1.0 + s));
    const auto col = static_cast<Index>(c);
    y.col(col) = a * signal.col(col) + b * noise.col(col);
  }
  Manifest meta = synthetic_meta("encoding-case");
  meta.modality = Modality::fmri;
  ResponseSeries response(std::move(y), Sampling::from_period(options.period), {}, std::move(meta));
  return EncodingCase{word_timeline(onsets), std::move(features), std::move(response), std::move(ceiling)};
}

LayeredFixture layered_model_fixture(std::size_t n_layers, std::uint64_t seed, const FixtureOptions& options) {
  if (n_layers < 6) synth_error("invalid-argument", "fixture needs at least 6 layers");
  if (options.latent < 1 || options.latent > options.ambient || options.first_dim < 1 || options.last_dim < 1 ||
      options.first_dim > options.latent || options.last_dim > options.latent)
    synth_error("invalid-argument", "need 1 <= first_dim, last_dim <= latent <= ambient");
  if (options.n_words < 16 || options.channels < 1) synth_error("invalid-argument", "fixture sizes too small");

  LayeredFixture fx{{}, {}, n_layers * 45 / 100, Timeline{}, ResponseSeries(Matrix::Zero(1, 1), Sampling::from_period(1.0))};
  const auto peak = static_cast<double>(fx.peak_layer);
  const auto last = static_cast<double>(n_layers - 1);
  const auto top = static_cast<double>(options.latent);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto x = static_cast<double>(l);
    const double d = l <= fx.peak_layer
                         ? static_cast<double>(options.first_dim) + (top - static_cast<double>(options.first_dim)) * x / peak
                         : top - (top - static_cast<double>(options.last_dim)) * (x - peak) / (last - peak);
    fx.layer_dims.push_back(static_cast<std::size_t>(std::lround(d)));
  }

  std::vector<double> onsets(options.n_words);
  for (std::size_t i = 0; i < onsets.size(); ++i) onsets[i] = options.word_gap * static_cast<double>(i + 1);
  fx.timeline = word_timeline(onsets);

  Rng latent_rng(derive_seed(seed, 0));
  const double half_width = std::sqrt(3.0);
  std::uniform_real_distribution<double> uniform(-half_width, half_width);
  Matrix latent(static_cast<Index>(options.n_words), static_cast<Index>(options.latent));
  for (Index i = 0; i < latent.rows(); ++i)
    for (Index j = 0; j < latent.cols(); ++j) latent(i, j) = uniform(latent_rng);

  for (std::size_t l = 0; l < n_layers; ++l) {
    Rng embed_rng(derive_seed(seed, 100 + l));
    const auto d = static_cast<Index>(fx.layer_dims[l]);
    const Matrix q = random_orthonormal(static_cast<Index>(options.ambient), d, embed_rng);
    Manifest meta = synthetic_meta("fixture", static_cast<int>(l));
    meta.extra["intrinsic_dim"] = std::to_string(d);
    fx.layers.emplace_back(latent.leftCols(d) * q.transpose(), std::move(meta));
  }

  const double end_time = onsets.back() + 4.0 * options.period;
  const auto n_times = static_cast<std::size_t>(std::ceil(end_time / options.period));
  const IrregularFeatureSeries latent_series(onsets, latent);
  const Matrix design = zscore_columns(fmri_design(latent_series, options.period, n_times, options.delays));
  Rng weight_rng(derive_seed(seed, 1));
  const Matrix signal = zscore_columns(design * gaussian(design.cols(), static_cast<Index>(options.channels), weight_rng));
  Rng noise_rng(derive_seed(seed, 2));
  const Matrix noise = zscore_columns(gaussian(static_cast<Index>(n_times), static_cast<Index>(options.channels), noise_rng));
  const double a = noise_ceiling(options.snr);
  const double b = std::isinf(options.snr) ? 0.0 : std::sqrt(1.0 / (1.0 + options.snr));
  Manifest meta = synthetic_meta("fixture");
  meta.modality = Modality::fmri;
  meta.extra["peak_layer"] = std::to_string(fx.peak_layer);
  fx.response = ResponseSeries(a * signal + b * noise, Sampling::from_period(options.period), {}, std::move(meta));
  return fx;
}

}  // namespace layerscope
