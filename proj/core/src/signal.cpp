#include "layerscope/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"

namespace layerscope {

namespace {

[[noreturn]] void signal_error(const std::string& code, const std::string& message) {
  throw Error("signal", code, message);
}

using cd = std::complex<double>;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Steady-state section states for a unit step, scaled by the cascade gain
// seen at each section's input.
std::vector<std::pair<double, double>> step_states(const SosFilter& filter) {
  std::vector<std::pair<double, double>> zi(filter.size());
  double input_gain = 1.0;
  for (std::size_t s = 0; s < filter.size(); ++s) {
    const Biquad& q = filter[s];
    const double den = 1.0 + q.a1 + q.a2;
    const double g = std::abs(den) > 1e-300 ? (q.b0 + q.b1 + q.b2) / den : 0.0;
    const double z2 = q.b2 - q.a2 * g;
    const double z1 = q.b1 - q.a1 * g + z2;
    zi[s] = {z1 * input_gain, z2 * input_gain};
    input_gain *= g;
  }
  return zi;
}

void run_cascade(const SosFilter& filter, const std::vector<std::pair<double, double>>& zi, double scale,
                 std::vector<double>& data) {
  for (std::size_t s = 0; s < filter.size(); ++s) {
    const Biquad& q = filter[s];
    double z1 = zi[s].first * scale;
    double z2 = zi[s].second * scale;
    for (double& v : data) {
      const double x = v;
      const double y = q.b0 * x + z1;
      z1 = q.b1 * x - q.a1 * y + z2;
      z2 = q.b2 * x - q.a2 * y;
      v = y;
    }
  }
}

Matrix filter_columns(const SosFilter& filter, const Matrix& x) {
  const Index t = x.rows();
  const Index channels = x.cols();
  Matrix out(t, channels);
  if (t == 0) return out;
  const auto zi = step_states(filter);
  const Index pad = std::min<Index>(3 * (2 * static_cast<Index>(filter.size()) + 1), t - 1);

  parallel_for(static_cast<std::size_t>(channels), [&](std::size_t cu) {
    const auto c = static_cast<Index>(cu);
    std::vector<double> ext(static_cast<std::size_t>(t + 2 * pad));
    const double first = x(0, c);
    const double last = x(t - 1, c);
    for (Index i = 0; i < pad; ++i) ext[static_cast<std::size_t>(i)] = 2.0 * first - x(pad - i, c);
    for (Index i = 0; i < t; ++i) ext[static_cast<std::size_t>(pad + i)] = x(i, c);
    for (Index i = 0; i < pad; ++i) ext[static_cast<std::size_t>(pad + t + i)] = 2.0 * last - x(t - 2 - i, c);

    run_cascade(filter, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());
    run_cascade(filter, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());
    for (Index i = 0; i < t; ++i) out(i, c) = ext[static_cast<std::size_t>(pad + i)];
  });
  return out;
}

}  // namespace

IrregularFeatureSeries::IrregularFeatureSeries(std::vector<double> t, Matrix f)
    : times(std::move(t)), features(std::move(f)) {
  if (static_cast<Index>(times.size()) != features.rows())
    signal_error("invalid-shape", "times length must equal the number of feature rows");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) signal_error("non-finite", "non-finite event time");
    if (i > 0 && times[i] < times[i - 1]) signal_error("unordered-times", "event times must be non-decreasing");
  }
  if (!features.allFinite()) signal_error("non-finite", "non-finite feature value");
}

double lanczos_kernel(double x, std::size_t lobes) {
  const double a = static_cast<double>(lobes);
  if (std::abs(x) >= a) return 0.0;
  return sinc(x) * sinc(x / a);
}

Matrix lanczos_downsample(const IrregularFeatureSeries& series, double grid_period, std::size_t grid_len,
                          const LanczosOptions& options) {
  if (series.n_events() == 0) signal_error("empty-series", "cannot downsample an empty series");
  if (!(grid_period > 0.0)) signal_error("invalid-argument", "grid period must be positive");
  if (options.lobes < 1) signal_error("invalid-argument", "Lanczos lobes must be >= 1");

  const double cutoff = 1.0 / (2.0 * grid_period);
  const double half_width = static_cast<double>(options.lobes) / cutoff;
  const auto& times = series.times;
  Matrix out = Matrix::Zero(static_cast<Index>(grid_len), series.n_dims());

  parallel_for(grid_len, [&](std::size_t g) {
    const double t = static_cast<double>(g) * grid_period;
    auto it = std::upper_bound(times.begin(), times.end(), t - half_width);
    double weight_sum = 0.0;
    for (; it != times.end() && *it < t + half_width; ++it) {
      const double w = lanczos_kernel((t - *it) * cutoff, options.lobes);
      if (w == 0.0) continue;
      const auto e = static_cast<Index>(it - times.begin());
      out.row(static_cast<Index>(g)) += w * series.features.row(e);
      weight_sum += w;
    }
    if (options.normalize) {
      if (std::abs(weight_sum) > 1e-12) out.row(static_cast<Index>(g)) /= weight_sum;
      else out.row(static_cast<Index>(g)).setZero();
    }
  });
  return out;
}

Matrix fir_delays(const Matrix& x, std::span<const std::size_t> delays) {
  if (delays.empty()) signal_error("invalid-argument", "delay list is empty");
  const Index t = x.rows();
  const Index d = x.cols();
  Matrix out = Matrix::Zero(t, d * static_cast<Index>(delays.size()));
  for (std::size_t j = 0; j < delays.size(); ++j) {
    const auto delay = static_cast<Index>(delays[j]);
    if (delay >= t)
      signal_error("delay-too-long", "delay " + std::to_string(delay) + " >= series length " + std::to_string(t));
    out.block(delay, static_cast<Index>(j) * d, t - delay, d) = x.topRows(t - delay);
  }
  return out;
}

Matrix common_average_reference(const Matrix& x) {
  if (x.cols() < 2) signal_error("invalid-shape", "common average reference needs >= 2 channels");
  const Vector mean = x.rowwise().mean();
  return x.colwise() - mean;
}

SosFilter design_notch(double rate, double freq, double q) {
  if (!(rate > 0.0) || !(freq > 0.0) || !(q > 0.0)) signal_error("invalid-argument", "notch needs positive rate, freq, q");
  if (freq >= rate / 2.0) signal_error("above-nyquist", "notch frequency " + std::to_string(freq) + " Hz is above Nyquist");
  const double w0 = 2.0 * std::numbers::pi * freq / rate;
  const double bw = w0 / q;
  const double beta = std::tan(bw / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  Biquad s;
  s.b0 = gain;
  s.b1 = -2.0 * gain * std::cos(w0);
  s.b2 = gain;
  s.a1 = -2.0 * gain * std::cos(w0);
  s.a2 = 2.0 * gain - 1.0;
  return {s};
}

SosFilter design_butterworth_bandpass(double rate, double lo, double hi, std::size_t order) {
  if (order < 1) signal_error("invalid-argument", "filter order must be >= 1");
  if (!(lo > 0.0 && lo < hi && hi < rate / 2.0))
    signal_error("invalid-band", "band-pass needs 0 < lo < hi < rate/2");

  const double fs2 = 2.0 * rate;
  const double w_lo = fs2 * std::tan(std::numbers::pi * lo / rate);
  const double w_hi = fs2 * std::tan(std::numbers::pi * hi / rate);
  const double bw = w_hi - w_lo;
  const double w0 = std::sqrt(w_lo * w_hi);
  const double n = static_cast<double>(order);

  std::vector<cd> poles;
  for (std::size_t k = 1; k <= order; ++k) {
    const cd p = std::polar(1.0, std::numbers::pi * (2.0 * static_cast<double>(k) + n - 1.0) / (2.0 * n));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    for (const cd s : {half + root, half - root}) poles.push_back((fs2 + s) / (fs2 - s));
  }

  SosFilter sos;
  std::vector<double> reals;
  for (const cd& z : poles) {
    if (z.imag() > 1e-12) {
      Biquad b;
      b.b0 = 1.0;
      b.b1 = 0.0;
      b.b2 = -1.0;
      b.a1 = -2.0 * z.real();
      b.a2 = std::norm(z);
      sos.push_back(b);
    } else if (std::abs(z.imag()) <= 1e-12) {
      reals.push_back(z.real());
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad b;
    b.b0 = 1.0;
    b.b2 = -1.0;
    b.a1 = -(reals[i] + reals[i + 1]);
    b.a2 = reals[i] * reals[i + 1];
    sos.push_back(b);
  }
  if (sos.size() != order) signal_error("design-failure", "unexpected pole configuration");

  const double centre = rate * std::atan(w0 / fs2) / std::numbers::pi;
  const double g = std::abs(frequency_response(sos, centre, rate));
  sos.front().b0 /= g;
  sos.front().b1 /= g;
  sos.front().b2 /= g;
  return sos;
}

std::complex<double> frequency_response(const SosFilter& filter, double freq, double rate) {
  const cd zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq / rate);
  cd h = 1.0;
  for (const Biquad& q : filter) h *= (q.b0 + zinv * (q.b1 + zinv * q.b2)) / (1.0 + zinv * (q.a1 + zinv * q.a2));
  return h;
}

Matrix sosfiltfilt(const SosFilter& filter, const Matrix& x) {
  if (!x.allFinite()) signal_error("non-finite", "filter input contains non-finite values");
  return filter_columns(filter, x);
}

Matrix notch_filter(const Matrix& x, double rate, double freq, std::size_t harmonics, double q) {
  if (harmonics < 1) signal_error("invalid-argument", "harmonics must be >= 1");
  if (freq * static_cast<double>(harmonics) >= rate / 2.0)
    signal_error("above-nyquist", "notch harmonic " + std::to_string(freq * static_cast<double>(harmonics)) +
                                      " Hz is above Nyquist");
  SosFilter cascade;
  for (std::size_t h = 1; h <= harmonics; ++h) {
    const SosFilter s = design_notch(rate, freq * static_cast<double>(h), q);
    cascade.insert(cascade.end(), s.begin(), s.end());
  }
  return sosfiltfilt(cascade, x);
}

Matrix butterworth_bandpass(const Matrix& x, double rate, double lo, double hi, std::size_t order) {
  return sosfiltfilt(design_butterworth_bandpass(rate, lo, hi, order), x);
}

Matrix moving_rms(const Matrix& x, std::size_t window) {
  if (window < 1) signal_error("invalid-argument", "RMS window must be >= 1");
  const Index t = x.rows();
  const auto half = static_cast<Index>(window / 2);
  Matrix out(t, x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index i = 0; i < t; ++i) {
      const Index a = std::max<Index>(0, i - half);
      const Index b = std::min<Index>(t, a + static_cast<Index>(window));
      out(i, c) = std::sqrt(x.col(c).segment(a, b - a).squaredNorm() / static_cast<double>(b - a));
    }
  }
  return out;
}

}  // namespace layerscope
