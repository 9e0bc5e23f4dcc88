#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "layerscope/io.hpp"

namespace layerscope {

// Word- or chunk-rate features at irregular times, before resampling.
struct IrregularFeatureSeries {
  std::vector<double> times;  // seconds, non-decreasing
  Matrix features;            // n_events x D

  IrregularFeatureSeries() = default;
  IrregularFeatureSeries(std::vector<double> times, Matrix features);

  Index n_events() const noexcept { return features.rows(); }
  Index n_dims() const noexcept { return features.cols(); }
};

struct LanczosOptions {
  std::size_t lobes = 3;
  // Divide each output sample by its kernel-weight sum. Off by default: the
  // raw convolution accumulates word-rate features into each sample.
  bool normalize = false;
};

// sinc(x) * sinc(x / lobes) for |x| < lobes, else 0; sinc(x) = sin(pi x)/(pi x).
double lanczos_kernel(double x, std::size_t lobes);

// output[t] = sum_e L((t * grid_period - times[e]) * f_c) * features[e],
// f_c = 1 / (2 grid_period).
Matrix lanczos_downsample(const IrregularFeatureSeries& series, double grid_period, std::size_t grid_len,
                          const LanczosOptions& options = {});

// [X shifted down by delays[0] | X shifted by delays[1] | ...], zero-padded.
Matrix fir_delays(const Matrix& x, std::span<const std::size_t> delays);

// Subtracts the per-timepoint mean across channels (columns).
Matrix common_average_reference(const Matrix& x);

// Second-order section, transposed direct form II:
//   y = b0 x + z1,  z1 <- b1 x - a1 y + z2,  z2 <- b2 x - a2 y.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};
using SosFilter = std::vector<Biquad>;

SosFilter design_notch(double rate, double freq, double q);
// Order-n band-pass: n second-order sections, 2n poles (bilinear transform
// of the analog Butterworth prototype, unit gain at the geometric centre).
SosFilter design_butterworth_bandpass(double rate, double lo, double hi, std::size_t order);

std::complex<double> frequency_response(const SosFilter& filter, double freq, double rate);

// Zero-phase forward-backward filtering of each column with odd-extension
// padding and steady-state initial conditions.
Matrix sosfiltfilt(const SosFilter& filter, const Matrix& x);

// Cascaded notches at freq, 2 freq, ..., harmonics * freq, forward-backward.
Matrix notch_filter(const Matrix& x, double rate, double freq, std::size_t harmonics, double q = 30.0);

Matrix butterworth_bandpass(const Matrix& x, double rate, double lo, double hi, std::size_t order = 4);

// Optional high-gamma envelope: centred moving RMS over `window` samples.
Matrix moving_rms(const Matrix& x, std::size_t window);

}  // namespace layerscope
