#pragma once

// Seeded generators with known ground truth: manifolds of known intrinsic
// dimension, encoding problems with an analytic noise ceiling, and a layered
// "model" whose dimension and encoding profiles peak at the same depth.

#include <cstdint>
#include <span>
#include <vector>

#include "layerscope/io.hpp"
#include "layerscope/random.hpp"
#include "layerscope/signal.hpp"

namespace layerscope {

// rows x cols matrix with orthonormal columns (rows >= cols), from the QR
// factorization of a Gaussian matrix.
Matrix random_orthonormal(Index rows, Index cols, Rng& rng);

// Uniform [0,1]^d, embedded in D dims by a random orthonormal map, plus
// isotropic Gaussian noise.
ActivationMatrix hypercube(std::size_t n, std::size_t d, std::size_t ambient, double noise_sd, std::uint64_t seed);

// (t cos t, h, t sin t), t ~ U[1.5 pi, 4.5 pi], h ~ U[0, 21], rotated into D dims.
ActivationMatrix swiss_roll(std::size_t n, std::size_t ambient, std::uint64_t seed, double noise_sd = 0.0);

// Pearson ceiling of a response with signal-to-noise variance ratio snr.
double noise_ceiling(double snr);

struct EncodingCaseOptions {
  double period = 2.0;          // seconds per TR
  double words_per_second = 2.5;
  std::vector<std::size_t> delays = {1, 2, 3, 4};
};

struct EncodingCase {
  Timeline timeline;
  IrregularFeatureSeries features;
  ResponseSeries response;
  std::vector<double> ceiling;
};

// Gaussian word features at Poisson onsets; each channel is a random linear
// readout of the delayed, Lanczos-downsampled design, standardized and mixed
// with standardized Gaussian noise at the requested SNR (inf: no noise).
EncodingCase encoding_case(std::size_t n_times, std::size_t n_features, std::size_t n_channels,
                           std::span<const double> snr, std::uint64_t seed, const EncodingCaseOptions& options = {});

struct FixtureOptions {
  std::size_t n_words = 4000;
  std::size_t ambient = 32;
  std::size_t latent = 8;       // dimension at the peak layer
  std::size_t first_dim = 2;
  std::size_t last_dim = 3;
  std::size_t channels = 16;
  double snr = 1.0;
  double period = 2.0;
  double word_gap = 0.5;        // seconds between onsets
  std::vector<std::size_t> delays = {1, 2, 3, 4};
};

struct LayeredFixture {
  std::vector<ActivationMatrix> layers;  // n_words x ambient each
  std::vector<std::size_t> layer_dims;
  std::size_t peak_layer = 0;
  Timeline timeline;
  ResponseSeries response;
};

// Every layer linearly embeds the first d_l coordinates of one shared latent
// (uniform, unit variance). d_l rises from first_dim to latent at layer
// floor(0.45 n_layers) and falls to last_dim at the end. The response reads
// out all latent coordinates, so encoding performance tracks d_l.
LayeredFixture layered_model_fixture(std::size_t n_layers, std::uint64_t seed, const FixtureOptions& options = {});

}  // namespace layerscope
