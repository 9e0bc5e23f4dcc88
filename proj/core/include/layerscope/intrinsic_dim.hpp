#pragma once

// GRIDE intrinsic-dimension estimation. For each point the ratio
// mu = r_{2k} / r_k of its 2k-th to k-th neighbor distance follows, under
// local uniformity up to the 2k-th neighbor,
//
//   f(mu; k, d) = d (mu^d - 1)^(k-1) / (B(k, k) mu^(d(2k-1)+1)),   mu > 1,
//
// and d is recovered by maximum likelihood. Equivalently mu^-d ~ Beta(k, k).
// A scale analysis sweeps k over powers of two and picks a plateau.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layerscope/io.hpp"
#include "layerscope/neighbors.hpp"

namespace layerscope {

struct RatioSample {
  std::size_t k = 1;
  std::vector<double> ratios;  // every entry > 1
};

struct MleOptions {
  double lower = 1e-3;
  double upper = 1e4;
  double tolerance = 1e-8;  // absolute, in d
  int max_iterations = 200;
};

struct GrideFit {
  double id = 0.0;
  double std_error = 0.0;  // 1 / sqrt(observed Fisher information)
  bool at_upper_bound = false;
};

double gride_log_density(double mu, std::size_t k, double d);
double gride_log_likelihood(const RatioSample& sample, double d);
GrideFit gride_mle(const RatioSample& sample, const MleOptions& options = {});

RatioSample ratios_at_scale(const NeighborTable& table, std::size_t k);

struct ScaleProfile {
  std::vector<std::size_t> scales;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::size_t chosen_k = 0;
  double chosen_id = 0.0;
  double bootstrap_mean = 0.0;
  double bootstrap_sd = 0.0;
  std::vector<double> bootstrap_ids;
  std::size_t n_points = 0;  // after duplicate removal
  std::size_t n_removed = 0;
  std::size_t ambient_dim = 0;
  bool k_overridden = false;
};

struct ProfileOptions {
  std::size_t max_exp = 12;
  std::optional<std::size_t> k;  // fixed scale; automatic plateau when empty
  std::size_t bootstraps = 5;
  std::uint64_t seed = 0;
  double max_removed_fraction = 0.2;
};

ScaleProfile gride_scale_profile(const ActivationMatrix& points, const ProfileOptions& options = {});

// Median-smooths estimates over 3 adjacent scales and returns the index of
// the scale with the smallest |d ln I_d / d ln k| (central differences inside,
// one-sided at the ends; ties go to the smaller k).
std::size_t select_plateau(std::span<const std::size_t> scales, std::span<const double> estimates);

struct LinearDims {
  std::size_t pca_d = 0;
  double pr_d = 0.0;
  std::vector<double> eigenvalues;  // descending, length D
};

LinearDims linear_dims(const ActivationMatrix& points, double variance_threshold = 0.99);
double participation_ratio(std::span<const double> eigenvalues);
std::size_t pca_dimension(std::span<const double> eigenvalues, double variance_threshold = 0.99);

double normalize_id(double id, std::size_t hidden_dim);

// Hand-picked GRIDE scales for the reference models. Models whose scale
// changes with depth use `early_k` for layers below `early_layers`.
struct ReferenceScale {
  std::string model;
  std::size_t k = 1;
  std::size_t early_k = 0;
  std::size_t early_layers = 0;
};

const std::vector<ReferenceScale>& reference_scales();
// Case-insensitive lookup; empty when the model is not in the table.
std::optional<std::size_t> reference_scale(std::string_view model, int layer);

}  // namespace layerscope
