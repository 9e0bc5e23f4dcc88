#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerscope/io.hpp"

namespace layerscope {

enum class CorrMethod { pearson, spearman };

std::string to_string(CorrMethod method);
CorrMethod parse_corr_method(const std::string& text);

double pearson(std::span<const double> x, std::span<const double> y);
// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);
double correlation(CorrMethod method, std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  CorrMethod method = CorrMethod::spearman;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t n_permutations = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultPermutations = 10000;

// Shuffles y; p = (1 + #{|rho_perm| >= |rho_obs|}) / (1 + n_perm).
CorrelationReport permutation_test(std::span<const double> x, std::span<const double> y, CorrMethod method,
                                   std::size_t n_perm = kDefaultPermutations, std::uint64_t seed = 0);

struct LayerSeries {
  int layer = 0;
  double id = 0.0;
  double norm_id = 0.0;
  double surprisal = 0.0;       // NaN when unavailable for the whole model
  double norm_surprisal = 0.0;
  double enc_r_mean = 0.0;
};

struct TrajectoryTable {
  std::vector<LayerSeries> rows;  // sorted by layer
  CorrelationReport id_vs_ep;
  std::optional<CorrelationReport> surprisal_vs_ep;
};

// Within-model correlations across layers. Surprisal may be NaN for every
// layer (no lens run); a mix of present and missing values is an error.
TrajectoryTable trajectory_table(std::vector<LayerSeries> rows, CorrMethod method = CorrMethod::spearman,
                                 std::size_t n_perm = kDefaultPermutations, std::uint64_t seed = 0);

inline constexpr double kFmriChannelThreshold = 0.2;
inline constexpr double kEcogChannelThreshold = 0.1;

struct ChannelCorrelations {
  std::vector<double> rho;     // per channel, correlation across layers of I_d and R
  std::vector<double> max_r;   // per channel, best R over layers
  std::vector<bool> selected;  // max_r >= threshold
};

// enc_r is layers x channels, id one value per layer. Channels whose R is
// constant across layers get rho = NaN.
ChannelCorrelations channel_correlations(std::span<const double> id, const Matrix& enc_r, double threshold,
                                         CorrMethod method = CorrMethod::spearman);

}  // namespace layerscope
