#include "layerscope/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/random.hpp"

namespace layerscope {

namespace {

[[noreturn]] void stats_error(const std::string& code, const std::string& message) {
  throw Error("stats", code, message);
}

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) stats_error("length-mismatch", "series lengths differ");
  if (x.size() < 3) stats_error("too-short", "need at least 3 observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) stats_error("non-finite", "series contain non-finite values");
}

std::vector<double> centered(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
  return out;
}

double norm(const std::vector<double>& x) { return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0)); }

// Inputs for a correlation that only permutes y: centered, unit-norm series.
struct Prepared {
  std::vector<double> x;
  std::vector<double> y;
};

Prepared prepare(std::span<const double> x, std::span<const double> y, CorrMethod method) {
  check_pair(x, y);
  std::vector<double> a, b;
  if (method == CorrMethod::spearman) {
    a = centered(average_ranks(x));
    b = centered(average_ranks(y));
  } else {
    a = centered(x);
    b = centered(y);
  }
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) stats_error("zero-variance", "a series has zero variance");
  for (double& v : a) v /= na;
  for (double& v : b) v /= nb;
  return {std::move(a), std::move(b)};
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

constexpr double kTieTolerance = 1e-12;
constexpr std::size_t kPermBlock = 256;

}  // namespace

std::string to_string(CorrMethod method) { return method == CorrMethod::pearson ? "pearson" : "spearman"; }

CorrMethod parse_corr_method(const std::string& text) {
  if (text == "pearson") return CorrMethod::pearson;
  if (text == "spearman") return CorrMethod::spearman;
  stats_error("invalid-argument", "unknown correlation method '" + text + "'");
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const Prepared p = prepare(x, y, CorrMethod::pearson);
  return std::clamp(dot(p.x, p.y), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const Prepared p = prepare(x, y, CorrMethod::spearman);
  return std::clamp(dot(p.x, p.y), -1.0, 1.0);
}

double correlation(CorrMethod method, std::span<const double> x, std::span<const double> y) {
  return method == CorrMethod::pearson ? pearson(x, y) : spearman(x, y);
}

CorrelationReport permutation_test(std::span<const double> x, std::span<const double> y, CorrMethod method,
                                   std::size_t n_perm, std::uint64_t seed) {
  if (n_perm == 0) stats_error("invalid-argument", "n_perm must be >= 1");
  const Prepared p = prepare(x, y, method);
  const double observed = std::clamp(dot(p.x, p.y), -1.0, 1.0);
  const double threshold = std::abs(observed) - kTieTolerance;

  const std::size_t n_blocks = (n_perm + kPermBlock - 1) / kPermBlock;
  std::vector<std::size_t> hits(n_blocks, 0);
  parallel_for(n_blocks, [&](std::size_t blk) {
    Rng rng(derive_seed(seed, blk));
    std::vector<double> shuffled = p.y;
    const std::size_t count = std::min(kPermBlock, n_perm - blk * kPermBlock);
    for (std::size_t i = 0; i < count; ++i) {
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      if (std::abs(dot(p.x, shuffled)) >= threshold) ++hits[blk];
    }
  });

  CorrelationReport report;
  report.method = method;
  report.rho = observed;
  report.n = x.size();
  report.n_permutations = n_perm;
  report.seed = seed;
  const std::size_t total = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
  report.p_value = static_cast<double>(1 + total) / static_cast<double>(1 + n_perm);
  return report;
}

TrajectoryTable trajectory_table(std::vector<LayerSeries> rows, CorrMethod method, std::size_t n_perm,
                                 std::uint64_t seed) {
  if (rows.size() < 3) stats_error("too-few-layers", "need at least 3 layers");
  std::sort(rows.begin(), rows.end(), [](const LayerSeries& a, const LayerSeries& b) { return a.layer < b.layer; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].layer == rows[i - 1].layer) stats_error("duplicate-layer", "layer " + std::to_string(rows[i].layer) + " appears twice");

  std::vector<double> id, ep, surprisal;
  std::size_t with_surprisal = 0;
  for (const LayerSeries& r : rows) {
    if (!std::isfinite(r.id) || !std::isfinite(r.enc_r_mean))
      stats_error("missing-series", "layer " + std::to_string(r.layer) + " lacks I_d or encoding performance");
    id.push_back(r.id);
    ep.push_back(r.enc_r_mean);
    surprisal.push_back(r.surprisal);
    with_surprisal += std::isfinite(r.surprisal) ? 1 : 0;
  }
  if (with_surprisal != 0 && with_surprisal != rows.size())
    stats_error("missing-series", "surprisal is present for some layers but not all");

  TrajectoryTable table;
  table.id_vs_ep = permutation_test(id, ep, method, n_perm, derive_seed(seed, 0));
  if (with_surprisal == rows.size())
    table.surprisal_vs_ep = permutation_test(surprisal, ep, method, n_perm, derive_seed(seed, 1));
  table.rows = std::move(rows);
  return table;
}

ChannelCorrelations channel_correlations(std::span<const double> id, const Matrix& enc_r, double threshold,
                                         CorrMethod method) {
  if (static_cast<Index>(id.size()) != enc_r.rows()) stats_error("length-mismatch", "one I_d value per layer row");
  ChannelCorrelations out;
  const auto channels = static_cast<std::size_t>(enc_r.cols());
  out.rho.resize(channels);
  out.max_r.resize(channels);
  out.selected.resize(channels);
  std::vector<double> column(id.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t l = 0; l < id.size(); ++l) column[l] = enc_r(static_cast<Index>(l), static_cast<Index>(c));
    out.max_r[c] = *std::max_element(column.begin(), column.end());
    out.selected[c] = out.max_r[c] >= threshold;
    const bool constant = std::all_of(column.begin(), column.end(), [&](double v) { return v == column.front(); });
    out.rho[c] = constant ? std::numeric_limits<double>::quiet_NaN() : correlation(method, id, column);
  }
  return out;
}

}  // namespace layerscope
