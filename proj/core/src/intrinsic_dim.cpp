#include "layerscope/intrinsic_dim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/random.hpp"

namespace layerscope {

namespace {

[[noreturn]] void id_error(const std::string& code, const std::string& message) {
  throw Error("intrinsic-dim", code, message);
}

double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta_kk(std::size_t k) {
  const double kk = static_cast<double>(k);
  return 2.0 * log_gamma(kk) - log_gamma(2.0 * kk);
}

// log(exp(x) - 1) for x > 0 without overflow or cancellation.
double log_expm1(double x) {
  return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
}

struct Derivatives {
  double first = 0.0;
  double second = 0.0;
};

// d/dd and d2/dd2 of the log-likelihood given log-ratios.
Derivatives likelihood_derivatives(std::span<const double> log_mu, double sum_log_mu, std::size_t k, double d) {
  const double n = static_cast<double>(log_mu.size());
  const double km1 = static_cast<double>(k) - 1.0;
  Derivatives out;
  out.first = n / d - (2.0 * static_cast<double>(k) - 1.0) * sum_log_mu;
  out.second = -n / (d * d);
  if (k > 1) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (double l : log_mu) {
      const double x = d * l;
      const double q = -std::expm1(-x);  // 1 - mu^-d
      s1 += l / q;
      s2 += l * l * std::exp(-x) / (q * q);
    }
    out.first += km1 * s1;
    out.second -= km1 * s2;
  }
  return out;
}

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

}  // namespace

double gride_log_density(double mu, std::size_t k, double d) {
  if (!(mu > 1.0)) id_error("invalid-ratio", "GRIDE density needs mu > 1");
  if (!(d > 0.0)) id_error("invalid-argument", "GRIDE density needs d > 0");
  if (k < 1) id_error("invalid-argument", "GRIDE density needs k >= 1");
  const double l = std::log(mu);
  const double kk = static_cast<double>(k);
  double out = std::log(d) - log_beta_kk(k) - (d * (2.0 * kk - 1.0) + 1.0) * l;
  if (k > 1) out += (kk - 1.0) * log_expm1(d * l);
  return out;
}

double gride_log_likelihood(const RatioSample& sample, double d) {
  double total = 0.0;
  for (double mu : sample.ratios) total += gride_log_density(mu, sample.k, d);
  return total;
}

GrideFit gride_mle(const RatioSample& sample, const MleOptions& options) {
  if (sample.ratios.empty()) id_error("empty-sample", "GRIDE MLE needs at least one ratio");
  if (sample.k < 1) id_error("invalid-argument", "GRIDE scale k must be >= 1");
  if (!(options.lower > 0.0) || !(options.upper > options.lower))
    id_error("invalid-argument", "GRIDE search interval must satisfy 0 < lower < upper");

  std::vector<double> log_mu;
  log_mu.reserve(sample.ratios.size());
  double lo_mu = sample.ratios.front();
  double hi_mu = sample.ratios.front();
  for (double mu : sample.ratios) {
    if (!(mu > 1.0) || !std::isfinite(mu))
      id_error("invalid-ratio", "GRIDE ratios must be finite and > 1 (duplicate points?)");
    lo_mu = std::min(lo_mu, mu);
    hi_mu = std::max(hi_mu, mu);
    log_mu.push_back(std::log(mu));
  }
  if (hi_mu == lo_mu && hi_mu <= 1.0 + 1e-12)
    id_error("degenerate-sample", "all ratios identical and within 1e-12 of 1");
  const double sum_log_mu = std::accumulate(log_mu.begin(), log_mu.end(), 0.0);

  auto deriv = [&](double d) { return likelihood_derivatives(log_mu, sum_log_mu, sample.k, d); };

  // The log-likelihood is strictly concave in d, so its derivative has at most
  // one root; safeguarded Newton on the derivative inside a shrinking bracket.
  double lo = options.lower;
  double hi = options.upper;
  GrideFit fit;
  if (deriv(hi).first >= 0.0) {
    fit.id = hi;
    fit.at_upper_bound = true;
  } else if (deriv(lo).first <= 0.0) {
    fit.id = lo;
  } else {
    double d = std::clamp(static_cast<double>(log_mu.size()) / sum_log_mu, lo, hi);
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      const Derivatives g = deriv(d);
      if (g.first == 0.0) {
        converged = true;
        break;
      }
      if (g.first > 0.0) lo = d; else hi = d;
      double next = d - g.first / g.second;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - d);
      d = next;
      if (step <= options.tolerance) {
        // One more Newton step squares the remaining error.
        const Derivatives h = deriv(d);
        const double polish = d - h.first / h.second;
        if (polish > lo && polish < hi) d = polish;
        converged = true;
        break;
      }
    }
    if (!converged) id_error("no-convergence", "GRIDE MLE did not converge");
    fit.id = d;
  }
  const double info = -deriv(fit.id).second;
  fit.std_error = info > 0.0 ? 1.0 / std::sqrt(info) : std::numeric_limits<double>::infinity();
  return fit;
}

RatioSample ratios_at_scale(const NeighborTable& table, std::size_t k) {
  const Index ck = table.column_of(k);
  const Index c2k = table.column_of(2 * k);
  RatioSample sample;
  sample.k = k;
  sample.ratios.resize(static_cast<std::size_t>(table.n_samples()));
  for (Index i = 0; i < table.n_samples(); ++i)
    sample.ratios[static_cast<std::size_t>(i)] = table.distances(i, c2k) / table.distances(i, ck);
  return sample;
}

std::size_t select_plateau(std::span<const std::size_t> scales, std::span<const double> estimates) {
  const std::size_t n = scales.size();
  if (n < 2 || estimates.size() != n) id_error("too-few-scales", "plateau selection needs >= 2 scales");
  std::vector<double> smooth(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == 0 || j + 1 == n) smooth[j] = estimates[j];
    else smooth[j] = median3(estimates[j - 1], estimates[j], estimates[j + 1]);
  }
  std::size_t best = 0;
  double best_slope = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t a = j == 0 ? 0 : j - 1;
    const std::size_t b = j + 1 == n ? j : j + 1;
    const double slope = std::abs((std::log(smooth[b]) - std::log(smooth[a])) /
                                  (std::log(static_cast<double>(scales[b])) - std::log(static_cast<double>(scales[a]))));
    if (slope < best_slope) {
      best_slope = slope;
      best = j;
    }
  }
  return best;
}

ScaleProfile gride_scale_profile(const ActivationMatrix& points, const ProfileOptions& options) {
  if (points.n_samples() < 4) id_error("too-few-points", "scale analysis needs n_samples >= 4");

  ScaleProfile profile;
  profile.ambient_dim = static_cast<std::size_t>(points.n_dims());
  DedupResult unique = dedup(points.values(), 0.0);
  profile.n_removed = unique.removed;
  profile.n_points = static_cast<std::size_t>(unique.points.rows());
  if (static_cast<double>(unique.removed) > options.max_removed_fraction * static_cast<double>(points.n_samples()))
    id_error("too-many-duplicates", std::to_string(unique.removed) + " of " + std::to_string(points.n_samples()) +
                                        " points are duplicates");
  if (profile.n_points < 4) id_error("too-few-points", "fewer than 4 distinct points");

  for (std::size_t e = 0; e <= options.max_exp && e < 63; ++e) {
    const std::size_t k = std::size_t{1} << e;
    if (2 * k > profile.n_points - 1) break;
    profile.scales.push_back(k);
  }
  if (profile.scales.size() < 2)
    id_error("too-few-scales", "fewer than 2 admissible scales (need 2k <= n - 1)");

  std::vector<std::size_t> ranks;
  for (std::size_t k : profile.scales) {
    ranks.push_back(k);
    ranks.push_back(2 * k);
  }
  const NeighborTable table = knn_at_ranks(unique.points, ranks);

  MleOptions mle;
  mle.upper = 10.0 * static_cast<double>(profile.ambient_dim);
  const std::size_t n_scales = profile.scales.size();
  profile.estimates.resize(n_scales);
  profile.std_errors.resize(n_scales);
  std::vector<char> at_bound(n_scales, 0);
  parallel_for(n_scales, [&](std::size_t s) {
    const GrideFit fit = gride_mle(ratios_at_scale(table, profile.scales[s]), mle);
    profile.estimates[s] = fit.id;
    profile.std_errors[s] = fit.std_error;
    at_bound[s] = fit.at_upper_bound;
  });
  for (std::size_t s = 0; s < n_scales; ++s) {
    if (at_bound[s])
      warn("intrinsic-dim", "estimate at k=" + std::to_string(profile.scales[s]) + " hit the search bound 10*D");
    else if (profile.estimates[s] > static_cast<double>(profile.ambient_dim))
      warn("intrinsic-dim", "estimate at k=" + std::to_string(profile.scales[s]) + " exceeds the ambient dimension");
  }

  std::size_t chosen = 0;
  if (options.k) {
    auto it = std::find(profile.scales.begin(), profile.scales.end(), *options.k);
    if (it == profile.scales.end())
      id_error("invalid-scale", "k=" + std::to_string(*options.k) + " is not an admissible dyadic scale");
    chosen = static_cast<std::size_t>(it - profile.scales.begin());
    profile.k_overridden = true;
  } else {
    chosen = select_plateau(profile.scales, profile.estimates);
  }
  profile.chosen_k = profile.scales[chosen];
  profile.chosen_id = profile.estimates[chosen];

  // Bootstrap: size-n resampling with replacement, duplicates dropped before kNN.
  const std::size_t k = profile.chosen_k;
  profile.bootstrap_ids.resize(options.bootstraps);
  for (std::size_t b = 0; b < options.bootstraps; ++b) {
    Rng rng(derive_seed(options.seed, b));
    std::uniform_int_distribution<std::size_t> pick(0, profile.n_points - 1);
    std::vector<char> used(profile.n_points, 0);
    for (std::size_t i = 0; i < profile.n_points; ++i) used[pick(rng)] = 1;
    std::vector<Index> rows;
    for (std::size_t i = 0; i < profile.n_points; ++i)
      if (used[i]) rows.push_back(static_cast<Index>(i));
    if (2 * k > rows.size() - 1)
      id_error("too-few-points", "bootstrap resample too small for k=" + std::to_string(k));
    Matrix sample(static_cast<Index>(rows.size()), unique.points.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sample.row(static_cast<Index>(r)) = unique.points.row(rows[r]);
    const NeighborTable boot = knn_at_ranks(sample, {k, 2 * k});
    profile.bootstrap_ids[b] = gride_mle(ratios_at_scale(boot, k), mle).id;
  }
  if (options.bootstraps == 0) {
    profile.bootstrap_mean = std::nan("");
    profile.bootstrap_sd = std::nan("");
  } else {
    const double nb = static_cast<double>(options.bootstraps);
    profile.bootstrap_mean = std::accumulate(profile.bootstrap_ids.begin(), profile.bootstrap_ids.end(), 0.0) / nb;
    double ss = 0.0;
    for (double v : profile.bootstrap_ids) ss += (v - profile.bootstrap_mean) * (v - profile.bootstrap_mean);
    profile.bootstrap_sd = options.bootstraps > 1 ? std::sqrt(ss / (nb - 1.0)) : 0.0;
  }
  return profile;
}

double participation_ratio(std::span<const double> eigenvalues) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double l : eigenvalues) {
    sum += l;
    sum_sq += l * l;
  }
  if (!(sum_sq > 0.0)) id_error("zero-variance", "participation ratio of an all-zero spectrum");
  return sum * sum / sum_sq;
}

std::size_t pca_dimension(std::span<const double> eigenvalues, double variance_threshold) {
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (!(total > 0.0)) id_error("zero-variance", "total variance is zero");
  // Relative slack absorbs rounding in the cumulative sum, e.g. 99 of 100
  // equal eigenvalues summing to 0.98999999999999 of the total.
  const double target = (variance_threshold - 1e-12) * total;
  double cumulative = 0.0;
  for (std::size_t m = 0; m < eigenvalues.size(); ++m) {
    cumulative += eigenvalues[m];
    if (cumulative >= target) return m + 1;
  }
  return eigenvalues.size();
}

LinearDims linear_dims(const ActivationMatrix& points, double variance_threshold) {
  const Matrix& x = points.values();
  const Index n = x.rows();
  const Index d = x.cols();
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const double denom = static_cast<double>(n - 1);

  // Covariance when D <= N; otherwise the Gram matrix shares its nonzero spectrum.
  const Matrix scatter = d <= n ? Matrix(centered.transpose() * centered / denom)
                                : Matrix(centered * centered.transpose() / denom);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(scatter, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) id_error("eigen-failure", "eigendecomposition failed");

  LinearDims out;
  out.eigenvalues.assign(static_cast<std::size_t>(d), 0.0);
  const Vector& ev = solver.eigenvalues();  // ascending
  for (Index i = 0; i < ev.size() && i < d; ++i)
    out.eigenvalues[static_cast<std::size_t>(i)] = std::max(0.0, ev(ev.size() - 1 - i));
  out.pca_d = pca_dimension(out.eigenvalues, variance_threshold);
  out.pr_d = participation_ratio(out.eigenvalues);
  return out;
}

double normalize_id(double id, std::size_t hidden_dim) {
  if (hidden_dim < 2) id_error("invalid-argument", "hidden_dim must be >= 2");
  return id / std::log(static_cast<double>(hidden_dim));
}

}  // namespace layerscope
