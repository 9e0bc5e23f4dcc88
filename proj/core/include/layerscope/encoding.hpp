#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerscope/io.hpp"
#include "layerscope/signal.hpp"

namespace layerscope {

// Thin SVD of a design matrix. Solutions for every alpha on a grid reuse the
// same factorization: W(alpha) = V diag(s / (s^2 + alpha)) U^T Y.
class RidgeSvd {
 public:
  explicit RidgeSvd(const Matrix& x);

  Index n_features() const noexcept { return v_.rows(); }
  const Vector& singular_values() const noexcept { return s_; }

  Matrix weights(const Matrix& y, double alpha) const;
  // Column c of y solved with alphas[c].
  Matrix weights(const Matrix& y, std::span<const double> alphas) const;
  // Held-out predictions without forming the D' x C weights:
  // predict(project(x_new), rotate(y), alpha) == x_new * weights(y, alpha).
  Matrix project(const Matrix& x_new) const { return x_new * v_; }
  Matrix rotate(const Matrix& y) const { return u_.transpose() * y; }
  Matrix predict(const Matrix& projected, const Matrix& rotated, double alpha) const;

 private:
  Matrix u_;
  Vector s_;
  Matrix v_;
};

Matrix ridge_solve(const Matrix& x, const Matrix& y, double alpha);

// 10 values log-spaced over [10, 1e6].
std::vector<double> default_alpha_grid();

struct CvScheme {
  std::string kind = "contiguous-chunks";
  std::size_t n_chunks = 5;
};

struct RidgeFit {
  Matrix weights;                       // D' x C
  std::vector<double> alpha_per_channel;
  CvScheme cv;
  Matrix cv_scores;                     // n_alphas x C, mean held-out correlation
};

// Contiguous-chunk cross-validation: each chunk of consecutive rows is held
// out in turn; per-channel alpha maximises mean held-out correlation (ties go
// to the smaller alpha); the final fit uses all rows.
RidgeFit ridge_cv(const Matrix& x, const Matrix& y, std::span<const double> alphas, std::size_t n_chunks = 5);

// Per-column Pearson correlation; 0 where either column has zero variance.
std::vector<double> column_correlations(const Matrix& a, const Matrix& b);

// Column z-scoring with statistics from one data set; zero-variance columns
// keep unit scale.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;

  // Contiguous final block of round(test_frac * n) rows held out.
  static Split tail(Index n, double test_frac, Index skip_head = 0);
};

Matrix take_rows(const Matrix& x, std::span<const Index> rows);

struct EncodingResult {
  std::vector<std::string> channel_ids;
  std::vector<double> r;
  std::vector<double> alpha;
  std::optional<Matrix> per_lag_r;          // C x L
  std::optional<std::vector<double>> best_lag;
  std::vector<double> lags;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct FmriOptions {
  std::vector<std::size_t> delays = {1, 2, 3, 4};
  std::vector<double> alphas = default_alpha_grid();
  double test_frac = 0.2;
  std::size_t n_chunks = 5;
  LanczosOptions lanczos;
};

// Lanczos-downsampled, FIR-delayed design on a regular grid.
Matrix fmri_design(const IrregularFeatureSeries& features, double period, std::size_t n_times,
                   std::span<const std::size_t> delays, const LanczosOptions& lanczos = {});

// downsample -> delays -> ridge_cv on the training block -> Pearson R on the
// held-out block. The first max(delays) rows (zero-padded history) are neither
// fitted nor scored.
EncodingResult encode_fmri(const IrregularFeatureSeries& features, const ResponseSeries& response,
                           const FmriOptions& options = {});

struct EcogOptions {
  std::size_t n_lags = 128;
  double lag_lo = -2.0;
  double lag_hi = 2.0;
  std::vector<double> alphas = default_alpha_grid();
  double test_frac = 0.2;
  std::size_t n_chunks = 5;
};

std::vector<double> lag_grid(std::size_t n_lags, double lo, double hi);

// One ridge model per lag predicting the response at onset + lag from the
// per-word feature vector. Only events whose every lag falls inside the
// recording are used, so all lags share one design (and one SVD per fold).
EncodingResult encode_ecog(const IrregularFeatureSeries& features, const ResponseSeries& response,
                           const EcogOptions& options = {});

}  // namespace layerscope
