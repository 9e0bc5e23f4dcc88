#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerscope/io.hpp"

namespace layerscope {

enum class LensMethod { direct, gradient };

std::string to_string(LensMethod method);
LensMethod parse_lens_method(const std::string& text);

// h_final ~ A h_layer + b.
struct AffineLens {
  int layer = 0;
  Matrix a;  // d x d
  Vector b;  // d
  LensMethod method = LensMethod::direct;

  Index dim() const noexcept { return a.rows(); }
  // Rows of h mapped through the lens.
  Matrix apply(const Matrix& h) const;
};

struct Unembedding {
  Matrix u;                     // V x d
  std::optional<Vector> bias;   // V

  Unembedding() = default;
  explicit Unembedding(Matrix u, std::optional<Vector> bias = std::nullopt);
  Index vocab_size() const noexcept { return u.rows(); }
};

// Least squares on [H_t, 1] via a complete orthogonal decomposition. Rank
// deficiency produces a warning and the minimum-norm solution.
AffineLens fit_lens_direct(const Matrix& h_layer, const Matrix& h_final, int layer = 0);

struct GradientOptions {
  double lr = 1e-4;
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  double val_frac = 0.1;
  std::uint64_t seed = 0;
};

struct GradientFit {
  AffineLens lens;
  std::vector<double> train_loss;  // per epoch, on the training split
  std::vector<double> val_loss;    // per epoch; index 0 is the initial A = I, b = 0
  std::size_t best_epoch = 0;      // 0 means no epoch beat the initialization
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

// Adam on mean squared error, starting from A = I, b = 0. Keeps the
// parameters of the epoch with the lowest validation loss.
GradientFit fit_lens_gradient(const Matrix& h_layer, const Matrix& h_final, const GradientOptions& options = {},
                              int layer = 0);

// Mean over samples and coordinates of the squared prediction error.
double lens_residual(const AffineLens& lens, const Matrix& h_layer, const Matrix& h_final);

// -log softmax(logits)[target].
double surprisal_from_logits(const Vector& logits, std::size_t target);
double surprisal(const AffineLens& lens, const Unembedding& unembed, const Vector& h, std::size_t target);
// Per-row surprisal for rows of h and their targets.
std::vector<double> surprisals(const AffineLens& lens, const Unembedding& unembed, const Matrix& h,
                               std::span<const std::size_t> targets);
double mean_surprisal(const AffineLens& lens, const Unembedding& unembed, const Matrix& h,
                      std::span<const std::size_t> targets);

double normalize_surprisal(double s, std::size_t vocab);

// A goes to `path`, b (as a 1 x d matrix) to `<path>.bias`; both carry a
// manifest with the layer and fit method.
std::filesystem::path lens_bias_path(const std::filesystem::path& path);
void save_lens(const AffineLens& lens, const std::filesystem::path& path, const Json& extra = Json::object());
AffineLens load_lens(const std::filesystem::path& path);

}  // namespace layerscope
