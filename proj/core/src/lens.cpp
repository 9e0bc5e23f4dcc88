#include "layerscope/lens.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/random.hpp"

namespace layerscope {

namespace {

[[noreturn]] void lens_error(const std::string& code, const std::string& message) {
  throw Error("lens", code, message);
}

void check_pair(const Matrix& h_layer, const Matrix& h_final) {
  if (h_layer.rows() != h_final.rows() || h_layer.cols() != h_final.cols())
    lens_error("invalid-shape", "layer and final activations must have the same shape");
  if (h_layer.rows() < 2) lens_error("invalid-shape", "need at least 2 samples");
  if (!h_layer.allFinite() || !h_final.allFinite()) lens_error("non-finite", "activations contain non-finite values");
}

Matrix augment(const Matrix& h) {
  Matrix out(h.rows(), h.cols() + 1);
  out.leftCols(h.cols()) = h;
  out.col(h.cols()).setOnes();
  return out;
}

// Stacked parameters C = [A^T; b^T], so predictions are [H, 1] C.
AffineLens from_stacked(const Matrix& c, int layer, LensMethod method) {
  const Index d = c.cols();
  AffineLens lens;
  lens.layer = layer;
  lens.a = c.topRows(d).transpose();
  lens.b = c.row(d).transpose();
  lens.method = method;
  return lens;
}

double mse(const Matrix& pred, const Matrix& target) {
  return (pred - target).squaredNorm() / static_cast<double>(target.size());
}

}  // namespace

std::string to_string(LensMethod method) { return method == LensMethod::direct ? "direct" : "gradient"; }

LensMethod parse_lens_method(const std::string& text) {
  if (text == "direct") return LensMethod::direct;
  if (text == "gradient") return LensMethod::gradient;
  lens_error("invalid-argument", "unknown lens method '" + text + "'");
}

Matrix AffineLens::apply(const Matrix& h) const {
  if (h.cols() != a.cols()) lens_error("invalid-shape", "activation width does not match the lens");
  return (h * a.transpose()).rowwise() + b.transpose();
}

Unembedding::Unembedding(Matrix u_in, std::optional<Vector> bias_in) : u(std::move(u_in)), bias(std::move(bias_in)) {
  if (u.rows() < 2) lens_error("invalid-unembedding", "vocabulary must have at least 2 entries");
  if (!u.allFinite()) lens_error("non-finite", "unembedding contains non-finite values");
  if (bias && bias->size() != u.rows()) lens_error("invalid-unembedding", "bias length must equal the vocabulary size");
}

AffineLens fit_lens_direct(const Matrix& h_layer, const Matrix& h_final, int layer) {
  check_pair(h_layer, h_final);
  if (h_layer.rows() <= h_layer.cols())
    lens_error("underdetermined", "need more samples (" + std::to_string(h_layer.rows()) + ") than dimensions (" +
                                      std::to_string(h_layer.cols()) + ")");
  const Matrix x = augment(h_layer);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
  if (cod.rank() < x.cols())
    warn("lens", "design is rank deficient (rank " + std::to_string(cod.rank()) + " of " + std::to_string(x.cols()) +
                     "); using the minimum-norm solution");
  return from_stacked(cod.solve(h_final), layer, LensMethod::direct);
}

GradientFit fit_lens_gradient(const Matrix& h_layer, const Matrix& h_final, const GradientOptions& options, int layer) {
  check_pair(h_layer, h_final);
  if (!(options.lr >= 0.0) || !std::isfinite(options.lr)) lens_error("invalid-argument", "learning rate must be >= 0");
  if (options.epochs < 1) lens_error("invalid-argument", "epochs must be >= 1");
  if (options.batch_size < 1) lens_error("invalid-argument", "batch size must be >= 1");
  if (!(options.val_frac > 0.0 && options.val_frac < 1.0)) lens_error("invalid-argument", "val_frac must lie in (0, 1)");

  const auto n = static_cast<std::size_t>(h_layer.rows());
  const Index d = h_layer.cols();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng split_rng(derive_seed(options.seed, 0));
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t n_val =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(options.val_frac * static_cast<double>(n))), 1, n - 1);
  std::vector<Index> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  const Matrix x = augment(h_layer);
  Matrix x_val(static_cast<Index>(n_val), d + 1), y_val(static_cast<Index>(n_val), d);
  for (std::size_t i = 0; i < n_val; ++i) {
    x_val.row(static_cast<Index>(i)) = x.row(val_rows[i]);
    y_val.row(static_cast<Index>(i)) = h_final.row(val_rows[i]);
  }
  Matrix x_train(static_cast<Index>(train_rows.size()), d + 1), y_train(static_cast<Index>(train_rows.size()), d);
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    x_train.row(static_cast<Index>(i)) = x.row(train_rows[i]);
    y_train.row(static_cast<Index>(i)) = h_final.row(train_rows[i]);
  }

  Matrix c = Matrix::Zero(d + 1, d);
  c.topRows(d).setIdentity();
  Matrix m = Matrix::Zero(d + 1, d);
  Matrix v = Matrix::Zero(d + 1, d);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  GradientFit fit;
  fit.n_train = train_rows.size();
  fit.n_val = n_val;
  fit.val_loss.push_back(mse(x_val * c, y_val));
  Matrix best = c;
  double best_loss = fit.val_loss.front();

  std::vector<Index> batch_order(train_rows.size());
  std::iota(batch_order.begin(), batch_order.end(), Index{0});
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, epoch));
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    for (std::size_t start = 0; start < batch_order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(batch_order.size(), start + options.batch_size);
      const auto b = static_cast<Index>(stop - start);
      Matrix xb(b, d + 1), yb(b, d);
      for (Index i = 0; i < b; ++i) {
        xb.row(i) = x_train.row(batch_order[start + static_cast<std::size_t>(i)]);
        yb.row(i) = y_train.row(batch_order[start + static_cast<std::size_t>(i)]);
      }
      const Matrix grad = (2.0 / static_cast<double>(b * d)) * (xb.transpose() * (xb * c - yb));
      ++step;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      c.array() -= options.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    const double train_loss = mse(x_train * c, y_train);
    const double val_loss = mse(x_val * c, y_val);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      lens_error("diverged", "loss became non-finite at epoch " + std::to_string(epoch));
    fit.train_loss.push_back(train_loss);
    fit.val_loss.push_back(val_loss);
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = c;
      fit.best_epoch = epoch;
    }
  }
  fit.lens = from_stacked(best, layer, LensMethod::gradient);
  return fit;
}

double lens_residual(const AffineLens& lens, const Matrix& h_layer, const Matrix& h_final) {
  check_pair(h_layer, h_final);
  return mse(lens.apply(h_layer), h_final);
}

double surprisal_from_logits(const Vector& logits, std::size_t target) {
  if (target >= static_cast<std::size_t>(logits.size()))
    lens_error("target-out-of-range",
               "target " + std::to_string(target) + " outside vocabulary of " + std::to_string(logits.size()));
  const double top = logits.maxCoeff();
  const double sum = (logits.array() - top).exp().sum();
  return (top - logits(static_cast<Index>(target))) + std::log(sum);
}

double surprisal(const AffineLens& lens, const Unembedding& unembed, const Vector& h, std::size_t target) {
  if (h.size() != lens.a.cols() || unembed.u.cols() != lens.dim())
    lens_error("invalid-shape", "lens, unembedding and activation widths disagree");
  Vector logits = unembed.u * (lens.a * h + lens.b);
  if (unembed.bias) logits += *unembed.bias;
  return surprisal_from_logits(logits, target);
}

std::vector<double> surprisals(const AffineLens& lens, const Unembedding& unembed, const Matrix& h,
                               std::span<const std::size_t> targets) {
  if (static_cast<Index>(targets.size()) != h.rows()) lens_error("invalid-shape", "one target per activation row");
  if (h.cols() != lens.a.cols() || unembed.u.cols() != lens.dim())
    lens_error("invalid-shape", "lens, unembedding and activation widths disagree");
  for (std::size_t t : targets)
    if (t >= static_cast<std::size_t>(unembed.vocab_size()))
      lens_error("target-out-of-range",
                 "target " + std::to_string(t) + " outside vocabulary of " + std::to_string(unembed.vocab_size()));

  constexpr Index block = 256;
  const Index n = h.rows();
  std::vector<double> out(static_cast<std::size_t>(n));
  const auto n_blocks = static_cast<std::size_t>((n + block - 1) / block);
  parallel_for(n_blocks, [&](std::size_t blk) {
    const Index start = static_cast<Index>(blk) * block;
    const Index rows = std::min(block, n - start);
    Matrix logits = lens.apply(h.middleRows(start, rows)) * unembed.u.transpose();
    if (unembed.bias) logits.rowwise() += unembed.bias->transpose();
    for (Index i = 0; i < rows; ++i)
      out[static_cast<std::size_t>(start + i)] =
          surprisal_from_logits(logits.row(i).transpose(), targets[static_cast<std::size_t>(start + i)]);
  });
  return out;
}

double mean_surprisal(const AffineLens& lens, const Unembedding& unembed, const Matrix& h,
                      std::span<const std::size_t> targets) {
  const auto s = surprisals(lens, unembed, h, targets);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double normalize_surprisal(double s, std::size_t vocab) {
  if (vocab < 2) lens_error("invalid-argument", "vocabulary must have at least 2 entries");
  return s / std::log(static_cast<double>(vocab));
}

std::filesystem::path lens_bias_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".bias";
  return p;
}

void save_lens(const AffineLens& lens, const std::filesystem::path& path, const Json& extra) {
  if (lens.a.rows() != lens.a.cols() || lens.b.size() != lens.a.rows())
    lens_error("invalid-shape", "lens A must be square and match b");
  Json meta = extra;
  meta["layer"] = lens.layer;
  meta["fit_method"] = to_string(lens.method);
  meta["dim"] = lens.dim();
  Json a_meta = meta;
  a_meta["part"] = "A";
  Json b_meta = meta;
  b_meta["part"] = "b";
  write_lam(path, lens.a, DType::f64, a_meta);
  write_lam(lens_bias_path(path), Matrix(lens.b.transpose()), DType::f64, b_meta);
}

AffineLens load_lens(const std::filesystem::path& path) {
  const LamFile a = read_lam(path);
  const LamFile b = read_lam(lens_bias_path(path));
  if (a.values.rows() != a.values.cols() || b.values.rows() != 1 || b.values.cols() != a.values.cols())
    lens_error("invalid-lens", path.string() + ": A must be d x d and b 1 x d");
  AffineLens lens;
  lens.a = a.values;
  lens.b = b.values.row(0).transpose();
  if (a.manifest) {
    lens.layer = a.manifest->value("layer", 0);
    lens.method = parse_lens_method(a.manifest->value("fit_method", std::string("direct")));
  }
  return lens;
}

}  // namespace layerscope
