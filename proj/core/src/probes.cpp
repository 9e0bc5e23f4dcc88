#include "layerscope/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "layerscope/error.hpp"
#include "layerscope/random.hpp"

namespace layerscope {

namespace {

[[noreturn]] void probe_error(const std::string& code, const std::string& message) {
  throw Error("probes", code, message);
}

void check_split(const ProbeData& data, Index width, const char* name) {
  if (data.x.rows() < 1) probe_error("invalid-shape", std::string(name) + " split is empty");
  if (static_cast<std::size_t>(data.x.rows()) != data.labels.size())
    probe_error("invalid-shape", std::string(name) + " split: one label per row");
  if (data.x.cols() != width) probe_error("invalid-shape", std::string(name) + " split has a different width");
  if (!data.x.allFinite()) probe_error("non-finite", std::string(name) + " split contains non-finite values");
}

// PCA whitening with training statistics. Directions with variance below
// 1e-10 of the largest are dropped.
struct Whitener {
  Eigen::RowVectorXd mean;
  Matrix map;

  static Whitener fit(const Matrix& x) {
    Whitener out;
    out.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - out.mean;
    const double denom = static_cast<double>(std::max<Index>(x.rows() - 1, 1));
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered / denom);
    if (eig.info() != Eigen::Success) probe_error("eigen-failure", "covariance eigendecomposition failed");
    const Vector& ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0)) probe_error("zero-variance", "training features have zero variance");
    std::vector<Index> keep;
    for (Index i = ev.size() - 1; i >= 0; --i)
      if (ev(i) > 1e-10 * top) keep.push_back(i);
    out.map.resize(x.cols(), static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      out.map.col(static_cast<Index>(j)) = eig.eigenvectors().col(keep[j]) / std::sqrt(ev(keep[j]));
    return out;
  }
  Matrix apply(const Matrix& x) const { return (x.rowwise() - mean) * map; }
};

Matrix scores(const Matrix& x, const Matrix& w, const Eigen::RowVectorXd& bias) {
  return (x * w).rowwise() + bias;
}

}  // namespace

double accuracy(const Matrix& s, std::span<const std::size_t> labels) {
  std::size_t hits = 0;
  for (Index i = 0; i < s.rows(); ++i) {
    Index arg = 0;
    s.row(i).maxCoeff(&arg);
    hits += static_cast<std::size_t>(arg) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

ProbeResult train_classifier_probe(const ProbeData& train, const ProbeData& val, const ProbeData& test,
                                   const ClassifierOptions& options) {
  const Index in_width = train.x.cols();
  check_split(train, in_width, "train");
  check_split(val, in_width, "validation");
  check_split(test, in_width, "test");
  if (options.epochs < 1) probe_error("invalid-argument", "epochs must be >= 1");
  if (options.batch_size < 1) probe_error("invalid-argument", "batch size must be >= 1");
  if (!(options.lr >= 0.0) || !std::isfinite(options.lr)) probe_error("invalid-argument", "learning rate must be >= 0");

  std::size_t classes = options.classes;
  if (classes == 0) classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
  for (const ProbeData* d : {&train, &val, &test})
    for (std::size_t y : d->labels)
      if (y >= classes) probe_error("label-out-of-range", "label " + std::to_string(y) + " >= classes " + std::to_string(classes));
  if (std::adjacent_find(train.labels.begin(), train.labels.end(), std::not_equal_to<>()) == train.labels.end())
    probe_error("single-class", "training labels contain a single class");

  const Whitener z = Whitener::fit(train.x);
  const Matrix x_train = z.apply(train.x);
  const Matrix x_val = z.apply(val.x);
  const Matrix x_test = z.apply(test.x);
  const auto k = static_cast<Index>(classes);
  const Index width = x_train.cols();

  Matrix w = Matrix::Zero(width, k);
  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(k);
  Matrix mw = Matrix::Zero(width, k), vw = Matrix::Zero(width, k);
  Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(k), vb = Eigen::RowVectorXd::Zero(k);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  ProbeResult result;
  result.task = options.task;
  result.metric = "accuracy";
  result.n_train = train.labels.size();
  result.n_val = val.labels.size();
  result.n_test = test.labels.size();
  double best_val = -1.0;
  Matrix best_w = w;
  Eigen::RowVectorXd best_bias = bias;

  std::vector<std::size_t> order(train.labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const auto b = static_cast<Index>(stop - start);
      Matrix xb(b, width);
      for (Index i = 0; i < b; ++i) xb.row(i) = x_train.row(static_cast<Index>(order[start + static_cast<std::size_t>(i)]));
      Matrix p = scores(xb, w, bias);
      for (Index i = 0; i < b; ++i) {
        const double top = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - top).exp();
        p.row(i) /= p.row(i).sum();
        p(i, static_cast<Index>(train.labels[order[start + static_cast<std::size_t>(i)]])) -= 1.0;
      }
      p /= static_cast<double>(b);
      const Matrix gw = xb.transpose() * p;
      const Eigen::RowVectorXd gb = p.colwise().sum();
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      mw = beta1 * mw + (1.0 - beta1) * gw;
      vw = beta2 * vw + (1.0 - beta2) * gw.cwiseAbs2();
      mb = beta1 * mb + (1.0 - beta1) * gb;
      vb = beta2 * vb + (1.0 - beta2) * gb.cwiseAbs2();
      w.array() -= options.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
      bias.array() -= options.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
    }
    if (!w.allFinite() || !bias.allFinite())
      probe_error("diverged", "weights became non-finite at epoch " + std::to_string(epoch));
    const double val_acc = accuracy(scores(x_val, w, bias), val.labels);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_w = w;
      best_bias = bias;
      result.best_epoch = epoch;
    }
  }
  result.val_value = best_val;
  result.value = accuracy(scores(x_test, best_w, best_bias), test.labels);
  return result;
}

double r_squared(const Matrix& y_true, const Matrix& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols())
    probe_error("invalid-shape", "R^2 inputs differ in shape");
  if (y_true.rows() < 2) probe_error("invalid-shape", "R^2 needs at least 2 rows");
  double total = 0.0;
  for (Index c = 0; c < y_true.cols(); ++c) {
    const double sse = (y_true.col(c) - y_pred.col(c)).squaredNorm();
    const double sst = (y_true.col(c).array() - y_true.col(c).mean()).square().sum();
    total += sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  }
  return total / static_cast<double>(y_true.cols());
}

ProbeResult train_regression_probe(const Matrix& x_train, const Matrix& y_train, const Matrix& x_test,
                                   const Matrix& y_test, std::span<const double> alphas, std::size_t n_chunks,
                                   const std::string& task) {
  if (x_train.rows() != y_train.rows() || x_test.rows() != y_test.rows())
    probe_error("invalid-shape", "features and targets must have matching row counts");
  if (x_train.cols() != x_test.cols() || y_train.cols() != y_test.cols())
    probe_error("invalid-shape", "train and test splits have different widths");
  const Standardizer xs = Standardizer::fit(x_train);
  const Standardizer ys = Standardizer::fit(y_train);
  const RidgeFit fit = ridge_cv(xs.apply(x_train), ys.apply(y_train), alphas, n_chunks);
  Matrix pred = xs.apply(x_test) * fit.weights;
  pred = (pred.array().rowwise() * ys.scale.array()).rowwise() + ys.mean.array();

  ProbeResult result;
  result.task = task;
  result.metric = "r_squared";
  result.value = r_squared(y_test, pred);
  result.val_value = std::numeric_limits<double>::quiet_NaN();
  result.n_train = static_cast<std::size_t>(x_train.rows());
  result.n_test = static_cast<std::size_t>(x_test.rows());
  return result;
}

}  // namespace layerscope
