#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "layerscope/encoding.hpp"
#include "layerscope/io.hpp"

namespace layerscope {

struct ProbeResult {
  std::string task;
  std::string metric;  // "accuracy" or "r_squared"
  double value = 0.0;  // on the test split
  double val_value = 0.0;  // NaN for regression probes (selection is by CV)
  std::size_t best_epoch = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
};

struct ProbeData {
  Matrix x;
  std::vector<std::size_t> labels;
};

struct ClassifierOptions {
  std::size_t classes = 0;  // 0: one more than the largest training label
  double lr = 5e-3;
  std::size_t epochs = 15;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::string task = "classify";
};

// Softmax regression trained with Adam from zero weights on inputs
// PCA-whitened with training statistics. Returns test accuracy of the epoch with the best
// validation accuracy (earliest on ties).
ProbeResult train_classifier_probe(const ProbeData& train, const ProbeData& val, const ProbeData& test,
                                   const ClassifierOptions& options = {});

double accuracy(const Matrix& scores, std::span<const std::size_t> labels);

// 1 - SSE / SST per column, averaged over columns.
double r_squared(const Matrix& y_true, const Matrix& y_pred);

// ridge_cv on the training split (z-scored), mean test R^2 across targets.
ProbeResult train_regression_probe(const Matrix& x_train, const Matrix& y_train, const Matrix& x_test,
                                   const Matrix& y_test, std::span<const double> alphas, std::size_t n_chunks = 5,
                                   const std::string& task = "regress");

}  // namespace layerscope
