#pragma once

#include <cstdint>
#include <string_view>

#include "layerscope/io.hpp"
#include "layerscope/signal.hpp"

namespace layerscope {

// phi(x) = sqrt(2 / D_out) cos(W x + b), W ~ N(0, 1/sigma^2), b ~ U[0, 2 pi).
// E[phi(x) . phi(y)] = exp(-|x - y|^2 / (2 sigma^2)).
struct RffMap {
  Matrix w;  // D_out x D_in
  Vector b;  // D_out
  double sigma = 1.0;
  std::uint64_t seed = 0;

  Index d_in() const noexcept { return w.cols(); }
  Index d_out() const noexcept { return w.rows(); }
};

RffMap rff_new(std::size_t d_in, std::size_t d_out, double sigma, std::uint64_t seed);

Vector rff_apply(const RffMap& map, const Vector& x);
// Maps every row of x.
Matrix rff_apply_rows(const RffMap& map, const Matrix& x);

// Standard normal input vector for a word, seeded by a stable hash of the label.
Vector word_vector(std::string_view label, std::size_t d_in, std::uint64_t seed);

// One row per timeline event: rff_apply(word_vector(label)), at the event onset.
IrregularFeatureSeries rff_word_features(const Timeline& words, const RffMap& map, std::uint64_t seed);

}  // namespace layerscope
