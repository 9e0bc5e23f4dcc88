#include "layerscope/rff.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"
#include "layerscope/random.hpp"

namespace layerscope {

RffMap rff_new(std::size_t d_in, std::size_t d_out, double sigma, std::uint64_t seed) {
  if (d_in < 1 || d_out < 1) throw Error("rff", "invalid-argument", "d_in and d_out must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("rff", "invalid-argument", "sigma must be positive");
  RffMap map;
  map.sigma = sigma;
  map.seed = seed;
  map.w.resize(static_cast<Index>(d_out), static_cast<Index>(d_in));
  map.b.resize(static_cast<Index>(d_out));
  Rng rng(derive_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0 / sigma);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  // Row-major draw order so the map does not depend on Eigen's storage order.
  for (Index j = 0; j < map.w.rows(); ++j)
    for (Index i = 0; i < map.w.cols(); ++i) map.w(j, i) = normal(rng);
  for (Index j = 0; j < map.b.size(); ++j) map.b(j) = phase(rng);
  return map;
}

Vector rff_apply(const RffMap& map, const Vector& x) {
  if (x.size() != map.d_in())
    throw Error("rff", "dimension-mismatch",
                "input has " + std::to_string(x.size()) + " dims, map expects " + std::to_string(map.d_in()));
  if (!x.allFinite()) throw Error("rff", "non-finite", "input contains non-finite values");
  const double scale = std::sqrt(2.0 / static_cast<double>(map.d_out()));
  return scale * (map.w * x + map.b).array().cos();
}

Matrix rff_apply_rows(const RffMap& map, const Matrix& x) {
  if (x.cols() != map.d_in())
    throw Error("rff", "dimension-mismatch",
                "input has " + std::to_string(x.cols()) + " dims, map expects " + std::to_string(map.d_in()));
  if (!x.allFinite()) throw Error("rff", "non-finite", "input contains non-finite values");
  const double scale = std::sqrt(2.0 / static_cast<double>(map.d_out()));
  Matrix out = (x * map.w.transpose()).rowwise() + map.b.transpose();
  return scale * out.array().cos();
}

Vector word_vector(std::string_view label, std::size_t d_in, std::uint64_t seed) {
  Rng rng(stable_hash(label, seed));
  std::normal_distribution<double> normal;
  Vector v(static_cast<Index>(d_in));
  for (Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  return v;
}

IrregularFeatureSeries rff_word_features(const Timeline& words, const RffMap& map, std::uint64_t seed) {
  if (words.empty()) throw Error("rff", "empty-timeline", "timeline has no events");
  const auto d_in = static_cast<std::size_t>(map.d_in());
  std::unordered_map<std::string, Index> slot;
  std::vector<Index> row_of(words.size());
  std::vector<const std::string*> distinct;
  for (std::size_t e = 0; e < words.size(); ++e) {
    const std::string& label = words.events()[e].label;
    auto [it, inserted] = slot.try_emplace(label, static_cast<Index>(distinct.size()));
    if (inserted) distinct.push_back(&it->first);
    row_of[e] = it->second;
  }
  Matrix inputs(static_cast<Index>(distinct.size()), static_cast<Index>(d_in));
  parallel_for(distinct.size(), [&](std::size_t i) {
    inputs.row(static_cast<Index>(i)) = word_vector(*distinct[i], d_in, seed).transpose();
  });
  const Matrix mapped = rff_apply_rows(map, inputs);
  Matrix features(static_cast<Index>(words.size()), map.d_out());
  for (std::size_t e = 0; e < words.size(); ++e) features.row(static_cast<Index>(e)) = mapped.row(row_of[e]);
  return IrregularFeatureSeries(words.onsets(), std::move(features));
}

}  // namespace layerscope
