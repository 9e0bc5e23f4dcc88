#pragma once

#include <cstddef>
#include <vector>

#include "layerscope/io.hpp"

namespace layerscope {

// Euclidean neighbor distances r_{i,j} for a set of (1-based) neighbor ranks.
// knn() fills ranks 1..k_max; knn_at_ranks() stores only the requested ranks,
// which is what the scale analysis needs when 2k runs into the thousands.
struct NeighborTable {
  std::vector<std::size_t> ranks;  // ascending, 1-based
  Matrix distances;                // n_samples x ranks.size(), rows non-decreasing
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> indices;

  Index n_samples() const noexcept { return distances.rows(); }
  std::size_t k_max() const noexcept { return ranks.empty() ? 0 : ranks.back(); }
  // Column of `rank` in `distances`; throws if the rank was not computed.
  Index column_of(std::size_t rank) const;
};

struct DedupResult {
  Matrix points;
  std::size_t removed = 0;
  std::vector<Index> kept;  // original row of each retained point, ascending
};

// Keeps the first point of every group lying within `tol` of an earlier
// retained point. tol = 0 removes exact duplicates only.
DedupResult dedup(const Matrix& points, double tol);
// Throws Error(neighbors, degenerate-dataset) when every point collapses to one.
ActivationMatrix dedup(const ActivationMatrix& points, double tol, std::size_t* removed);

// Exact kNN with ties broken by smaller index. Requires 1 <= k_max <= n - 1.
NeighborTable knn(const Matrix& points, std::size_t k_max);
NeighborTable knn(const ActivationMatrix& points, std::size_t k_max);

NeighborTable knn_at_ranks(const Matrix& points, std::vector<std::size_t> ranks);

}  // namespace layerscope
