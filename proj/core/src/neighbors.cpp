#include "layerscope/neighbors.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "layerscope/error.hpp"
#include "layerscope/parallel.hpp"

namespace layerscope {

namespace {

// Rows per pairwise-distance block. Fixed so that every row's arithmetic is
// the same no matter how blocks are assigned to threads.
constexpr Index kBlockRows = 128;

using Candidate = std::pair<double, Index>;  // (squared distance, index)

NeighborTable neighbor_ranks(const Matrix& points, std::vector<std::size_t> ranks, bool contiguous) {
  const Index n = points.rows();
  if (ranks.empty()) throw Error("neighbors", "invalid-argument", "no neighbor ranks requested");
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  if (ranks.front() < 1 || static_cast<Index>(ranks.back()) > n - 1)
    throw Error("neighbors", "k-out-of-range",
                "neighbor rank " + std::to_string(ranks.back()) + " needs at least " +
                    std::to_string(ranks.back() + 1) + " points, have " + std::to_string(n));

  // Centering removes large common offsets before the expanded-form distance.
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Matrix centered = points.rowwise() - mean;
  const Vector sq = centered.rowwise().squaredNorm();
  const Matrix centered_t = centered.transpose();

  NeighborTable table;
  table.ranks = ranks;
  const auto n_ranks = static_cast<Index>(ranks.size());
  table.distances.resize(n, n_ranks);
  table.indices.resize(n, n_ranks);

  const std::size_t n_blocks = static_cast<std::size_t>((n + kBlockRows - 1) / kBlockRows);
  parallel_for(n_blocks, [&](std::size_t block) {
    const Index start = static_cast<Index>(block) * kBlockRows;
    const Index len = std::min(kBlockRows, n - start);
    const Matrix gram = centered.middleRows(start, len) * centered_t;
    std::vector<Candidate> cand;
    cand.reserve(static_cast<std::size_t>(n - 1));

    for (Index r = 0; r < len; ++r) {
      const Index i = start + r;
      cand.clear();
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        cand.emplace_back(std::max(0.0, sq(i) + sq(j) - 2.0 * gram(r, j)), j);
      }

      std::vector<Index> chosen(ranks.size());
      if (contiguous) {
        const auto k = static_cast<std::ptrdiff_t>(ranks.back());
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (std::size_t c = 0; c < ranks.size(); ++c) chosen[c] = cand[ranks[c] - 1].second;
      } else {
        // Nested selection from the largest rank down: each nth_element only
        // touches the prefix left by the previous one.
        auto end = cand.end();
        for (std::size_t c = ranks.size(); c-- > 0;) {
          auto nth = cand.begin() + static_cast<std::ptrdiff_t>(ranks[c] - 1);
          std::nth_element(cand.begin(), nth, end);
          chosen[c] = nth->second;
          end = nth;
        }
      }

      // Exact distances for the selected neighbors.
      std::vector<Candidate> exact(ranks.size());
      for (std::size_t c = 0; c < ranks.size(); ++c) {
        const Index j = chosen[c];
        exact[c] = {(points.row(i) - points.row(j)).norm(), j};
      }
      if (contiguous) std::sort(exact.begin(), exact.end());
      for (std::size_t c = 0; c < ranks.size(); ++c) {
        if (!(exact[c].first > 0.0))
          throw Error("neighbors", "duplicate-points",
                      "points " + std::to_string(i) + " and " + std::to_string(exact[c].second) +
                          " coincide; run dedup first");
        table.distances(i, static_cast<Index>(c)) = exact[c].first;
        table.indices(i, static_cast<Index>(c)) = exact[c].second;
      }
    }
  });
  return table;
}

}  // namespace

Index NeighborTable::column_of(std::size_t rank) const {
  auto it = std::lower_bound(ranks.begin(), ranks.end(), rank);
  if (it == ranks.end() || *it != rank)
    throw Error("neighbors", "missing-rank", "rank " + std::to_string(rank) + " not in neighbor table");
  return static_cast<Index>(it - ranks.begin());
}

DedupResult dedup(const Matrix& points, double tol) {
  if (!(tol >= 0.0)) throw Error("neighbors", "invalid-argument", "dedup tolerance must be >= 0");
  const Index n = points.rows();
  std::vector<char> keep(static_cast<std::size_t>(n), 1);

  if (tol == 0.0) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    auto row_less = [&](Index a, Index b) {
      for (Index c = 0; c < points.cols(); ++c) {
        if (points(a, c) < points(b, c)) return true;
        if (points(b, c) < points(a, c)) return false;
      }
      return a < b;
    };
    std::sort(order.begin(), order.end(), row_less);
    for (std::size_t s = 1; s < order.size(); ++s) {
      // Sorted by (row, index): an equal predecessor has the smaller index.
      if ((points.row(order[s]).array() == points.row(order[s - 1]).array()).all())
        keep[static_cast<std::size_t>(order[s])] = 0;
    }
  } else {
    const double tol2 = tol * tol;
    std::vector<Index> reps;
    for (Index i = 0; i < n; ++i) {
      for (Index r : reps) {
        if ((points.row(i) - points.row(r)).squaredNorm() <= tol2) {
          keep[static_cast<std::size_t>(i)] = 0;
          break;
        }
      }
      if (keep[static_cast<std::size_t>(i)]) reps.push_back(i);
    }
  }

  DedupResult result;
  for (Index i = 0; i < n; ++i)
    if (keep[static_cast<std::size_t>(i)]) result.kept.push_back(i);
  result.removed = static_cast<std::size_t>(n) - result.kept.size();
  result.points.resize(static_cast<Index>(result.kept.size()), points.cols());
  for (std::size_t r = 0; r < result.kept.size(); ++r)
    result.points.row(static_cast<Index>(r)) = points.row(result.kept[r]);
  return result;
}

ActivationMatrix dedup(const ActivationMatrix& points, double tol, std::size_t* removed) {
  DedupResult r = dedup(points.values(), tol);
  if (r.points.rows() < 2)
    throw Error("neighbors", "degenerate-dataset", "all points are identical within tolerance");
  if (removed) *removed = r.removed;
  return ActivationMatrix(std::move(r.points), points.meta(), points.dtype());
}

NeighborTable knn(const Matrix& points, std::size_t k_max) {
  if (k_max < 1 || static_cast<Index>(k_max) > points.rows() - 1)
    throw Error("neighbors", "k-out-of-range",
                "k_max=" + std::to_string(k_max) + " must lie in [1, n_samples-1=" +
                    std::to_string(points.rows() - 1) + "]");
  std::vector<std::size_t> ranks(k_max);
  std::iota(ranks.begin(), ranks.end(), std::size_t{1});
  return neighbor_ranks(points, std::move(ranks), true);
}

NeighborTable knn(const ActivationMatrix& points, std::size_t k_max) { return knn(points.values(), k_max); }

NeighborTable knn_at_ranks(const Matrix& points, std::vector<std::size_t> ranks) {
  return neighbor_ranks(points, std::move(ranks), false);
}

}  // namespace layerscope
