#include <algorithm>
#include <atomic>
#include <numeric>
#include <utility>
#include <vector>

#include "geossl/error.hpp"
#include "geossl/graph.hpp"
#include "geossl/parallel.hpp"
#include "geossl/rng.hpp"

namespace geossl::graph {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Candidate = std::pair<double, std::uint32_t>;

class PointView {
 public:
  explicit PointView(const Eigen::MatrixXd& points)
      : rows_(points), dim_(static_cast<std::size_t>(points.cols())) {}

  const double* row(std::size_t i) const { return rows_.data() + i * dim_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }

  double distance(std::size_t a, std::size_t b) const {
    const double* x = row(a);
    const double* y = row(b);
    double s = 0.0;
    for (std::size_t t = 0; t < dim_; ++t) {
      const double d = x[t] - y[t];
      s += d * d;
    }
    return s;
  }

 private:
  RowMatrix rows_;
  std::size_t dim_;
};

// Splits recursively on the hyperplane bisecting two random member points.
// Returns leaf_of[i] for every point.
std::vector<std::uint32_t> build_tree(const PointView& pts, std::size_t leaf_size, Rng& rng,
                                      std::vector<std::vector<std::uint32_t>>& leaves) {
  const std::size_t n = pts.size();
  const std::size_t dim = pts.dim();
  std::vector<std::uint32_t> leaf_of(n);
  std::vector<std::vector<std::uint32_t>> stack;
  stack.emplace_back(n);
  std::iota(stack.back().begin(), stack.back().end(), 0u);
  std::vector<double> normal(dim);
  while (!stack.empty()) {
    std::vector<std::uint32_t> node = std::move(stack.back());
    stack.pop_back();
    if (node.size() <= leaf_size) {
      const auto id = static_cast<std::uint32_t>(leaves.size());
      for (std::uint32_t i : node) leaf_of[i] = id;
      leaves.push_back(std::move(node));
      continue;
    }
    const std::size_t ia = rng.below(node.size());
    std::size_t ib = rng.below(node.size() - 1);
    if (ib >= ia) ++ib;
    const double* a = pts.row(node[ia]);
    const double* b = pts.row(node[ib]);
    double offset = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
      normal[t] = a[t] - b[t];
      offset += normal[t] * 0.5 * (a[t] + b[t]);
    }
    std::vector<std::uint32_t> left, right;
    for (std::uint32_t i : node) {
      const double* x = pts.row(i);
      double s = -offset;
      for (std::size_t t = 0; t < dim; ++t) s += normal[t] * x[t];
      (s > 0.0 ? left : right).push_back(i);
    }
    if (left.empty() || right.empty()) {
      // Coincident pivots or duplicate points: fall back to a random halving.
      for (std::size_t i = node.size() - 1; i > 0; --i) std::swap(node[i], node[rng.below(i + 1)]);
      const std::size_t half = node.size() / 2;
      left.assign(node.begin(), node.begin() + static_cast<std::ptrdiff_t>(half));
      right.assign(node.begin() + static_cast<std::ptrdiff_t>(half), node.end());
    }
    stack.push_back(std::move(left));
    stack.push_back(std::move(right));
  }
  return leaf_of;
}

// Keeps the k closest distinct candidates, ordered by (distance, index).
void select_top_k(std::vector<Candidate>& cand, std::size_t k) {
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  if (cand.size() > k) cand.resize(k);
}

}  // namespace

std::vector<std::uint32_t> ann_knn(const Eigen::MatrixXd& points, std::size_t k, const AnnOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k >= n) throw ParameterError("ann_knn: need 0 < k < n");
  if (options.trees == 0) throw ParameterError("ann_knn: need at least one tree");
  const PointView pts(points);
  const std::size_t leaf_size = std::max(options.leaf_size, k + 1);

  std::vector<std::vector<std::vector<std::uint32_t>>> forest_leaves(options.trees);
  std::vector<std::vector<std::uint32_t>> forest_leaf_of(options.trees);
  parallel_for(0, options.trees, [&](std::size_t t) {
    Rng rng(derive_seed(options.seed, t));
    forest_leaf_of[t] = build_tree(pts, leaf_size, rng, forest_leaves[t]);
  });

  std::vector<std::uint32_t> lists(n * k);
  parallel_for(0, n, [&](std::size_t i) {
    std::vector<Candidate> cand;
    std::vector<std::uint32_t> ids;
    for (std::size_t t = 0; t < options.trees; ++t) {
      const auto& leaf = forest_leaves[t][forest_leaf_of[t][i]];
      ids.insert(ids.end(), leaf.begin(), leaf.end());
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::uint32_t j : ids) {
      if (j != i) cand.emplace_back(pts.distance(i, j), j);
    }
    if (cand.size() < k) {
      // Tiny leaves: pad deterministically with random points.
      Rng pad(derive_seed(options.seed ^ 0xA5A5A5A5ULL, i));
      while (cand.size() < k) {
        const auto j = static_cast<std::uint32_t>(pad.below(n));
        if (j != i && std::none_of(cand.begin(), cand.end(), [j](const Candidate& c) { return c.second == j; })) {
          cand.emplace_back(pts.distance(i, j), j);
        }
      }
    }
    select_top_k(cand, k);
    for (std::size_t e = 0; e < k; ++e) lists[i * k + e] = cand[e].second;
  });

  // Neighbor-of-neighbor refinement over forward and reverse lists. Each round
  // reads the previous round's lists only, so the result is independent of
  // the thread count.
  const std::size_t fanout = std::min(options.refine_fanout, k);
  for (std::size_t round = 0; round < options.refine_iterations; ++round) {
    std::vector<std::vector<std::uint32_t>> reverse(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t e = 0; e < fanout; ++e) {
        auto& r = reverse[lists[j * k + e]];
        if (r.size() < 2 * fanout) r.push_back(static_cast<std::uint32_t>(j));
      }
    }
    std::vector<std::uint32_t> next(n * k);
    std::atomic<bool> changed{false};
    parallel_for(0, n, [&](std::size_t i) {
      std::vector<std::uint32_t> ids(lists.begin() + static_cast<std::ptrdiff_t>(i * k),
                                     lists.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
      const auto expand = [&](std::uint32_t j) {
        for (std::size_t f = 0; f < fanout; ++f) ids.push_back(lists[j * k + f]);
        ids.insert(ids.end(), reverse[j].begin(), reverse[j].end());
      };
      for (std::size_t e = 0; e < fanout; ++e) expand(lists[i * k + e]);
      for (std::uint32_t j : reverse[i]) {
        ids.push_back(j);
        expand(j);
      }
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      std::vector<Candidate> cand;
      cand.reserve(ids.size());
      for (std::uint32_t j : ids) {
        if (j != i) cand.emplace_back(pts.distance(i, j), j);
      }
      select_top_k(cand, k);
      for (std::size_t e = 0; e < k; ++e) {
        next[i * k + e] = cand[e].second;
        if (cand[e].second != lists[i * k + e]) changed = true;
      }
    });
    lists = std::move(next);
    if (!changed) break;
  }
  return lists;
}

}  // namespace geossl::graph
