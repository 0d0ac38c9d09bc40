#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "geossl/embeddings.hpp"

namespace geossl::graph {

// Compressed row storage with sorted column indices.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class ConstructionMode { dense, knn_exact, knn_ann };

std::string_view to_string(ConstructionMode mode);
ConstructionMode parse_construction_mode(std::string_view name);

// Random projection forest followed by neighbor-of-neighbor refinement.
struct AnnOptions {
  std::size_t trees = 32;
  std::size_t leaf_size = 32;
  std::size_t refine_iterations = 3;
  std::size_t refine_fanout = 16;  // neighbors of each neighbor explored per round
  std::uint64_t seed = 0;
};

struct BuildOptions {
  double sigma = 1.0;
  std::size_t k = 0;  // 0 = dense
  ConstructionMode mode = ConstructionMode::dense;
  // Dense mode drops weights below this value; 0 keeps every pair.
  double weight_floor = 1e-12;
  AnnOptions ann;
};

struct GeometricGraph {
  SparseMatrix adjacency;  // symmetric, zero diagonal, weights in [0, 1]
  double sigma = 1.0;
  std::size_t k = 0;
  ConstructionMode mode = ConstructionMode::dense;
  // knn modes: the k selected neighbors of node i (before symmetrization)
  // at [i*k, (i+1)*k), nearest first. Empty in dense mode.
  std::vector<std::uint32_t> neighbors;

  std::size_t n() const { return static_cast<std::size_t>(adjacency.rows()); }
  std::size_t nnz() const { return static_cast<std::size_t>(adjacency.nonZeros()); }
  std::span<const std::uint32_t> neighbors_of(std::size_t i) const {
    return std::span<const std::uint32_t>(neighbors).subspan(i * k, k);
  }
};

// exp(-|xi - xj|^2 / (2 sigma^2)).
double gaussian_weight(std::span<const double> xi, std::span<const double> xj, double sigma);

// Rows of `points` are node embeddings. kNN modes symmetrize by union: an
// edge exists if either endpoint selected the other.
GeometricGraph build_graph(const Eigen::MatrixXd& points, const BuildOptions& options);
GeometricGraph build_graph(const embeddings::EmbeddingSet& set, const BuildOptions& options);

// Brute-force and approximate k-nearest-neighbor lists (self excluded, ties
// broken by index), laid out n x k, nearest first.
std::vector<std::uint32_t> exact_knn(const Eigen::MatrixXd& points, std::size_t k);
std::vector<std::uint32_t> ann_knn(const Eigen::MatrixXd& points, std::size_t k, const AnnOptions& options);

struct LaplacianOperator {
  SparseMatrix matrix;     // diag(A 1) - A
  Eigen::VectorXd degree;  // A 1

  std::size_t n() const { return static_cast<std::size_t>(matrix.rows()); }
};

LaplacianOperator laplacian(const GeometricGraph& graph);
LaplacianOperator laplacian(const SparseMatrix& adjacency);

// Continuous extension of the sampled Laplacian evaluated at query u:
//   f(u) (1/n) sum_i k(u, u_i) - (1/n) sum_i f(u_i) k(u, u_i)
// with k the Gaussian kernel of width sigma_n.
double apply_extension_operator(const Eigen::MatrixXd& samples, std::span<const double> f,
                                std::span<const double> u, double f_u, double sigma_n);

// The extension operator evaluated at every sample point.
Eigen::VectorXd apply_extension_operator_at_samples(const Eigen::MatrixXd& samples, std::span<const double> f,
                                                    double sigma_n);

// Mean over nodes of |approx(i) & exact(i)| / k.
double knn_recall(const GeometricGraph& approx, const GeometricGraph& exact);
double knn_recall(std::span<const std::uint32_t> approx, std::span<const std::uint32_t> exact, std::size_t k);

struct GraphStats {
  std::size_t n = 0;
  std::size_t nnz = 0;  // stored entries (twice the undirected edge count)
  bool symmetric = false;
  double degree_min = 0, degree_q25 = 0, degree_median = 0, degree_q75 = 0, degree_max = 0;
};

GraphStats graph_stats(const GeometricGraph& graph);

// `i,j,w` with i < j, one line per undirected edge.
void write_edge_list_csv(const GeometricGraph& graph, const std::filesystem::path& path);

// "MGRF" | version u32 = 1 | n u64 | nnz u64 | row_ptr u64[n+1] | col u32[nnz] | w f64[nnz]
inline constexpr std::uint32_t kMgrfVersion = 1;
void write_adjacency_binary(const GeometricGraph& graph, const std::filesystem::path& path);
SparseMatrix read_adjacency_binary(const std::filesystem::path& path);

}  // namespace geossl::graph
