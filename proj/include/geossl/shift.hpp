#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string_view>

#include "geossl/graph.hpp"

namespace geossl::nn {

// Linear graph operator S used by the polynomial filters sum_k S^k X W_k.
// apply_transpose is needed by the backward pass.
class ShiftOperator {
 public:
  virtual ~ShiftOperator() = default;
  virtual std::size_t n() const = 0;
  virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const = 0;
  virtual Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& x) const = 0;
};

// Scaling applied to the combinatorial Laplacian before it is used as a shift.
//   none:        L
//   inverse_n:   L / n, the sampled Laplacian extension at the sample points
enum class LaplacianScale { none, inverse_n };

std::string_view to_string(LaplacianScale scale);
LaplacianScale parse_laplacian_scale(std::string_view name);

class SparseShift final : public ShiftOperator {
 public:
  // A symmetric matrix reuses its own kernel for the transpose.
  SparseShift(graph::SparseMatrix matrix, bool symmetric);

  std::size_t n() const override { return static_cast<std::size_t>(matrix_.rows()); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& x) const override;

  const graph::SparseMatrix& matrix() const { return matrix_; }

 private:
  graph::SparseMatrix matrix_;
  graph::SparseMatrix transpose_;
  bool symmetric_;
};

SparseShift laplacian_shift(const graph::LaplacianOperator& lap, double scale = 1.0);
double laplacian_scale_factor(LaplacianScale scale, std::size_t n);

// D^{-1} A: the neighbor mean used by mean-aggregation layers. Isolated nodes
// aggregate to zero.
SparseShift mean_aggregation_shift(const graph::GeometricGraph& graph);

// scale * (diag(K 1) - K) with K the dense Gaussian kernel (zero diagonal),
// evaluated on the fly in O(n^2 F) time and O(n F) memory.
class KernelLaplacianShift final : public ShiftOperator {
 public:
  KernelLaplacianShift(const Eigen::MatrixXd& points, double sigma, double scale);

  std::size_t n() const override { return static_cast<std::size_t>(points_.rows()); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& x) const override { return apply(x); }

 private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> points_;
  double sigma_;
  double scale_;
};

}  // namespace geossl::nn
