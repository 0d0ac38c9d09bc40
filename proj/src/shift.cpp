#include "geossl/shift.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geossl/error.hpp"
#include "geossl/parallel.hpp"

namespace geossl::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd csr_times(const graph::SparseMatrix& m, const Eigen::MatrixXd& x) {
  if (static_cast<Eigen::Index>(m.cols()) != x.rows()) {
    throw ShapeError("shift: operator has " + std::to_string(m.cols()) + " columns, signal has " +
                     std::to_string(x.rows()) + " rows");
  }
  const RowMatrix xr = x;
  RowMatrix out = RowMatrix::Zero(m.rows(), x.cols());
  const auto n = static_cast<std::size_t>(m.rows());
  parallel_for(0, n, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (graph::SparseMatrix::InnerIterator it(m, row); it; ++it) {
      out.row(row).noalias() += it.value() * xr.row(it.col());
    }
  });
  return out;
}

}  // namespace

std::string_view to_string(LaplacianScale scale) {
  switch (scale) {
    case LaplacianScale::none: return "none";
    case LaplacianScale::inverse_n: return "inverse_n";
  }
  return "unknown";
}

LaplacianScale parse_laplacian_scale(std::string_view name) {
  if (name == "none") return LaplacianScale::none;
  if (name == "inverse_n") return LaplacianScale::inverse_n;
  throw ParameterError("unknown laplacian scale '" + std::string(name) + "'");
}

double laplacian_scale_factor(LaplacianScale scale, std::size_t n) {
  return scale == LaplacianScale::inverse_n ? 1.0 / static_cast<double>(n) : 1.0;
}

SparseShift::SparseShift(graph::SparseMatrix matrix, bool symmetric)
    : matrix_(std::move(matrix)), symmetric_(symmetric) {
  if (matrix_.rows() != matrix_.cols()) throw ShapeError("shift operator must be square");
  if (!symmetric_) {
    transpose_ = matrix_.transpose();
    transpose_.makeCompressed();
  }
}

Eigen::MatrixXd SparseShift::apply(const Eigen::MatrixXd& x) const { return csr_times(matrix_, x); }

Eigen::MatrixXd SparseShift::apply_transpose(const Eigen::MatrixXd& x) const {
  return csr_times(symmetric_ ? matrix_ : transpose_, x);
}

SparseShift laplacian_shift(const graph::LaplacianOperator& lap, double scale) {
  graph::SparseMatrix m = lap.matrix;
  if (scale != 1.0) m *= scale;
  return SparseShift(std::move(m), true);
}

SparseShift mean_aggregation_shift(const graph::GeometricGraph& g) {
  graph::SparseMatrix m = g.adjacency;
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    double d = 0.0;
    for (graph::SparseMatrix::InnerIterator it(m, i); it; ++it) d += it.value();
    if (d > 0.0) {
      for (graph::SparseMatrix::InnerIterator it(m, i); it; ++it) it.valueRef() /= d;
    }
  }
  return SparseShift(std::move(m), false);
}

KernelLaplacianShift::KernelLaplacianShift(const Eigen::MatrixXd& points, double sigma, double scale)
    : points_(points), sigma_(sigma), scale_(scale) {
  if (!(sigma > 0.0)) throw ParameterError("kernel shift: sigma must be positive");
  if (points.rows() < 1) throw ParameterError("kernel shift: empty point set");
}

Eigen::MatrixXd KernelLaplacianShift::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != points_.rows()) throw ShapeError("kernel shift: signal rows must match point count");
  constexpr Eigen::Index kRows = 64;
  constexpr Eigen::Index kCols = 1024;
  const Eigen::Index n = points_.rows();
  const double inv = 1.0 / (2.0 * sigma_ * sigma_);
  const Eigen::VectorXd norms = points_.rowwise().squaredNorm();
  const Eigen::MatrixXd pt = points_.transpose();
  Eigen::MatrixXd out(n, x.cols());
  const auto blocks = static_cast<std::size_t>((n + kRows - 1) / kRows);
  parallel_for(0, blocks, [&](std::size_t b) {
    const Eigen::Index lo = static_cast<Eigen::Index>(b) * kRows;
    const Eigen::Index rows = std::min(kRows, n - lo);
    const Eigen::MatrixXd pi = points_.middleRows(lo, rows);
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(rows);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, x.cols());
    Eigen::MatrixXd k(rows, kCols);
    for (Eigen::Index c0 = 0; c0 < n; c0 += kCols) {
      const Eigen::Index cols = std::min(kCols, n - c0);
      auto tile = k.leftCols(cols);
      tile.noalias() = -2.0 * pi * pt.middleCols(c0, cols);
      tile.colwise() += norms.segment(lo, rows);
      tile.rowwise() += norms.segment(c0, cols).transpose();
      tile = (-inv * tile.array().max(0.0)).exp().matrix();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index j = lo + r - c0;
        if (j >= 0 && j < cols) tile(r, j) = 0.0;
      }
      degree += tile.rowwise().sum();
      acc.noalias() += tile * x.middleRows(c0, cols);
    }
    out.middleRows(lo, rows) = scale_ * (degree.asDiagonal() * x.middleRows(lo, rows) - acc);
  });
  return out;
}

}  // namespace geossl::nn
