#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "geossl/graph.hpp"
#include "geossl/nn.hpp"
#include "geossl/rng.hpp"
#include "geossl/shift.hpp"

namespace geossl::testing {

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Random symmetric weighted graph with roughly `density` edge probability.
inline graph::SparseMatrix random_adjacency(Rng& rng, std::size_t n, double density) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < density) {
        const double w = rng.uniform(0.05, 1.0);
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
        a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
      }
    }
  }
  graph::SparseMatrix s = a.sparseView();
  s.makeCompressed();
  return s;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  double max_abs_gradient = 0.0;
};

// Central differences of objective(model) over every parameter, compared
// against `analytic` (flattened in parameter order). The error is scaled by
// the largest gradient entry so tiny entries do not dominate.
template <typename Objective>
GradientCheck finite_difference_check(nn::GnnModel model, const Eigen::VectorXd& analytic, Objective objective,
                                      double h = 1e-5) {
  const Eigen::VectorXd theta = nn::flatten_parameters(model);
  Eigen::VectorXd numeric(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd plus = theta;
    Eigen::VectorXd minus = theta;
    plus(i) += h;
    minus(i) -= h;
    nn::assign_parameters(model, plus);
    const double fp = objective(model);
    nn::assign_parameters(model, minus);
    const double fm = objective(model);
    numeric(i) = (fp - fm) / (2 * h);
  }
  GradientCheck out;
  out.max_abs_gradient = std::max(analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
  const double scale = std::max(out.max_abs_gradient, 1e-8);
  out.max_relative_error = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
  return out;
}

}  // namespace geossl::testing
