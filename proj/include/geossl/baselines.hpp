#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "geossl/embeddings.hpp"
#include "geossl/nn.hpp"

namespace geossl::nn {

// Plain per-node multilayer perceptron X -> rho(X W_1) -> ... -> X W_L,
// kept independent of the graph code path.
struct MlpModel {
  std::vector<Eigen::MatrixXd> weights;
  Activation activation = Activation::relu;
};

// The k = 0 taps of a K = 1 GNN.
MlpModel mlp_from_gnn(const GnnModel& model);

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x);

// Parameter gradients of <d_output, mlp_forward(x)>.
std::vector<Eigen::MatrixXd> mlp_backward(const MlpModel& model, const Eigen::MatrixXd& x,
                                          const Eigen::MatrixXd& d_output);

// Majority vote of the k nearest train-split rows (Euclidean), ties to the
// lowest class. Returns one label per test-split row, in row order.
std::vector<int> knn_classify(const embeddings::EmbeddingSet& set, std::size_t k);

// Same vote for arbitrary query rows against a labeled reference set.
std::vector<int> knn_vote(const Eigen::MatrixXd& reference, std::span<const int> reference_labels, int num_classes,
                          const Eigen::MatrixXd& queries, std::size_t k);

}  // namespace geossl::nn
