#include "geossl/baselines.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "geossl/error.hpp"
#include "geossl/parallel.hpp"

namespace geossl::nn {
namespace {

Eigen::MatrixXd rho(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::identity: return z;
  }
  return z;
}

Eigen::MatrixXd rho_prime(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: {
      const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
      return (s * (1.0 - s)).matrix();
    }
    case Activation::identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
  }
  return z;
}

}  // namespace

MlpModel mlp_from_gnn(const GnnModel& model) {
  if (model.taps != 1) throw ParameterError("mlp_from_gnn: only K = 1 models are plain MLPs");
  MlpModel mlp;
  mlp.activation = model.activation;
  for (const auto& layer : model.weights) mlp.weights.push_back(layer.at(0));
  return mlp;
}

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::MatrixXd z = h * model.weights[l];
    h = (l + 1 == model.weights.size()) ? z : rho(model.activation, z);
  }
  return h;
}

std::vector<Eigen::MatrixXd> mlp_backward(const MlpModel& model, const Eigen::MatrixXd& x,
                                          const Eigen::MatrixXd& d_output) {
  const std::size_t layers = model.weights.size();
  std::vector<Eigen::MatrixXd> inputs(layers), pre(layers);
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    inputs[l] = h;
    pre[l] = h * model.weights[l];
    h = (l + 1 == layers) ? pre[l] : rho(model.activation, pre[l]);
  }
  std::vector<Eigen::MatrixXd> grads(layers);
  Eigen::MatrixXd upstream = d_output;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd delta =
        (l + 1 == layers) ? upstream : upstream.cwiseProduct(rho_prime(model.activation, pre[l]));
    grads[l] = inputs[l].transpose() * delta;
    upstream = delta * model.weights[l].transpose();
  }
  return grads;
}

std::vector<int> knn_vote(const Eigen::MatrixXd& reference, std::span<const int> reference_labels, int num_classes,
                          const Eigen::MatrixXd& queries, std::size_t k) {
  const auto n_ref = static_cast<std::size_t>(reference.rows());
  if (k == 0) throw ParameterError("knn_classify: k must be >= 1");
  if (k > n_ref) {
    throw ParameterError("knn_classify: k=" + std::to_string(k) + " exceeds the " + std::to_string(n_ref) +
                         " labeled points");
  }
  if (reference.cols() != queries.cols()) throw ShapeError("knn_classify: dimension mismatch");
  const auto n_query = static_cast<std::size_t>(queries.rows());
  std::vector<int> out(n_query);
  const Eigen::VectorXd ref_norms = reference.rowwise().squaredNorm();
  constexpr std::size_t kBlock = 128;
  const std::size_t blocks = (n_query + kBlock - 1) / kBlock;
  parallel_for(0, blocks, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t rows = std::min(kBlock, n_query - lo);
    Eigen::MatrixXd dist = -2.0 * (queries.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(rows)) *
                                   reference.transpose());
    dist.rowwise() += ref_norms.transpose();
    std::vector<std::pair<double, std::size_t>> cand(n_ref);
    std::vector<int> votes(static_cast<std::size_t>(num_classes) + 1);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n_ref; ++j) cand[j] = {dist(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)), j};
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t t = 0; t < k; ++t) ++votes[static_cast<std::size_t>(reference_labels[cand[t].second])];
      int best = 1;
      for (int c = 2; c <= num_classes; ++c) {
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
      }
      out[lo + r] = best;
    }
  });
  return out;
}

std::vector<int> knn_classify(const embeddings::EmbeddingSet& set, std::size_t k) {
  embeddings::validate(set);
  if (!set.has_split()) throw ParameterError("knn_classify: split tags required");
  const auto train = embeddings::indices_with(set.split, embeddings::Split::train);
  const auto test = embeddings::indices_with(set.split, embeddings::Split::test);
  if (train.empty()) throw ParameterError("knn_classify: empty train split");
  const auto ref = embeddings::subset(set, train);
  const auto qry = embeddings::subset(set, test);
  return knn_vote(ref.data, ref.labels, set.num_classes, qry.data, k);
}

}  // namespace geossl::nn
