#include <algorithm>
#include <cmath>
#include <string>

#include "geossl/error.hpp"
#include "geossl/nn.hpp"

namespace geossl::nn {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mean_l2_onehot: return "mean_l2_onehot";
    case LossKind::softmax_cross_entropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mean_l2_onehot" || name == "l2") return LossKind::mean_l2_onehot;
  if (name == "softmax_cross_entropy" || name == "cross_entropy") return LossKind::softmax_cross_entropy;
  throw ParameterError("unknown loss kind '" + std::string(name) + "'");
}

LossResult loss_masked(std::span<const int> labels, const Eigen::MatrixXd& predictions,
                       std::span<const std::size_t> mask, LossKind kind, std::size_t chunk_rows) {
  if (mask.empty()) throw ParameterError("loss_masked: empty training mask");
  if (labels.size() != static_cast<std::size_t>(predictions.rows())) {
    throw ShapeError("loss_masked: label count does not match prediction rows");
  }
  const auto classes = static_cast<int>(predictions.cols());
  for (std::size_t i : mask) {
    if (i >= labels.size()) throw ShapeError("loss_masked: mask index out of range");
    if (labels[i] < 1 || labels[i] > classes) {
      throw ParameterError("loss_masked: label " + std::to_string(labels[i]) + " outside 1.." +
                           std::to_string(classes));
    }
  }
  const std::size_t chunk = std::max<std::size_t>(1, chunk_rows);
  const double inv_t = 1.0 / static_cast<double>(mask.size());
  LossResult result;
  result.gradient = Eigen::MatrixXd::Zero(predictions.rows(), predictions.cols());

  if (kind == LossKind::mean_l2_onehot) {
    double sum_sq = 0.0;
    for (std::size_t start = 0; start < mask.size(); start += chunk) {
      double partial = 0.0;
      for (std::size_t m = start; m < std::min(mask.size(), start + chunk); ++m) {
        const auto i = static_cast<Eigen::Index>(mask[m]);
        for (int c = 0; c < classes; ++c) {
          const double target = (c + 1 == labels[mask[m]]) ? 1.0 : 0.0;
          const double r = predictions(i, c) - target;
          partial += r * r;
        }
      }
      sum_sq += partial;
    }
    const double norm = std::sqrt(sum_sq);
    result.value = inv_t * norm;
    if (norm > 0.0) {
      const double scale = inv_t / norm;
      for (std::size_t idx : mask) {
        const auto i = static_cast<Eigen::Index>(idx);
        for (int c = 0; c < classes; ++c) {
          const double target = (c + 1 == labels[idx]) ? 1.0 : 0.0;
          result.gradient(i, c) = scale * (predictions(i, c) - target);
        }
      }
    }
    return result;
  }

  double total = 0.0;
  for (std::size_t start = 0; start < mask.size(); start += chunk) {
    double partial = 0.0;
    for (std::size_t m = start; m < std::min(mask.size(), start + chunk); ++m) {
      const auto i = static_cast<Eigen::Index>(mask[m]);
      const double peak = predictions.row(i).maxCoeff();
      const Eigen::RowVectorXd shifted = predictions.row(i).array() - peak;
      const double log_z = std::log(shifted.array().exp().sum());
      const int y = labels[mask[m]] - 1;
      partial += log_z - shifted(y);
      const Eigen::RowVectorXd soft = (shifted.array() - log_z).exp();
      result.gradient.row(i) = inv_t * soft;
      result.gradient(i, y) -= inv_t;
    }
    total += partial;
  }
  result.value = inv_t * total;
  return result;
}

std::vector<int> predict(const Eigen::MatrixXd& outputs) {
  std::vector<int> labels(static_cast<std::size_t>(outputs.rows()));
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < outputs.cols(); ++c) {
      if (outputs(i, c) > outputs(i, best)) best = c;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return labels;
}

double accuracy(std::span<const int> labels, std::span<const int> predicted, std::span<const std::size_t> mask) {
  if (mask.empty()) throw ParameterError("accuracy: empty mask");
  std::size_t hits = 0;
  for (std::size_t i : mask) {
    if (i >= labels.size() || i >= predicted.size()) throw ShapeError("accuracy: mask index out of range");
    if (labels[i] == predicted[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

}  // namespace geossl::nn
