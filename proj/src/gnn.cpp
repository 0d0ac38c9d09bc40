#include <cmath>
#include <memory>
#include <string>

#include "geossl/error.hpp"
#include "geossl/nn.hpp"
#include "geossl/rng.hpp"

namespace geossl::nn {
namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::identity: return z;
  }
  return z;
}

Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
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

void check_model(const GnnModel& model) {
  if (model.widths.size() < 2) throw ParameterError("gnn: need at least two widths (one layer)");
  if (model.taps == 0) throw ParameterError("gnn: filter order K must be >= 1");
  if (model.weights.size() != model.widths.size() - 1) throw ShapeError("gnn: layer count does not match widths");
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (model.weights[l].size() != model.taps) throw ShapeError("gnn: tap count mismatch in layer " + std::to_string(l));
    for (const auto& w : model.weights[l]) {
      if (static_cast<std::size_t>(w.rows()) != model.widths[l] ||
          static_cast<std::size_t>(w.cols()) != model.widths[l + 1]) {
        throw ShapeError("gnn: weight shape mismatch in layer " + std::to_string(l));
      }
    }
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity") return Activation::identity;
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::polynomial: return "polynomial";
    case Architecture::sage_mean: return "sage-mean";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "polynomial") return Architecture::polynomial;
  if (name == "sage-mean" || name == "sage_mean") return Architecture::sage_mean;
  throw ParameterError("unknown architecture '" + std::string(name) + "'");
}

std::size_t GnnModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : weights) {
    for (const auto& w : layer) count += static_cast<std::size_t>(w.size());
  }
  return count;
}

GnnModel init_model(std::span<const std::size_t> widths, std::size_t taps, Activation activation,
                    std::uint64_t seed, Architecture architecture) {
  if (taps == 0) throw ParameterError("init_model: filter order K must be >= 1");
  if (widths.size() < 2) throw ParameterError("init_model: widths must list at least input and output");
  for (std::size_t w : widths) {
    if (w == 0) throw ParameterError("init_model: zero layer width");
  }
  GnnModel model;
  model.widths.assign(widths.begin(), widths.end());
  model.taps = taps;
  model.activation = activation;
  model.architecture = architecture;
  Rng rng(seed);
  model.weights.resize(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(taps * widths[l]));
    model.weights[l].resize(taps);
    for (auto& w : model.weights[l]) {
      w.resize(static_cast<Eigen::Index>(widths[l]), static_cast<Eigen::Index>(widths[l + 1]));
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
      }
    }
  }
  return model;
}

GnnModel zeros_like(const GnnModel& model) {
  GnnModel z = model;
  for (auto& layer : z.weights) {
    for (auto& w : layer) w.setZero();
  }
  return z;
}

ForwardResult gnn_forward(const GnnModel& model, const ShiftOperator& shift, const Eigen::MatrixXd& x) {
  check_model(model);
  if (static_cast<std::size_t>(x.cols()) != model.widths.front()) {
    throw ShapeError("gnn_forward: input width " + std::to_string(x.cols()) + " != F_0 = " +
                     std::to_string(model.widths.front()));
  }
  if (static_cast<std::size_t>(x.rows()) != shift.n()) {
    throw ShapeError("gnn_forward: " + std::to_string(x.rows()) + " input rows for a " + std::to_string(shift.n()) +
                     "-node graph");
  }
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.shift = &shift;
  cache.model_version = model.version;
  cache.widths = model.widths;
  cache.taps = model.taps;
  const std::size_t layers = model.layers();
  cache.powers.resize(layers);
  cache.pre_activations.resize(layers);

  Eigen::MatrixXd current = x;
  for (std::size_t l = 0; l < layers; ++l) {
    auto& powers = cache.powers[l];
    powers.resize(model.taps);
    powers[0] = std::move(current);
    for (std::size_t k = 1; k < model.taps; ++k) powers[k] = shift.apply(powers[k - 1]);
    Eigen::MatrixXd z = powers[0] * model.weights[l][0];
    for (std::size_t k = 1; k < model.taps; ++k) z.noalias() += powers[k] * model.weights[l][k];
    if (!z.allFinite()) throw NumericError("gnn_forward: non-finite pre-activation in layer " + std::to_string(l));
    const bool last = l + 1 == layers;
    current = last ? z : activate(model.activation, z);
    cache.pre_activations[l] = std::move(z);
  }
  result.output = std::move(current);
  return result;
}

ForwardResult gnn_forward(const GnnModel& model, const graph::LaplacianOperator& lap, const Eigen::MatrixXd& x) {
  auto shift = std::make_shared<const SparseShift>(laplacian_shift(lap));
  ForwardResult result = gnn_forward(model, *shift, x);
  result.cache.owned_shift = std::move(shift);
  return result;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& layer : weights) {
    for (const auto& w : layer) s += w.squaredNorm();
  }
  return s;
}

double Gradients::norm() const { return std::sqrt(squared_norm()); }

Eigen::VectorXd Gradients::flatten() const {
  std::size_t count = 0;
  for (const auto& layer : weights) {
    for (const auto& w : layer) count += static_cast<std::size_t>(w.size());
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(count));
  Eigen::Index pos = 0;
  for (const auto& layer : weights) {
    for (const auto& w : layer) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) out(pos++) = w(i, j);
      }
    }
  }
  return out;
}

Gradients gnn_backward(const GnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                       bool want_input_grad) {
  check_model(model);
  if (cache.shift == nullptr || cache.powers.size() != model.layers()) {
    throw ParameterError("gnn_backward: cache does not come from a forward pass of this model");
  }
  if (cache.model_version != model.version || cache.widths != model.widths || cache.taps != model.taps) {
    throw ParameterError("gnn_backward: stale forward cache (model changed since the forward pass)");
  }
  const auto n = static_cast<Eigen::Index>(cache.shift->n());
  if (d_output.rows() != n || static_cast<std::size_t>(d_output.cols()) != model.widths.back()) {
    throw ShapeError("gnn_backward: output gradient has the wrong shape");
  }
  Gradients grads;
  const std::size_t layers = model.layers();
  grads.weights.resize(layers);
  Eigen::MatrixXd d_x = d_output;
  for (std::size_t step = 0; step < layers; ++step) {
    const std::size_t l = layers - 1 - step;
    const bool last = l + 1 == layers;
    const Eigen::MatrixXd d_z =
        last ? d_x : d_x.cwiseProduct(activation_derivative(model.activation, cache.pre_activations[l]));
    grads.weights[l].resize(model.taps);
    for (std::size_t k = 0; k < model.taps; ++k) grads.weights[l][k] = cache.powers[l][k].transpose() * d_z;
    if (l > 0 || want_input_grad) {
      // sum_k (S^T)^k dZ W_k^T, evaluated Horner-style.
      Eigen::MatrixXd acc = d_z * model.weights[l][model.taps - 1].transpose();
      for (std::size_t k = model.taps - 1; k-- > 0;) {
        acc = cache.shift->apply_transpose(acc);
        acc.noalias() += d_z * model.weights[l][k].transpose();
      }
      d_x = std::move(acc);
    }
  }
  if (want_input_grad) grads.input = std::move(d_x);
  return grads;
}

Eigen::VectorXd flatten_parameters(const GnnModel& model) {
  Gradients as_grads;
  as_grads.weights = model.weights;
  return as_grads.flatten();
}

void assign_parameters(GnnModel& model, const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != model.parameter_count()) {
    throw ShapeError("assign_parameters: flat vector length does not match the model");
  }
  Eigen::Index pos = 0;
  for (auto& layer : model.weights) {
    for (auto& w : layer) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat(pos++);
      }
    }
  }
  ++model.version;
}

}  // namespace geossl::nn
