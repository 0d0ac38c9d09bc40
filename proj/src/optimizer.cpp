#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "geossl/error.hpp"
#include "geossl/nn.hpp"

namespace geossl::nn {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ParameterError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ParameterError("optimizer: learning rate must be positive");
}

void Optimizer::step(GnnModel& model, const Gradients& grads) {
  if (grads.weights.size() != model.weights.size()) throw ShapeError("optimizer: gradient layer count mismatch");
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      for (std::size_t k = 0; k < model.weights[l].size(); ++k) model.weights[l][k] -= lr * grads.weights[l][k];
    }
    ++model.version;
    return;
  }
  if (m_.empty()) {
    m_ = grads.weights;
    v_ = grads.weights;
    for (std::size_t l = 0; l < m_.size(); ++l) {
      for (std::size_t k = 0; k < m_[l].size(); ++k) {
        m_[l][k].setZero();
        v_[l][k].setZero();
      }
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t k = 0; k < model.weights[l].size(); ++k) {
      const Eigen::MatrixXd& g = grads.weights[l][k];
      m_[l][k] = b1 * m_[l][k] + (1.0 - b1) * g;
      v_[l][k] = b2 * v_[l][k] + (1.0 - b2) * g.cwiseProduct(g);
      model.weights[l][k].array() -=
          lr * (m_[l][k].array() / c1) / ((v_[l][k].array() / c2).sqrt() + config_.epsilon);
    }
  }
  ++model.version;
}

void save_model(const GnnModel& model, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes("MGNN");
  w.le<std::uint32_t>(kMgnnVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.widths.size()));
  for (std::size_t width : model.widths) w.le<std::uint32_t>(static_cast<std::uint32_t>(width));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.taps));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.activation));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.architecture));
  for (const auto& layer : model.weights) {
    for (const auto& m : layer) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.le<float>(static_cast<float>(m(i, j)));
      }
    }
  }
  w.write_to(path);
}

GnnModel load_model(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  if (r.bytes(4, "magic") != "MGNN") throw BadMagicError(path.string() + ": bad magic (expected MGNN)");
  if (r.le<std::uint32_t>("version") != kMgnnVersion) throw VersionError(path.string() + ": unsupported MGNN version");
  const auto count = r.le<std::uint32_t>("width count");
  if (count < 2) throw FormatError(path.string() + ": model needs at least two widths");
  GnnModel model;
  for (std::uint32_t i = 0; i < count; ++i) model.widths.push_back(r.le<std::uint32_t>("widths"));
  model.taps = r.le<std::uint32_t>("K");
  const auto act = r.le<std::uint32_t>("activation");
  const auto arch = r.le<std::uint32_t>("architecture");
  if (act > 2 || arch > 1 || model.taps == 0) throw FormatError(path.string() + ": invalid model header");
  model.activation = static_cast<Activation>(act);
  model.architecture = static_cast<Architecture>(arch);
  model.weights.resize(count - 1);
  for (std::size_t l = 0; l + 1 < count; ++l) {
    model.weights[l].resize(model.taps);
    for (auto& m : model.weights[l]) {
      m.resize(static_cast<Eigen::Index>(model.widths[l]), static_cast<Eigen::Index>(model.widths[l + 1]));
      r.require(detail::checked_mul(static_cast<std::uint64_t>(m.size()), 4, "weights"), "weights");
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.le<float>("weights");
      }
    }
  }
  return model;
}

}  // namespace geossl::nn
