#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "geossl/shift.hpp"

namespace geossl::nn {

enum class Activation { relu, sigmoid, identity };
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// polynomial: X_l = rho(sum_k L^k X_{l-1} W_lk) over the Laplacian.
// sage_mean: same filter form over the neighbor-mean operator with K = 2,
// i.e. a self term plus an aggregated-neighbor term.
enum class Architecture { polynomial, sage_mean };
std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view name);

struct GnnModel {
  std::vector<std::size_t> widths;  // F_0 .. F_L
  std::size_t taps = 1;             // K
  Activation activation = Activation::relu;
  Architecture architecture = Architecture::polynomial;
  // weights[l][k] has shape F_l x F_{l+1}
  std::vector<std::vector<Eigen::MatrixXd>> weights;
  // Bumped by every optimizer step; forward caches remember it.
  std::uint64_t version = 0;

  std::size_t layers() const { return weights.size(); }
  std::size_t parameter_count() const;
};

// Entries uniform in [-a, a], a = 1 / sqrt(K F_in); deterministic per seed.
GnnModel init_model(std::span<const std::size_t> widths, std::size_t taps, Activation activation,
                    std::uint64_t seed, Architecture architecture = Architecture::polynomial);

GnnModel zeros_like(const GnnModel& model);

struct ForwardCache {
  const ShiftOperator* shift = nullptr;  // must outlive the cache unless owned
  std::shared_ptr<const ShiftOperator> owned_shift;
  std::uint64_t model_version = 0;
  std::vector<std::size_t> widths;
  std::size_t taps = 0;
  // powers[l][k] = S^k X_l, pre_activations[l] = Z_{l+1}
  std::vector<std::vector<Eigen::MatrixXd>> powers;
  std::vector<Eigen::MatrixXd> pre_activations;
};

struct ForwardResult {
  Eigen::MatrixXd output;  // raw logits of the final layer
  ForwardCache cache;
};

// Hidden layers apply the model activation; the last layer is linear.
ForwardResult gnn_forward(const GnnModel& model, const ShiftOperator& shift, const Eigen::MatrixXd& x);
ForwardResult gnn_forward(const GnnModel& model, const graph::LaplacianOperator& lap, const Eigen::MatrixXd& x);

struct Gradients {
  std::vector<std::vector<Eigen::MatrixXd>> weights;  // same shapes as the model
  std::optional<Eigen::MatrixXd> input;               // dX_0 when requested

  double squared_norm() const;
  double norm() const;
  Eigen::VectorXd flatten() const;
};

Gradients gnn_backward(const GnnModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                       bool want_input_grad = false);

// Flat parameter vector in layer-major, tap-major, row-major order.
Eigen::VectorXd flatten_parameters(const GnnModel& model);
void assign_parameters(GnnModel& model, const Eigen::VectorXd& flat);

enum class LossKind { mean_l2_onehot, softmax_cross_entropy };
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd gradient;  // d value / d prediction, zero outside the mask
};

// mean_l2_onehot: (1/|T|) || M_T (onehot(y) - Y) ||_2 (Frobenius norm of
// the masked residual). softmax_cross_entropy: mean over T of -log softmax.
// Labels are 1-based. Rows are accumulated in chunks of `chunk_rows`.
LossResult loss_masked(std::span<const int> labels, const Eigen::MatrixXd& predictions,
                       std::span<const std::size_t> mask, LossKind kind, std::size_t chunk_rows = 256);

// Per-row argmax, 1-based, ties to the lowest class.
std::vector<int> predict(const Eigen::MatrixXd& outputs);

double accuracy(std::span<const int> labels, std::span<const int> predicted, std::span<const std::size_t> mask);

enum class OptimizerKind { sgd, adam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);
  void step(GnnModel& model, const Gradients& grads);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<Eigen::MatrixXd>> m_;
  std::vector<std::vector<Eigen::MatrixXd>> v_;
};

// "MGNN" | version u32 = 1 | width count u32 | widths u32[] | K u32
// | activation u32 | architecture u32 | f32 parameters layer-major, tap-major, row-major.
inline constexpr std::uint32_t kMgnnVersion = 1;
void save_model(const GnnModel& model, const std::filesystem::path& path);
GnnModel load_model(const std::filesystem::path& path);

}  // namespace geossl::nn
