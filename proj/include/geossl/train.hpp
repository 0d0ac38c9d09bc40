#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geossl/embeddings.hpp"
#include "geossl/graph.hpp"
#include "geossl/manifold.hpp"
#include "geossl/nn.hpp"
#include "geossl/rng.hpp"
#include "geossl/shift.hpp"

namespace geossl::train {

enum class ScheduleMode { fixed, growing };
std::string_view to_string(ScheduleMode mode);
ScheduleMode parse_schedule_mode(std::string_view name);

enum class GrowthStyle { fresh_resample, nested };
std::string_view to_string(GrowthStyle style);
GrowthStyle parse_growth_style(std::string_view name);

struct TrainSchedule {
  ScheduleMode mode = ScheduleMode::fixed;
  std::size_t n0 = 0;       // active node count at step 0
  std::size_t delta_n = 0;  // nodes added per growth event
  std::size_t delta_t = 1;  // steps per graph
  std::size_t total_steps = 100;
  nn::OptimizerConfig optimizer;
  nn::LossKind loss = nn::LossKind::mean_l2_onehot;
  std::uint64_t seed = 0;
  GrowthStyle growth_style = GrowthStyle::fresh_resample;
  // Trace rows every eval_interval steps (0: only the final row).
  std::size_t eval_interval = 1;
  // Adaptive growth: every delta_t steps, grow only when the gradient
  // deviation against a proxy graph reaches proxy_norm - epsilon.
  bool adaptive = false;
  std::optional<double> epsilon;  // default: 10% of the first proxy norm
  std::size_t proxy_factor = 10;
  std::size_t loss_chunk = 256;
  bool record_wall_time = false;
};

// Throws ParameterError on an inconsistent schedule.
void validate(const TrainSchedule& schedule);

// Active node count n0 + floor(step / delta_t) * delta_n.
std::size_t active_nodes(const TrainSchedule& schedule, std::size_t step);

// Largest active node count a non-adaptive schedule reaches, final row included.
std::size_t final_nodes(const TrainSchedule& schedule);

struct GraphSpec {
  double sigma = 1.0;
  std::size_t k = 0;
  graph::ConstructionMode mode = graph::ConstructionMode::dense;
  double weight_floor = 1e-12;
  graph::AnnOptions ann;
  nn::LaplacianScale scale = nn::LaplacianScale::none;
  // Dense polynomial graphs larger than this use the matrix-free kernel
  // Laplacian instead of stored weights.
  std::size_t matrix_free_above = 6000;
};

// Nodes, their graph and the shift operator the model consumes.
struct GraphBundle {
  embeddings::EmbeddingSet nodes;
  std::optional<graph::GeometricGraph> graph;  // absent when matrix-free
  std::shared_ptr<const nn::ShiftOperator> shift;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t n() const { return nodes.size(); }
};

GraphBundle make_bundle(embeddings::EmbeddingSet nodes, const GraphSpec& spec, nn::Architecture arch);

// Supplies node sets for training graphs.
class NodeSource {
 public:
  virtual ~NodeSource() = default;
  // Largest n that draw() accepts.
  virtual std::size_t available() const = 0;
  // n nodes with labels and split tags, deterministic in seed.
  virtual embeddings::EmbeddingSet draw(std::size_t n, std::uint64_t seed) const = 0;
  virtual int num_classes() const = 0;
  virtual std::size_t dim() const = 0;
};

// Fresh uniform samples of a synthetic manifold; split tags are assigned with
// train fraction nu.
class ManifoldSource final : public NodeSource {
 public:
  ManifoldSource(manifold::ManifoldKind kind, manifold::LabelRule rule, double train_fraction);
  std::size_t available() const override;
  embeddings::EmbeddingSet draw(std::size_t n, std::uint64_t seed) const override;
  int num_classes() const override { return rule_.classes; }
  std::size_t dim() const override { return static_cast<std::size_t>(manifold::intrinsic_dim(kind_)) + 1; }

 private:
  manifold::ManifoldKind kind_;
  manifold::LabelRule rule_;
  double train_fraction_;
};

// Uniform node subsets of a finite dataset; split membership is inherited,
// or assigned once with train fraction nu when the set carries none.
class DatasetSource final : public NodeSource {
 public:
  explicit DatasetSource(embeddings::EmbeddingSet set, double train_fraction = 0.5, std::uint64_t split_seed = 0);
  std::size_t available() const override { return set_.size(); }
  embeddings::EmbeddingSet draw(std::size_t n, std::uint64_t seed) const override;
  int num_classes() const override { return set_.num_classes; }
  std::size_t dim() const override { return set_.dim(); }
  const embeddings::EmbeddingSet& set() const { return set_; }

 private:
  embeddings::EmbeddingSet set_;
};

struct GapReport {
  double train_risk = 0.0;
  double test_risk = 0.0;
  double gap = 0.0;  // |test_risk - train_risk|
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  // seconds
};

GapReport generalization_gap(const nn::GnnModel& model, const GraphBundle& bundle, nn::LossKind loss,
                             std::size_t loss_chunk = 256);

// Risks and accuracies from precomputed outputs on the bundle's nodes.
GapReport gap_from_outputs(const Eigen::MatrixXd& outputs, const GraphBundle& bundle, nn::LossKind loss,
                           std::size_t loss_chunk = 256);

struct TraceRow {
  std::size_t step = 0;
  std::size_t n_active = 0;
  double loss = 0.0;
  double train_risk = 0.0;
  double test_risk = 0.0;
  double gap = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_ms = 0.0;
};

struct GrowthEvent {
  std::size_t step = 0;
  std::size_t n_before = 0;
  std::size_t n_after = 0;
  double deviation = 0.0;
  double proxy_norm = 0.0;
  double epsilon = 0.0;
  bool grew = false;
};

struct TrainResult {
  nn::GnnModel model;
  std::vector<TraceRow> trace;
  std::vector<GrowthEvent> growth_events;  // adaptive mode only
  GapReport report;                        // final graph
};

// Full-graph training on one bundle for schedule.total_steps steps. The final
// trace row is evaluated at step total_steps.
TrainResult train_fixed(nn::GnnModel model, const GraphBundle& bundle, const TrainSchedule& schedule);

// Training over the growing sequence n_t = n0 + floor(k / delta_t) delta_n.
// Graph t is drawn with seed derive_seed(schedule.seed, t) (fresh_resample)
// or as a prefix of one pool drawn with derive_seed(schedule.seed, 0)
// (nested), so delta_n = 0 reproduces train_fixed on draw(n0, that seed).
TrainResult train_growing(nn::GnnModel model, const NodeSource& source, const GraphSpec& spec,
                          const TrainSchedule& schedule);

// The bundle train_growing uses for a fixed schedule.
GraphBundle initial_bundle(const NodeSource& source, const GraphSpec& spec, nn::Architecture arch,
                           std::size_t n, std::uint64_t seed);

struct GradientDeviation {
  double deviation = 0.0;   // |g_proxy - g_active|
  double proxy_norm = 0.0;  // |g_proxy|
};

// Gradients over concatenated parameters on the train mask of each bundle.
// The proxy must be strictly larger unless allow_same_size is set.
GradientDeviation estimate_gradient_deviation(const nn::GnnModel& model, const GraphBundle& active,
                                              const GraphBundle& proxy, nn::LossKind loss,
                                              bool allow_same_size = false, std::size_t loss_chunk = 256);

struct SigmaRule {
  enum class Kind { fixed, schedule };
  Kind kind = Kind::fixed;
  double value = 1.0;  // sigma, or c in c * n^(-1/(d+4))

  double at(std::size_t n, int intrinsic_dim) const;
  static SigmaRule fixed(double sigma) { return {Kind::fixed, sigma}; }
  static SigmaRule schedule(double c) { return {Kind::schedule, c}; }
};

struct TransferPoint {
  std::size_t n = 0;
  std::size_t proxy_n = 0;
  double sigma = 0.0;
  double discrepancy = 0.0;
};

// For each n: sample n manifold points plus proxy_factor * n extra points,
// run the fixed model on both graphs (coordinates as features, inverse_n
// Laplacian scale) and average the row-wise output distance over the n
// shared points.
std::vector<TransferPoint> transferability_test(const nn::GnnModel& model, manifold::ManifoldKind kind,
                                                std::span<const std::size_t> n_list, const SigmaRule& sigma_rule,
                                                std::uint64_t seed, std::size_t proxy_factor = 10);

struct ConvergencePoint {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double correlation = 0.0;   // Pearson(L_n f, lambda f) over sample points; 0 for a constant f
  double fitted_scale = 0.0;  // least-squares c with L_n f ~ c lambda f
  double max_abs_output = 0.0;
};

// Extension operator applied to an analytic eigenfunction at the samples.
ConvergencePoint convergence_point(manifold::ManifoldKind kind, std::size_t eigen_index, std::size_t n,
                                   const SigmaRule& sigma_rule, std::uint64_t seed);

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ModelSpec {
  std::vector<std::size_t> hidden;
  std::size_t taps = 2;
  nn::Activation activation = nn::Activation::relu;
  nn::Architecture architecture = nn::Architecture::polynomial;
};

nn::GnnModel make_model(const ModelSpec& spec, std::size_t input_dim, int classes, std::uint64_t seed);

// Initialization seed paired with a run seed by the sweep and CLI drivers.
inline std::uint64_t model_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 0x4d4f44454cULL); }

struct SweepRow {
  std::size_t n = 0;
  GapReport report;
};

// One train_fixed per (n, seed); runs fan out over `jobs` workers.
std::vector<SweepRow> gap_sweep(const NodeSource& source, const GraphSpec& spec, const ModelSpec& model_spec,
                                const TrainSchedule& schedule, std::span<const std::size_t> n_grid,
                                std::span<const std::uint64_t> seeds, std::size_t jobs = 1);

// `step,n_active,loss,train_risk,test_risk,gap,train_acc,test_acc,wall_ms`
void write_trace_csv(std::span<const TraceRow> trace, const std::filesystem::path& path);
std::string trace_csv(std::span<const TraceRow> trace);

// JSON object with every GapReport field.
std::string report_json(const GapReport& report, int indent = -1);

std::string git_describe();

}  // namespace geossl::train
