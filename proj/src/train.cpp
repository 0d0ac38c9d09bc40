#include "geossl/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include "geossl/error.hpp"
#include "geossl/rng.hpp"

#ifndef GEOSSL_GIT_DESCRIBE
#define GEOSSL_GIT_DESCRIBE "unknown"
#endif

namespace geossl::train {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kProxyStream = 1'000'000;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

nn::Gradients masked_gradient(const nn::GnnModel& model, const GraphBundle& bundle, nn::LossKind loss,
                              std::size_t chunk) {
  auto fwd = nn::gnn_forward(model, *bundle.shift, bundle.nodes.data);
  auto value = nn::loss_masked(bundle.nodes.labels, fwd.output, bundle.train, loss, chunk);
  return nn::gnn_backward(model, fwd.cache, value.gradient);
}

// Yields the graph for each step and the graph of the final evaluation.
class BundleProvider {
 public:
  virtual ~BundleProvider() = default;
  virtual const GraphBundle& at_step(std::size_t step, const nn::GnnModel& model) = 0;
  virtual const GraphBundle& final_bundle(std::size_t total_steps, const nn::GnnModel& model) = 0;
  virtual std::vector<GrowthEvent> take_events() { return {}; }
};

class FixedProvider final : public BundleProvider {
 public:
  explicit FixedProvider(const GraphBundle& bundle) : bundle_(bundle) {}
  const GraphBundle& at_step(std::size_t, const nn::GnnModel&) override { return bundle_; }
  const GraphBundle& final_bundle(std::size_t, const nn::GnnModel&) override { return bundle_; }

 private:
  const GraphBundle& bundle_;
};

class GrowingProvider final : public BundleProvider {
 public:
  GrowingProvider(const NodeSource& source, const GraphSpec& spec, nn::Architecture arch,
                  const TrainSchedule& schedule)
      : source_(source), spec_(spec), arch_(arch), schedule_(schedule) {
    const std::size_t need = schedule.adaptive ? schedule.n0 : final_nodes(schedule);
    if (need > source.available()) {
      throw ParameterError("node source exhausted: schedule needs " + std::to_string(need) + " nodes, " +
                           std::to_string(source.available()) + " available");
    }
    if (schedule.growth_style == GrowthStyle::nested) {
      pool_ = source.draw(need, derive_seed(schedule.seed, 0));
    }
  }

  const GraphBundle& at_step(std::size_t step, const nn::GnnModel& model) override {
    if (schedule_.adaptive) return adaptive_step(step, model);
    return build(step / schedule_.delta_t, active_nodes(schedule_, step));
  }

  const GraphBundle& final_bundle(std::size_t total_steps, const nn::GnnModel& model) override {
    if (schedule_.adaptive) {
      return at_step(0, model);
    }
    return build(total_steps / schedule_.delta_t, active_nodes(schedule_, total_steps));
  }

  std::vector<GrowthEvent> take_events() override { return std::move(events_); }

 private:
  const GraphBundle& build(std::size_t event, std::size_t n) {
    if (current_ && current_n_ == n && (event == current_event_ || schedule_.delta_n == 0 || schedule_.adaptive)) {
      return *current_;
    }
    embeddings::EmbeddingSet nodes;
    if (schedule_.growth_style == GrowthStyle::nested) {
      if (n > pool_.size()) pool_ = source_.draw(n, derive_seed(schedule_.seed, 0));
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      nodes = embeddings::subset(pool_, rows);
    } else {
      nodes = source_.draw(n, derive_seed(schedule_.seed, event));
    }
    current_ = make_bundle(std::move(nodes), spec_, arch_);
    current_event_ = event;
    current_n_ = n;
    return *current_;
  }

  const GraphBundle& adaptive_step(std::size_t step, const nn::GnnModel& model) {
    if (!current_) return build(0, schedule_.n0);
    if (step == 0 || step % schedule_.delta_t != 0 || schedule_.delta_n == 0) return *current_;
    const std::size_t n = current_n_;
    const std::size_t proxy_n = n * schedule_.proxy_factor;
    GrowthEvent event;
    event.step = step;
    event.n_before = n;
    event.n_after = n;
    if (proxy_n > n && proxy_n <= source_.available()) {
      const auto proxy = make_bundle(source_.draw(proxy_n, derive_seed(schedule_.seed, kProxyStream + checks_)),
                                     spec_, arch_);
      const auto dev = estimate_gradient_deviation(model, *current_, proxy, schedule_.loss, false,
                                                   schedule_.loss_chunk);
      if (!epsilon_) epsilon_ = schedule_.epsilon.value_or(0.1 * dev.proxy_norm);
      event.deviation = dev.deviation;
      event.proxy_norm = dev.proxy_norm;
      event.epsilon = *epsilon_;
      const std::size_t grown = n + schedule_.delta_n;
      if (dev.deviation >= dev.proxy_norm - *epsilon_ && grown <= source_.available()) {
        event.grew = true;
        event.n_after = grown;
      }
    }
    ++checks_;
    events_.push_back(event);
    if (event.grew) return build(current_event_ + 1, event.n_after);
    return *current_;
  }

  const NodeSource& source_;
  const GraphSpec& spec_;
  nn::Architecture arch_;
  const TrainSchedule& schedule_;
  embeddings::EmbeddingSet pool_;
  std::optional<GraphBundle> current_;
  std::size_t current_event_ = 0;
  std::size_t current_n_ = 0;
  std::size_t checks_ = 0;
  std::optional<double> epsilon_;
  std::vector<GrowthEvent> events_;
};

TraceRow make_row(std::size_t step, double loss, const GapReport& gap, double wall_ms) {
  TraceRow row;
  row.step = step;
  row.n_active = gap.n;
  row.loss = loss;
  row.train_risk = gap.train_risk;
  row.test_risk = gap.test_risk;
  row.gap = gap.gap;
  row.train_acc = gap.train_accuracy;
  row.test_acc = gap.test_accuracy;
  row.wall_ms = wall_ms;
  return row;
}

TrainResult run_training(nn::GnnModel model, BundleProvider& provider, const TrainSchedule& schedule) {
  validate(schedule);
  const auto start = Clock::now();
  const auto wall = [&] { return schedule.record_wall_time ? elapsed_ms(start) : 0.0; };
  TrainResult result;
  nn::Optimizer optimizer(schedule.optimizer);
  for (std::size_t step = 0; step < schedule.total_steps; ++step) {
    const GraphBundle& bundle = provider.at_step(step, model);
    try {
      auto fwd = nn::gnn_forward(model, *bundle.shift, bundle.nodes.data);
      auto loss = nn::loss_masked(bundle.nodes.labels, fwd.output, bundle.train, schedule.loss, schedule.loss_chunk);
      if (!std::isfinite(loss.value)) throw DivergenceError("non-finite training loss", step);
      if (schedule.eval_interval > 0 && step % schedule.eval_interval == 0) {
        const auto gap = gap_from_outputs(fwd.output, bundle, schedule.loss, schedule.loss_chunk);
        result.trace.push_back(make_row(step, loss.value, gap, wall()));
      }
      auto grads = nn::gnn_backward(model, fwd.cache, loss.gradient);
      if (!std::isfinite(grads.squared_norm())) throw DivergenceError("non-finite gradient", step);
      optimizer.step(model, grads);
    } catch (const DivergenceError&) {
      throw;
    } catch (const NumericError& e) {
      throw DivergenceError(e.what(), step);
    }
  }
  const GraphBundle& last = provider.final_bundle(schedule.total_steps, model);
  Eigen::MatrixXd out;
  try {
    out = nn::gnn_forward(model, *last.shift, last.nodes.data).output;
  } catch (const NumericError& e) {
    throw DivergenceError(e.what(), schedule.total_steps);
  }
  result.report = gap_from_outputs(out, last, schedule.loss, schedule.loss_chunk);
  result.report.seed = schedule.seed;
  result.report.wall_time = wall() / 1000.0;
  result.trace.push_back(make_row(schedule.total_steps, result.report.train_risk, result.report, wall()));
  result.growth_events = provider.take_events();
  result.model = std::move(model);
  return result;
}

void require_splits(const GraphBundle& bundle) {
  if (bundle.train.empty()) throw ParameterError("graph has no train-split nodes");
  if (bundle.test.empty()) throw ParameterError("graph has no test-split nodes");
}

}  // namespace

std::string_view to_string(ScheduleMode mode) { return mode == ScheduleMode::growing ? "growing" : "fixed"; }

ScheduleMode parse_schedule_mode(std::string_view name) {
  if (name == "fixed") return ScheduleMode::fixed;
  if (name == "growing") return ScheduleMode::growing;
  throw ParameterError("unknown schedule mode '" + std::string(name) + "'");
}

std::string_view to_string(GrowthStyle style) {
  return style == GrowthStyle::nested ? "nested" : "fresh_resample";
}

GrowthStyle parse_growth_style(std::string_view name) {
  if (name == "fresh_resample" || name == "fresh") return GrowthStyle::fresh_resample;
  if (name == "nested") return GrowthStyle::nested;
  throw ParameterError("unknown growth style '" + std::string(name) + "'");
}

void validate(const TrainSchedule& s) {
  if (s.delta_t == 0) throw ParameterError("delta_t must be >= 1");
  if (s.mode == ScheduleMode::fixed && s.delta_n != 0) throw ParameterError("fixed schedules require delta_n = 0");
  if (s.adaptive && s.mode != ScheduleMode::growing) throw ParameterError("adaptive growth needs growing mode");
  if (!(s.optimizer.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (s.epsilon && !(*s.epsilon >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  if (s.loss_chunk == 0) throw ParameterError("loss chunk must be >= 1");
}

std::size_t active_nodes(const TrainSchedule& s, std::size_t step) {
  return s.n0 + (step / std::max<std::size_t>(1, s.delta_t)) * s.delta_n;
}

std::size_t final_nodes(const TrainSchedule& s) { return active_nodes(s, s.total_steps); }

GraphBundle make_bundle(embeddings::EmbeddingSet nodes, const GraphSpec& spec, nn::Architecture arch) {
  embeddings::validate(nodes);
  GraphBundle bundle;
  const std::size_t n = nodes.size();
  if (nodes.has_split()) {
    bundle.train = embeddings::indices_with(nodes.split, embeddings::Split::train);
    bundle.test = embeddings::indices_with(nodes.split, embeddings::Split::test);
  } else {
    bundle.train.resize(n);
    std::iota(bundle.train.begin(), bundle.train.end(), std::size_t{0});
  }
  const double factor = nn::laplacian_scale_factor(spec.scale, n);
  if (arch == nn::Architecture::polynomial && spec.mode == graph::ConstructionMode::dense &&
      n > spec.matrix_free_above) {
    bundle.shift = std::make_shared<const nn::KernelLaplacianShift>(nodes.data, spec.sigma, factor);
  } else {
    graph::BuildOptions options;
    options.sigma = spec.sigma;
    options.k = spec.mode == graph::ConstructionMode::dense ? 0 : spec.k;
    options.mode = spec.mode;
    options.weight_floor = spec.weight_floor;
    options.ann = spec.ann;
    auto g = graph::build_graph(nodes.data, options);
    if (arch == nn::Architecture::sage_mean) {
      bundle.shift = std::make_shared<const nn::SparseShift>(nn::mean_aggregation_shift(g));
    } else {
      bundle.shift = std::make_shared<const nn::SparseShift>(nn::laplacian_shift(graph::laplacian(g), factor));
    }
    bundle.graph = std::move(g);
  }
  bundle.nodes = std::move(nodes);
  return bundle;
}

ManifoldSource::ManifoldSource(manifold::ManifoldKind kind, manifold::LabelRule rule, double train_fraction)
    : kind_(kind), rule_(rule), train_fraction_(train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ParameterError("train fraction must lie in (0, 1)");
  if (rule.kind == manifold::LabelRule::Kind::angular_sector && kind != manifold::ManifoldKind::circle) {
    throw ParameterError("angular_sector labels need the circle");
  }
}

std::size_t ManifoldSource::available() const { return static_cast<std::size_t>(1) << 40; }

embeddings::EmbeddingSet ManifoldSource::draw(std::size_t n, std::uint64_t seed) const {
  const auto cloud = manifold::sample_manifold(kind_, n, derive_seed(seed, 0));
  embeddings::EmbeddingSet set;
  set.data = cloud.points;
  set.labels = manifold::synthetic_labels(cloud, rule_);
  set.num_classes = rule_.classes;
  set.split = embeddings::assign_split(n, train_fraction_, derive_seed(seed, 1));
  return set;
}

DatasetSource::DatasetSource(embeddings::EmbeddingSet set, double train_fraction, std::uint64_t split_seed)
    : set_(std::move(set)) {
  embeddings::validate(set_);
  if (!set_.has_split()) set_.split = embeddings::assign_split(set_.size(), train_fraction, split_seed);
}

embeddings::EmbeddingSet DatasetSource::draw(std::size_t n, std::uint64_t seed) const {
  if (n > set_.size()) {
    throw ParameterError("node source exhausted: need " + std::to_string(n) + " nodes, " +
                         std::to_string(set_.size()) + " available");
  }
  std::vector<std::size_t> perm(set_.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(perm.size() - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(n);
  return embeddings::subset(set_, perm);
}

GapReport gap_from_outputs(const Eigen::MatrixXd& outputs, const GraphBundle& bundle, nn::LossKind loss,
                           std::size_t loss_chunk) {
  require_splits(bundle);
  const auto& labels = bundle.nodes.labels;
  GapReport r;
  r.train_risk = nn::loss_masked(labels, outputs, bundle.train, loss, loss_chunk).value;
  r.test_risk = nn::loss_masked(labels, outputs, bundle.test, loss, loss_chunk).value;
  r.gap = std::abs(r.test_risk - r.train_risk);
  const auto predicted = nn::predict(outputs);
  r.train_accuracy = nn::accuracy(labels, predicted, bundle.train);
  r.test_accuracy = nn::accuracy(labels, predicted, bundle.test);
  r.p = bundle.train.size();
  r.q = bundle.test.size();
  r.n = r.p + r.q;
  return r;
}

GapReport generalization_gap(const nn::GnnModel& model, const GraphBundle& bundle, nn::LossKind loss,
                             std::size_t loss_chunk) {
  require_splits(bundle);
  return gap_from_outputs(nn::gnn_forward(model, *bundle.shift, bundle.nodes.data).output, bundle, loss, loss_chunk);
}

TrainResult train_fixed(nn::GnnModel model, const GraphBundle& bundle, const TrainSchedule& schedule) {
  if (schedule.mode != ScheduleMode::fixed) throw ParameterError("train_fixed needs a fixed schedule");
  require_splits(bundle);
  FixedProvider provider(bundle);
  return run_training(std::move(model), provider, schedule);
}

TrainResult train_growing(nn::GnnModel model, const NodeSource& source, const GraphSpec& spec,
                          const TrainSchedule& schedule) {
  validate(schedule);
  GrowingProvider provider(source, spec, model.architecture, schedule);
  return run_training(std::move(model), provider, schedule);
}

GraphBundle initial_bundle(const NodeSource& source, const GraphSpec& spec, nn::Architecture arch, std::size_t n,
                           std::uint64_t seed) {
  if (n > source.available()) {
    throw ParameterError("node source exhausted: need " + std::to_string(n) + " nodes, " +
                         std::to_string(source.available()) + " available");
  }
  return make_bundle(source.draw(n, derive_seed(seed, 0)), spec, arch);
}

GradientDeviation estimate_gradient_deviation(const nn::GnnModel& model, const GraphBundle& active,
                                              const GraphBundle& proxy, nn::LossKind loss, bool allow_same_size,
                                              std::size_t loss_chunk) {
  if (proxy.n() < active.n() || (proxy.n() == active.n() && !allow_same_size)) {
    throw ParameterError("proxy graph (" + std::to_string(proxy.n()) + " nodes) must be larger than the active graph (" +
                         std::to_string(active.n()) + " nodes)");
  }
  const Eigen::VectorXd g_active = masked_gradient(model, active, loss, loss_chunk).flatten();
  const Eigen::VectorXd g_proxy = masked_gradient(model, proxy, loss, loss_chunk).flatten();
  return {(g_proxy - g_active).norm(), g_proxy.norm()};
}

double SigmaRule::at(std::size_t n, int intrinsic_dim) const {
  if (!(value > 0.0)) throw ParameterError("sigma rule needs a positive value");
  if (kind == Kind::fixed) return value;
  return value * std::pow(static_cast<double>(n), -1.0 / (intrinsic_dim + 4));
}

std::vector<TransferPoint> transferability_test(const nn::GnnModel& model, manifold::ManifoldKind kind,
                                                std::span<const std::size_t> n_list, const SigmaRule& sigma_rule,
                                                std::uint64_t seed, std::size_t proxy_factor) {
  if (n_list.empty()) throw ParameterError("transferability: empty n list");
  if (model.architecture != nn::Architecture::polynomial) {
    throw ParameterError("transferability: only the polynomial architecture is supported");
  }
  const int d = manifold::intrinsic_dim(kind);
  if (model.widths.front() != static_cast<std::size_t>(d + 1)) {
    throw ShapeError("transferability: model input width must equal the ambient dimension");
  }
  std::vector<TransferPoint> out;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const std::size_t n = n_list[i];
    if (n == 0) throw ParameterError("transferability: n must be positive");
    if (i > 0 && n < n_list[i - 1]) throw ParameterError("transferability: n list must be ascending");
    const std::size_t proxy_n = n + proxy_factor * n;
    const auto cloud = manifold::sample_manifold(kind, proxy_n, derive_seed(seed, i));
    const Eigen::MatrixXd small = cloud.points.topRows(static_cast<Eigen::Index>(n));
    TransferPoint point;
    point.n = n;
    point.proxy_n = proxy_n;
    point.sigma = sigma_rule.at(n, d);
    const nn::KernelLaplacianShift shift_n(small, point.sigma, 1.0 / static_cast<double>(n));
    const nn::KernelLaplacianShift shift_p(cloud.points, sigma_rule.at(proxy_n, d),
                                           1.0 / static_cast<double>(proxy_n));
    const Eigen::MatrixXd y_n = nn::gnn_forward(model, shift_n, small).output;
    const Eigen::MatrixXd y_p = nn::gnn_forward(model, shift_p, cloud.points).output;
    point.discrepancy =
        (y_n - y_p.topRows(static_cast<Eigen::Index>(n))).rowwise().norm().sum() / static_cast<double>(n);
    out.push_back(point);
  }
  return out;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("pearson: need two equal-length vectors");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  if (denom == 0.0) return 0.0;
  return (da * db).sum() / denom;
}

ConvergencePoint convergence_point(manifold::ManifoldKind kind, std::size_t eigen_index, std::size_t n,
                                   const SigmaRule& sigma_rule, std::uint64_t seed) {
  const auto cloud = manifold::sample_manifold(kind, n, seed);
  const auto pair = manifold::analytic_eigenpair(kind, eigen_index);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd row = cloud.points.row(static_cast<Eigen::Index>(i)).transpose();
    f[i] = pair(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  ConvergencePoint point;
  point.n = n;
  point.seed = seed;
  point.sigma = sigma_rule.at(n, cloud.intrinsic_dim);
  const Eigen::VectorXd lf = graph::apply_extension_operator_at_samples(cloud.points, f, point.sigma);
  const Eigen::VectorXd target = pair.eigenvalue * Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n));
  point.max_abs_output = lf.cwiseAbs().maxCoeff();
  point.correlation = pearson(lf, target);
  const double tt = target.squaredNorm();
  point.fitted_scale = tt > 0.0 ? lf.dot(target) / tt : 0.0;
  return point;
}

nn::GnnModel make_model(const ModelSpec& spec, std::size_t input_dim, int classes, std::uint64_t seed) {
  if (classes < 1) throw ParameterError("class count must be positive");
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(static_cast<std::size_t>(classes));
  return nn::init_model(widths, spec.taps, spec.activation, seed, spec.architecture);
}

std::vector<SweepRow> gap_sweep(const NodeSource& source, const GraphSpec& spec, const ModelSpec& model_spec,
                                const TrainSchedule& schedule, std::span<const std::size_t> n_grid,
                                std::span<const std::uint64_t> seeds, std::size_t jobs) {
  if (n_grid.empty()) throw ParameterError("gap sweep: empty n grid");
  if (seeds.empty()) throw ParameterError("gap sweep: empty seed list");
  validate(schedule);
  const std::size_t tasks = n_grid.size() * seeds.size();
  std::vector<SweepRow> rows(tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      try {
        const std::size_t n = n_grid[t / seeds.size()];
        const std::uint64_t seed = seeds[t % seeds.size()];
        TrainSchedule s = schedule;
        s.mode = ScheduleMode::fixed;
        s.delta_n = 0;
        s.n0 = n;
        s.seed = seed;
        s.eval_interval = 0;
        const auto bundle = initial_bundle(source, spec, model_spec.architecture, n, seed);
        auto model = make_model(model_spec, source.dim(), source.num_classes(), model_seed(seed));
        rows[t] = {n, train_fixed(std::move(model), bundle, s).report};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, tasks);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,n_active,loss,train_risk,test_risk,gap,train_acc,test_acc,wall_ms\n";
  for (const auto& r : trace) {
    out << r.step << ',' << r.n_active << ',' << r.loss << ',' << r.train_risk << ',' << r.test_risk << ','
        << r.gap << ',' << r.train_acc << ',' << r.test_acc << ',' << r.wall_ms << '\n';
  }
  return out.str();
}

void write_trace_csv(std::span<const TraceRow> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << trace_csv(trace);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string git_describe() { return GEOSSL_GIT_DESCRIBE; }

}  // namespace geossl::train
