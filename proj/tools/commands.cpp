#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "geossl/baselines.hpp"
#include "geossl/embeddings.hpp"
#include "geossl/error.hpp"
#include "geossl/graph.hpp"
#include "geossl/raw_dataset.hpp"
#include "geossl/rng.hpp"

namespace geossl::cli {

namespace fs = std::filesystem;
using config::DatasetKind;
using config::ExperimentConfig;
using Clock = std::chrono::steady_clock;

namespace {

bool synthetic(const ExperimentConfig& c) { return c.dataset == DatasetKind::circle || c.dataset == DatasetKind::sphere; }

manifold::ManifoldKind manifold_kind(const ExperimentConfig& c) {
  if (!synthetic(c)) throw ConfigError("this command needs dataset = circle or sphere");
  return c.dataset == DatasetKind::circle ? manifold::ManifoldKind::circle : manifold::ManifoldKind::sphere;
}

fs::path prepare_output(const ExperimentConfig& c) {
  const fs::path dir(c.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + c.output + "'");
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::ordered_json envelope(std::string_view command, const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["git_describe"] = train::git_describe();
  j["config"] = config_json(c);
  return j;
}

nlohmann::ordered_json report_object(const train::GapReport& r) {
  return nlohmann::ordered_json::parse(train::report_json(r));
}

// Appends timestamped wall times to timing.log when --timing is set.
class TimingLog {
 public:
  TimingLog(const RunOptions& options, const fs::path& dir, std::string_view command)
      : enabled_(options.timing), path_(dir / "timing.log"), command_(command), start_(Clock::now()) {}

  void mark(const std::string& label) {
    if (!enabled_) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot open '" + path_.string() + "' for writing");
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    out << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << ' ' << command_ << ' ' << label
        << " wall_ms=" << std::fixed << std::setprecision(1) << ms << '\n';
  }

 private:
  bool enabled_;
  fs::path path_;
  std::string command_;
  Clock::time_point start_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

embeddings::RawDataset load_raw(const ExperimentConfig& c) { return embeddings::load_idx_directory(c.data_dir); }

void write_growth_events(const fs::path& path, const std::vector<train::GrowthEvent>& events) {
  std::ostringstream out;
  out << std::setprecision(17) << "step,n_before,n_after,deviation,proxy_norm,epsilon,grew\n";
  for (const auto& e : events) {
    out << e.step << ',' << e.n_before << ',' << e.n_after << ',' << e.deviation << ',' << e.proxy_norm << ','
        << e.epsilon << ',' << (e.grew ? 1 : 0) << '\n';
  }
  write_text(path, out.str());
}

void run_training(const ExperimentConfig& c, const RunOptions& options, train::ScheduleMode mode) {
  const std::string_view name = mode == train::ScheduleMode::fixed ? "train" : "train-growing";
  const auto source = make_source(c);
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, name);
  const auto spec = config::graph_spec(c);
  const auto model_spec = config::model_spec(c);
  for (const auto seed : c.seeds) {
    auto schedule = config::schedule(c, seed, mode);
    if (mode == train::ScheduleMode::fixed) schedule.n0 = node_count(c, *source);
    schedule.record_wall_time = options.timing;
    train::validate(schedule);
    auto model = train::make_model(model_spec, source->dim(), source->num_classes(), train::model_seed(seed));
    train::TrainResult result;
    if (mode == train::ScheduleMode::fixed) {
      const auto bundle = train::initial_bundle(*source, spec, c.arch, schedule.n0, seed);
      result = train::train_fixed(std::move(model), bundle, schedule);
    } else {
      result = train::train_growing(std::move(model), *source, spec, schedule);
    }
    const std::string tag = "seed" + std::to_string(seed);
    train::write_trace_csv(result.trace, dir / ("trace_" + tag + ".csv"));
    nn::save_model(result.model, dir / ("model_" + tag + ".mgnn"));
    auto j = envelope(name, c);
    j["seed"] = seed;
    j["report"] = report_object(result.report);
    j["gap_over_train_accuracy"] =
        result.report.train_accuracy > 0.0 ? result.report.gap / result.report.train_accuracy : 0.0;
    if (schedule.adaptive) {
      write_growth_events(dir / ("growth_" + tag + ".csv"), result.growth_events);
      j["growth_events"] = result.growth_events.size();
    }
    write_json(dir / ("report_" + tag + ".json"), j);
    timing.mark(tag);
    std::cout << name << " seed=" << seed << " n=" << result.report.n << " gap=" << fmt(result.report.gap)
              << " train_acc=" << fmt(result.report.train_accuracy) << " test_acc=" << fmt(result.report.test_accuracy)
              << '\n';
  }
}

}  // namespace

std::unique_ptr<train::NodeSource> make_source(const ExperimentConfig& c) {
  switch (c.dataset) {
    case DatasetKind::circle:
    case DatasetKind::sphere:
      return std::make_unique<train::ManifoldSource>(manifold_kind(c), config::label_rule(c), c.train_fraction);
    case DatasetKind::mnist:
    case DatasetKind::fmnist: {
      embeddings::PcaOptions po;
      po.components = c.pca_components;
      return std::make_unique<train::DatasetSource>(embeddings::pca_embed(load_raw(c), po), c.train_fraction,
                                                    c.seeds.front());
    }
    case DatasetKind::embeddings:
      return std::make_unique<train::DatasetSource>(embeddings::load_any(c.embeddings_path), c.train_fraction,
                                                    c.seeds.front());
  }
  throw ConfigError("unknown dataset");
}

std::size_t node_count(const ExperimentConfig& c, const train::NodeSource& source) {
  return c.n == 0 ? source.available() : c.n;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::istringstream in(config::to_text(c));
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& object) {
  if (!object.is_object()) throw ConfigError("config echo must be a JSON object");
  std::string text;
  for (const auto& [key, value] : object.items()) {
    if (!value.is_string()) throw ConfigError("config echo value for '" + key + "' must be a string");
    text += key + " = " + value.get<std::string>() + "\n";
  }
  return config::parse_config(text);
}

void build_graph(const ExperimentConfig& c, const RunOptions& options) {
  const auto source = make_source(c);
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "build-graph");
  const std::size_t n = node_count(c, *source);
  if (n > source->available()) throw ConfigError("n exceeds the dataset size");
  auto graph_options = graph::BuildOptions{};
  const auto spec = config::graph_spec(c);
  graph_options.sigma = spec.sigma;
  graph_options.k = spec.mode == graph::ConstructionMode::dense ? 0 : spec.k;
  graph_options.mode = spec.mode;
  graph_options.weight_floor = spec.weight_floor;
  graph_options.ann = spec.ann;
  const auto nodes = source->draw(n, derive_seed(c.seeds.front(), 0));
  const auto g = graph::build_graph(nodes.data, graph_options);
  graph::write_edge_list_csv(g, dir / "edges.csv");
  graph::write_adjacency_binary(g, dir / "graph.mgrf");
  const auto stats = graph::graph_stats(g);
  auto j = envelope("build-graph", c);
  j["n"] = stats.n;
  j["nnz"] = stats.nnz;
  j["symmetric"] = stats.symmetric;
  j["degree"] = {{"min", stats.degree_min},
                 {"q25", stats.degree_q25},
                 {"median", stats.degree_median},
                 {"q75", stats.degree_q75},
                 {"max", stats.degree_max}};
  write_json(dir / "graph_summary.json", j);
  timing.mark("graph");
  std::cout << "build-graph n=" << stats.n << " nnz=" << stats.nnz << " symmetric=" << (stats.symmetric ? 1 : 0)
            << '\n';
}

void train(const ExperimentConfig& c, const RunOptions& options) { run_training(c, options, train::ScheduleMode::fixed); }

void train_growing(const ExperimentConfig& c, const RunOptions& options) {
  run_training(c, options, train::ScheduleMode::growing);
}

void gap_sweep(const ExperimentConfig& c, const RunOptions& options) {
  const auto source = make_source(c);
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "gap-sweep");
  for (auto n : c.n_grid) {
    if (n > source->available()) throw ConfigError("n_grid entry " + std::to_string(n) + " exceeds the dataset size");
  }
  auto schedule = config::schedule(c, c.seeds.front(), train::ScheduleMode::fixed);
  const auto rows = train::gap_sweep(*source, config::graph_spec(c), config::model_spec(c), schedule, c.n_grid,
                                     c.seeds, options.jobs);
  std::ostringstream runs;
  runs << std::setprecision(17) << "n,seed,train_risk,test_risk,gap,train_acc,test_acc,gap_over_train_acc\n";
  std::map<std::size_t, std::vector<train::GapReport>> by_n;
  for (const auto& row : rows) {
    const auto& r = row.report;
    runs << row.n << ',' << r.seed << ',' << r.train_risk << ',' << r.test_risk << ',' << r.gap << ','
         << r.train_accuracy << ',' << r.test_accuracy << ',' << (r.train_accuracy > 0 ? r.gap / r.train_accuracy : 0.0)
         << '\n';
    by_n[row.n].push_back(r);
  }
  std::ostringstream summary;
  summary << std::setprecision(17) << "n,runs,mean_gap,mean_gap_over_train_acc,mean_train_acc,mean_test_acc\n";
  for (auto n : c.n_grid) {
    const auto it = by_n.find(n);
    if (it == by_n.end()) continue;
    double gap = 0, rel = 0, tr = 0, te = 0;
    for (const auto& r : it->second) {
      gap += r.gap;
      rel += r.train_accuracy > 0 ? r.gap / r.train_accuracy : 0.0;
      tr += r.train_accuracy;
      te += r.test_accuracy;
    }
    const double m = static_cast<double>(it->second.size());
    summary << n << ',' << it->second.size() << ',' << gap / m << ',' << rel / m << ',' << tr / m << ',' << te / m
            << '\n';
    by_n.erase(it);
    std::cout << "gap-sweep n=" << n << " mean_gap=" << fmt(gap / m) << '\n';
  }
  write_text(dir / "sweep_runs.csv", runs.str());
  write_text(dir / "sweep.csv", summary.str());
  write_json(dir / "sweep.json", envelope("gap-sweep", c));
  timing.mark("sweep");
}

void convergence(const ExperimentConfig& c, const RunOptions& options) {
  const auto kind = manifold_kind(c);
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "convergence");
  const auto rule = config::sigma_rule(c);
  std::ostringstream runs;
  runs << std::setprecision(17) << "n,seed,sigma,correlation,fitted_scale,max_abs_output\n";
  std::ostringstream summary;
  summary << std::setprecision(17) << "n,median_correlation,median_fitted_scale\n";
  for (auto n : c.n_grid) {
    std::vector<double> corr, scale;
    for (auto seed : c.seeds) {
      const auto p = train::convergence_point(kind, c.eigen_index, n, rule, seed);
      runs << p.n << ',' << p.seed << ',' << p.sigma << ',' << p.correlation << ',' << p.fitted_scale << ','
           << p.max_abs_output << '\n';
      corr.push_back(p.correlation);
      scale.push_back(p.fitted_scale);
    }
    summary << n << ',' << median(corr) << ',' << median(scale) << '\n';
    std::cout << "convergence n=" << n << " median_correlation=" << fmt(median(corr)) << '\n';
  }
  write_text(dir / "convergence_runs.csv", runs.str());
  write_text(dir / "convergence.csv", summary.str());
  write_json(dir / "convergence.json", envelope("convergence", c));
  timing.mark("convergence");
}

void transferability(const ExperimentConfig& c, const RunOptions& options) {
  const auto kind = manifold_kind(c);
  if (c.arch != nn::Architecture::polynomial) throw ConfigError("transferability needs arch = polynomial");
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "transferability");
  const auto rule = config::sigma_rule(c);
  const std::size_t ambient = static_cast<std::size_t>(manifold::intrinsic_dim(kind)) + 1;
  std::ostringstream runs;
  runs << std::setprecision(17) << "n,proxy_n,seed,sigma,discrepancy\n";
  std::map<std::size_t, std::vector<double>> by_n;
  for (auto seed : c.seeds) {
    const auto model = train::make_model(config::model_spec(c), ambient, config::label_rule(c).classes,
                                         train::model_seed(seed));
    for (const auto& p : train::transferability_test(model, kind, c.n_grid, rule, seed, c.proxy_factor)) {
      runs << p.n << ',' << p.proxy_n << ',' << seed << ',' << p.sigma << ',' << p.discrepancy << '\n';
      by_n[p.n].push_back(p.discrepancy);
    }
  }
  std::ostringstream summary;
  summary << std::setprecision(17) << "n,median_discrepancy\n";
  for (const auto& [n, values] : by_n) {
    summary << n << ',' << median(values) << '\n';
    std::cout << "transferability n=" << n << " median_discrepancy=" << fmt(median(values)) << '\n';
  }
  write_text(dir / "transferability_runs.csv", runs.str());
  write_text(dir / "transferability.csv", summary.str());
  write_json(dir / "transferability.json", envelope("transferability", c));
  timing.mark("transferability");
}

void pca_embed(const ExperimentConfig& c, const RunOptions& options) {
  if (c.dataset != DatasetKind::mnist && c.dataset != DatasetKind::fmnist) {
    throw ConfigError("pca-embed needs dataset = mnist or fmnist");
  }
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "pca-embed");
  embeddings::PcaOptions po;
  po.components = c.pca_components;
  const auto set = embeddings::pca_embed(load_raw(c), po);
  embeddings::save_embeddings(set, dir / "embeddings.memb");
  auto j = envelope("pca-embed", c);
  j["n"] = set.size();
  j["dim"] = set.dim();
  j["classes"] = set.num_classes;
  write_json(dir / "embeddings.json", j);
  timing.mark("pca");
  std::cout << "pca-embed n=" << set.size() << " dim=" << set.dim() << '\n';
}

void baselines(const ExperimentConfig& c, const RunOptions& options) {
  const auto source = make_source(c);
  const fs::path dir = prepare_output(c);
  TimingLog timing(options, dir, "baselines");
  const std::uint64_t seed = c.seeds.front();
  const std::size_t n = node_count(c, *source);
  if (n > source->available()) throw ConfigError("n exceeds the dataset size");
  auto schedule = config::schedule(c, seed, train::ScheduleMode::fixed);
  schedule.n0 = n;
  schedule.eval_interval = 0;
  const auto bundle = train::initial_bundle(*source, config::graph_spec(c), c.arch, n, seed);

  struct Row {
    std::string method;
    double train_acc;
    double test_acc;
  };
  std::vector<Row> rows;
  const auto gnn = train::train_fixed(
      train::make_model(config::model_spec(c), source->dim(), source->num_classes(), train::model_seed(seed)), bundle,
      schedule);
  rows.push_back({synthetic(c) || c.dataset == DatasetKind::embeddings ? "gnn" : "gnn_pca", gnn.report.train_accuracy,
                  gnn.report.test_accuracy});
  timing.mark("gnn");

  auto mlp_spec = config::model_spec(c);
  mlp_spec.taps = 1;
  const auto mlp = train::train_fixed(
      train::make_model(mlp_spec, source->dim(), source->num_classes(), train::model_seed(seed)), bundle, schedule);
  rows.push_back({"mlp", mlp.report.train_accuracy, mlp.report.test_accuracy});
  const Eigen::MatrixXd via_gnn = nn::gnn_forward(mlp.model, *bundle.shift, bundle.nodes.data).output;
  const Eigen::MatrixXd via_mlp = nn::mlp_forward(nn::mlp_from_gnn(mlp.model), bundle.nodes.data);
  const double k1_difference = (via_gnn - via_mlp).cwiseAbs().maxCoeff();
  timing.mark("mlp");

  const auto knn_pred = nn::knn_classify(bundle.nodes, c.knn_k);
  const auto train_ref = embeddings::subset(bundle.nodes, bundle.train);
  const auto train_self = nn::knn_vote(train_ref.data, train_ref.labels, bundle.nodes.num_classes, train_ref.data,
                                       std::min(c.knn_k, bundle.train.size()));
  std::vector<std::size_t> all(bundle.test.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<int> test_labels;
  for (auto i : bundle.test) test_labels.push_back(bundle.nodes.labels[i]);
  std::vector<std::size_t> all_train(bundle.train.size());
  std::iota(all_train.begin(), all_train.end(), std::size_t{0});
  rows.push_back({"knn", nn::accuracy(train_ref.labels, train_self, all_train), nn::accuracy(test_labels, knn_pred, all)});
  timing.mark("knn");

  std::ostringstream csv;
  csv << std::setprecision(17) << "method,train_acc,test_acc\n";
  auto j = envelope("baselines", c);
  for (const auto& r : rows) {
    csv << r.method << ',' << r.train_acc << ',' << r.test_acc << '\n';
    j["accuracy"][r.method] = {{"train", r.train_acc}, {"test", r.test_acc}};
    std::cout << "baselines " << r.method << " train_acc=" << fmt(r.train_acc) << " test_acc=" << fmt(r.test_acc)
              << '\n';
  }
  j["mlp_vs_gnn_k1_max_abs_difference"] = k1_difference;
  write_text(dir / "baselines.csv", csv.str());
  write_json(dir / "baselines.json", j);
}

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> table{
      {"build-graph", build_graph},   {"train", train},
      {"train-growing", train_growing}, {"gap-sweep", gap_sweep},
      {"convergence", convergence},   {"transferability", transferability},
      {"pca-embed", pca_embed},       {"baselines", baselines},
  };
  return table;
}

int exit_code_for(const std::exception& error) {
  std::cerr << "error: " << error.what() << '\n';
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const ParameterError*>(&error) ||
      dynamic_cast<const ShapeError*>(&error)) {
    return 2;
  }
  if (dynamic_cast<const NumericError*>(&error)) return 3;
  if (dynamic_cast<const IoError*>(&error)) return 4;
  return 1;
}

}  // namespace geossl::cli
