#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geossl/baselines.hpp"
#include "geossl/embeddings.hpp"
#include "geossl/graph.hpp"
#include "geossl/nn.hpp"
#include "geossl/parallel.hpp"
#include "geossl/raw_dataset.hpp"
#include "geossl/train.hpp"
#include "support.hpp"

using namespace geossl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string join(const std::vector<double>& v, const char* format = "%.5f") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(format, v[i]);
  return out;
}

train::ManifoldSource sphere_task() {
  return train::ManifoldSource(manifold::ManifoldKind::sphere, manifold::LabelRule::hemisphere(), 0.6);
}

train::GraphSpec sphere_graph() {
  train::GraphSpec spec;
  spec.sigma = 0.5;
  spec.scale = nn::LaplacianScale::inverse_n;
  return spec;
}

train::ModelSpec sphere_model() {
  train::ModelSpec spec;
  spec.hidden = {16};
  spec.taps = 2;
  return spec;
}

train::TrainSchedule sphere_schedule() {
  train::TrainSchedule s;
  s.total_steps = 300;
  s.loss = nn::LossKind::softmax_cross_entropy;
  s.optimizer = {nn::OptimizerKind::adam, 0.01};
  s.eval_interval = 0;
  return s;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4};

Outcome laplacian_convergence() {
  const std::vector<std::size_t> ns{400, 1600, 6400};
  std::vector<double> medians;
  for (auto n : ns) {
    std::vector<double> corr;
    for (std::uint64_t seed = 100; seed < 104; ++seed) {
      corr.push_back(train::convergence_point(manifold::ManifoldKind::circle, manifold::circle_cosine_index(2), n,
                                              train::SigmaRule::schedule(1.5), seed)
                         .correlation);
    }
    medians.push_back(median(corr));
  }
  const bool increasing = medians[0] < medians[1] && medians[1] < medians[2];
  return {increasing && medians[2] >= 0.99,
          "median correlation over n = 400, 1600, 6400: " + join(medians) + " (need >= 0.99 at 6400, increasing)"};
}

Outcome transferability() {
  const std::vector<std::size_t> ns{250, 2000};
  std::vector<double> ratios, small, large;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto model = nn::init_model(std::vector<std::size_t>{3, 16, 2}, 2, nn::Activation::relu, 10 + s);
    const auto points =
        train::transferability_test(model, manifold::ManifoldKind::sphere, ns, train::SigmaRule::fixed(0.5), 50 + s);
    small.push_back(points[0].discrepancy);
    large.push_back(points[1].discrepancy);
    ratios.push_back(points[1].discrepancy / points[0].discrepancy);
  }
  const double ratio = median(ratios);
  return {ratio < 0.5, fmt("median discrepancy ratio D(2000)/D(250) = %.4f (need < 0.5); D(250) = [", ratio) +
                           join(small) + "], D(2000) = [" + join(large) + "]"};
}

Outcome gap_vs_n() {
  const auto source = sphere_task();
  const std::vector<std::size_t> grid{250, 500, 1000, 2000};
  const auto rows = train::gap_sweep(source, sphere_graph(), sphere_model(), sphere_schedule(), grid, kSeeds);
  std::vector<double> mean(grid.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) mean[i / kSeeds.size()] += rows[i].report.gap / kSeeds.size();
  const double largest = *std::max_element(mean.begin(), mean.end());
  int inversions = 0;
  bool small_inversions = true;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (mean[i] > mean[i - 1]) {
      ++inversions;
      if (mean[i] - mean[i - 1] > 0.1 * largest) small_inversions = false;
    }
  }
  const bool pass = inversions <= 1 && small_inversions && mean.back() < mean.front();
  return {pass, "mean gap over n = 250, 500, 1000, 2000: " + join(mean) + fmt(" (%d inversions)", inversions)};
}

Outcome growing_advantage() {
  const auto source = sphere_task();
  const auto spec = sphere_graph();
  const auto ms = sphere_model();
  double fixed_gap = 0.0, growing_gap = 0.0;
  for (auto seed : kSeeds) {
    auto s = sphere_schedule();
    s.seed = seed;
    s.n0 = 2000;
    const auto bundle = train::initial_bundle(source, spec, ms.architecture, 2000, seed);
    fixed_gap += train::train_fixed(train::make_model(ms, 3, 2, train::model_seed(seed)), bundle, s).report.gap / 4;
    auto g = s;
    g.mode = train::ScheduleMode::growing;
    g.n0 = 200;
    g.delta_n = 120;
    g.delta_t = 20;
    const auto grown = train::train_growing(train::make_model(ms, 3, 2, train::model_seed(seed)), source, spec, g);
    if (grown.report.n != 2000) return {false, "growing schedule ended at n = " + std::to_string(grown.report.n)};
    growing_gap += grown.report.gap / 4;
  }
  return {growing_gap <= fixed_gap,
          fmt("mean final gap at n = 2000: growing %.5f, fixed %.5f (need growing <= fixed)", growing_gap, fixed_gap)};
}

Outcome gradient_deviation() {
  const auto source = sphere_task();
  const auto spec = sphere_graph();
  const std::vector<std::size_t> ns{100, 200, 400};
  std::vector<std::vector<double>> dev(ns.size());
  for (auto seed : kSeeds) {
    const auto model = train::make_model(sphere_model(), 3, 2, train::model_seed(seed));
    const auto proxy = train::make_bundle(source.draw(4000, derive_seed(seed, 99)), spec, nn::Architecture::polynomial);
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const auto active =
          train::make_bundle(source.draw(ns[i], derive_seed(seed, ns[i])), spec, nn::Architecture::polynomial);
      dev[i].push_back(
          train::estimate_gradient_deviation(model, active, proxy, nn::LossKind::softmax_cross_entropy).deviation);
    }
  }
  std::vector<double> medians;
  for (auto& d : dev) medians.push_back(median(d));
  const bool pass = medians[0] > medians[1] && medians[1] > medians[2];
  return {pass, "median deviation vs 4000-node proxy over n = 100, 200, 400: " + join(medians)};
}

Outcome gradient_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(13);
    const std::size_t taps = 1 + rng.below(3);
    const std::size_t layers = 1 + rng.below(2);
    std::vector<std::size_t> widths{1 + rng.below(4)};
    for (std::size_t l = 0; l < layers; ++l) widths.push_back(1 + rng.below(5));
    widths.back() = std::max<std::size_t>(widths.back(), 2);
    const auto act = std::array{nn::Activation::relu, nn::Activation::sigmoid, nn::Activation::identity}[trial % 3];
    const auto kind = trial % 2 ? nn::LossKind::softmax_cross_entropy : nn::LossKind::mean_l2_onehot;
    const auto lap = graph::laplacian(testing::random_adjacency(rng, n, 0.5));
    const nn::SparseShift shift = nn::laplacian_shift(lap, 1.0 / static_cast<double>(n));
    const auto x = testing::random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(widths[0]));
    const auto labels = testing::random_labels(rng, n, static_cast<int>(widths.back()));
    std::vector<std::size_t> mask;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.6 || mask.empty()) mask.push_back(i);
    }
    const auto model = nn::init_model(widths, taps, act, 7000 + static_cast<std::uint64_t>(trial));
    const auto fwd = nn::gnn_forward(model, shift, x);
    const auto loss = nn::loss_masked(labels, fwd.output, mask, kind);
    const auto grads = nn::gnn_backward(model, fwd.cache, loss.gradient);
    const auto check = testing::finite_difference_check(model, grads.flatten(), [&](const nn::GnnModel& m) {
      return nn::loss_masked(labels, nn::gnn_forward(m, shift, x).output, mask, kind).value;
    });
    worst = std::max(worst, check.max_relative_error);
  }
  return {worst < 1e-4, fmt("max relative error over 30 instances = %.3e (need < 1e-4)", worst)};
}

Outcome exactness() {
  std::vector<std::string> failures;
  std::ostringstream detail;

  const auto cloud = manifold::sample_manifold(manifold::ManifoldKind::sphere, 600, 5);
  double worst_row = 0.0;
  bool symmetric = true;
  for (auto mode : {graph::ConstructionMode::dense, graph::ConstructionMode::knn_exact, graph::ConstructionMode::knn_ann}) {
    graph::BuildOptions o;
    o.sigma = 0.4;
    o.mode = mode;
    o.k = mode == graph::ConstructionMode::dense ? 0 : 15;
    const auto g = graph::build_graph(cloud.points, o);
    const graph::SparseMatrix t = g.adjacency.transpose();
    symmetric = symmetric && (graph::SparseMatrix(g.adjacency - t).coeffs().abs() == 0.0).all() &&
                g.adjacency.nonZeros() == t.nonZeros();
    const auto lap = graph::laplacian(g);
    worst_row = std::max(worst_row, (lap.matrix * Eigen::VectorXd::Ones(600)).cwiseAbs().maxCoeff());
  }
  if (!(worst_row < 1e-12)) failures.push_back("row sums");
  if (!symmetric) failures.push_back("symmetry");
  detail << fmt("max |row sum| = %.2e; symmetry %s", worst_row, symmetric ? "exact" : "broken");

  {
    Rng rng(9);
    const std::size_t n = 80;
    const auto points = testing::random_matrix(rng, n, 3);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(Eigen::Map<Eigen::VectorXi>(perm.data(), static_cast<Eigen::Index>(n)));
    graph::BuildOptions o;
    o.sigma = 0.8;
    const auto model = nn::init_model(std::vector<std::size_t>{3, 8, 4}, 3, nn::Activation::relu, 3);
    const auto y = nn::gnn_forward(model, graph::laplacian(graph::build_graph(points, o)), points).output;
    const Eigen::MatrixXd pp = p * points;
    const auto py = nn::gnn_forward(model, graph::laplacian(graph::build_graph(pp, o)), pp).output;
    const double err = (py - p * y).cwiseAbs().maxCoeff();
    if (!(err < 1e-9)) failures.push_back("permutation equivariance");
    detail << fmt("; permutation error = %.2e", err);

    const auto k1 = nn::init_model(std::vector<std::size_t>{3, 8, 4}, 1, nn::Activation::relu, 4);
    const bool equal = nn::gnn_forward(k1, graph::laplacian(graph::build_graph(points, o)), points).output ==
                       nn::mlp_forward(nn::mlp_from_gnn(k1), points);
    if (!equal) failures.push_back("K=1 vs MLP");
    detail << "; K=1 GNN " << (equal ? "==" : "!=") << " MLP";
  }

  {
    const auto dir = fs::temp_directory_path() / "geossl_acceptance";
    fs::create_directories(dir);
    Rng rng(11);
    embeddings::EmbeddingSet set;
    set.data = testing::random_matrix(rng, 200, 16).cast<float>().cast<double>();
    set.labels = testing::random_labels(rng, 200, 7);
    set.num_classes = 7;
    set.split = embeddings::assign_split(200, 0.5, 1);
    embeddings::save_embeddings(set, dir / "e.memb");
    bool ok = embeddings::load_embeddings(dir / "e.memb") == set;
    auto model = nn::init_model(std::vector<std::size_t>{16, 8, 7}, 2, nn::Activation::sigmoid, 2);
    for (auto& layer : model.weights) {
      for (auto& w : layer) w = w.cast<float>().cast<double>();
    }
    nn::save_model(model, dir / "m.mgnn");
    const auto back = nn::load_model(dir / "m.mgnn");
    ok = ok && nn::flatten_parameters(back) == nn::flatten_parameters(model) && back.widths == model.widths;
    graph::BuildOptions o;
    o.sigma = 2.0;
    o.k = 5;
    o.mode = graph::ConstructionMode::knn_exact;
    const auto g = graph::build_graph(set.data, o);
    graph::write_adjacency_binary(g, dir / "g.mgrf");
    const auto adj = graph::read_adjacency_binary(dir / "g.mgrf");
    ok = ok && adj.nonZeros() == g.adjacency.nonZeros() &&
         (graph::SparseMatrix(adj - g.adjacency).coeffs().abs() == 0.0).all();
    if (!ok) failures.push_back("round-trip");
    detail << "; MEMB/MGNN/MGRF round-trip " << (ok ? "exact" : "broken");
  }

  {
    Rng rng(12);
    const auto points = testing::random_matrix(rng, 10000, 16);
    const auto exact = graph::exact_knn(points, 10);
    const auto approx = graph::ann_knn(points, 10, graph::AnnOptions{});
    const double recall = graph::knn_recall(approx, exact, 10);
    if (!(recall >= 0.95)) failures.push_back("ANN recall");
    detail << fmt("; ANN recall@10 on 10k points = %.4f", recall);
  }

  std::string summary = detail.str();
  if (!failures.empty()) {
    summary += " [failed:";
    for (const auto& f : failures) summary += " " + f;
    summary += "]";
  }
  return {failures.empty(), summary};
}

Outcome pca_baseline(const fs::path& mnist_dir) {
  if (!fs::exists(mnist_dir / "train-images-idx3-ubyte") && !fs::exists(mnist_dir / "train-images.idx3-ubyte")) {
    return {false, "MNIST IDX files not found in " + mnist_dir.string()};
  }
  const auto raw = embeddings::load_idx_directory(mnist_dir);
  embeddings::PcaOptions po;
  po.components = 128;
  const auto set = embeddings::pca_embed(raw, po);
  train::GraphSpec spec;
  spec.sigma = 4.0;
  spec.k = 100;
  spec.mode = graph::ConstructionMode::knn_ann;
  const auto bundle = train::make_bundle(set, spec, nn::Architecture::sage_mean);
  train::ModelSpec ms;
  ms.hidden = {};
  ms.taps = 2;
  ms.architecture = nn::Architecture::sage_mean;
  train::TrainSchedule s;
  s.total_steps = 100;
  s.loss = nn::LossKind::softmax_cross_entropy;
  s.optimizer = {nn::OptimizerKind::adam, 0.01};
  s.eval_interval = 0;
  s.seed = 1;
  const auto result = train::train_fixed(train::make_model(ms, 128, 10, train::model_seed(1)), bundle, s);
  const double acc = 100.0 * result.report.test_accuracy;
  return {acc >= 45.0 && acc <= 65.0,
          fmt("MNIST PCA(128) kNN(100, sigma 4) 1-layer GNN test accuracy = %.2f%% (band [45, 65]); train %.2f%%", acc,
              100.0 * result.report.train_accuracy)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::vector<int> known_red;
  std::string mnist_dir = std::getenv("GEOSSL_MNIST_DIR") ? std::getenv("GEOSSL_MNIST_DIR") : "/root/data/mnist";
  std::size_t threads = 0;
  app.add_option("-c,--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--known-red", known_red, "criteria whose FAIL does not affect the exit status")->check(CLI::Range(1, 8));
  app.add_option("--mnist-dir", mnist_dir, "directory with the MNIST IDX files");
  app.add_option("--threads", threads, "worker threads");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_thread_count(threads);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::vector<std::function<Outcome()>> criteria{
      laplacian_convergence, transferability, gap_vs_n,     growing_advantage,
      gradient_deviation,    gradient_oracle, exactness,    [&] { return pca_baseline(mnist_dir); },
  };
  const std::set<int> red(known_red.begin(), known_red.end());
  int status = 0;
  for (int id : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[static_cast<std::size_t>(id - 1)]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s [%.1fs]%s\n", id, outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str(), seconds,
                !outcome.pass && red.count(id) ? " (known red, analysis in README)" : "");
    std::fflush(stdout);
    if (!outcome.pass && !red.count(id)) status = 1;
  }
  return status;
}
