#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "geossl/config.hpp"
#include "geossl/error.hpp"
#include "geossl/parallel.hpp"

using namespace geossl;
using config::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

struct Pin {
  Pin() { set_thread_count(1); }
} pin;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "geossl_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_circle(const fs::path& out) {
  ExperimentConfig c;
  c.dataset = config::DatasetKind::circle;
  c.n = 100;
  c.n0 = 100;
  c.sigma = 0.3;
  c.hidden = {4};
  c.steps = 20;
  c.eval_interval = 5;
  c.seeds = {3};
  c.output = out.string();
  return c;
}

int run_tool(const std::string& args) {
  const char* tool = std::getenv("GEOSSL_TOOL");
  REQUIRE(tool != nullptr);
  const int status = std::system((std::string(tool) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text round-trips") {
  ExperimentConfig c;
  CHECK(config::parse_config(config::to_text(c)) == c);
  c.dataset = config::DatasetKind::embeddings;
  c.embeddings_path = "/tmp/x.memb";
  c.sigma = 0.1 + 0.2;
  c.lr = 1e-3 / 3.0;
  c.hidden = {128, 64};
  c.seeds = {1, 2, 18446744073709551615ULL};
  c.epsilon = 0.123456789012345678;
  c.adaptive = true;
  c.arch = nn::Architecture::sage_mean;
  c.graph_mode = graph::ConstructionMode::knn_ann;
  c.hidden.clear();
  const auto back = config::parse_config(config::to_text(c));
  CHECK(back == c);
  CHECK(back.sigma == c.sigma);
  CHECK(cli::config_from_json(cli::config_json(c)) == c);
  const auto text = config::to_text(c);
  CHECK(config::known_keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(config::parse_config("sigmaa = 1"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("sigma = 1\nsigma = 2"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("sigma = abc"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("k = -3"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("arch = transformer"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("just text"), ConfigError);
  CHECK_THROWS_AS(config::parse_config("adaptive = maybe"), ConfigError);
  const auto c = config::parse_config("# comment\n; another\n\n  sigma = 2.5  \nseeds = 4, 5\n");
  CHECK(c.sigma == 2.5);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK_THROWS_WITH_AS(config::parse_config("sigma = 1\nbogus = 2"), "line 2: unknown config key 'bogus'", ConfigError);
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  config::apply_override(c, "sigma=4.0");
  config::apply_override(c, "hidden = 8,8");
  CHECK(c.sigma == 4.0);
  CHECK(c.hidden == std::vector<std::size_t>{8, 8});
  CHECK_THROWS_AS(config::apply_override(c, "nope=1"), ConfigError);
}

TEST_CASE("validation runs before compute") {
  ExperimentConfig c;
  CHECK_NOTHROW(config::validate(c));
  c.seeds.clear();
  CHECK_THROWS_AS(config::validate(c), ConfigError);
  c = ExperimentConfig{};
  c.dataset = config::DatasetKind::embeddings;
  c.embeddings_path = "/nonexistent/embeddings.memb";
  CHECK_THROWS_AS(config::validate(c), ConfigError);
  c = ExperimentConfig{};
  c.sigma = 0.0;
  CHECK_THROWS_AS(config::validate(c), ConfigError);
  c = ExperimentConfig{};
  c.n = 0;
  CHECK_THROWS_AS(config::validate(c), ConfigError);
  c = ExperimentConfig{};
  c.graph_mode = graph::ConstructionMode::knn_exact;
  CHECK_THROWS_AS(config::validate(c), ConfigError);
}

TEST_CASE("shipped configs parse") {
  const fs::path dir = fs::path(GEOSSL_SOURCE_DIR) / "configs";
  const auto mnist = config::load_config(dir / "mnist.cfg");
  CHECK(mnist.dataset == config::DatasetKind::mnist);
  CHECK(mnist.sigma == 4.0);
  CHECK(mnist.k == 100);
  CHECK(mnist.lr == 0.01);
  CHECK(mnist.hidden == std::vector<std::size_t>{128});
  CHECK(mnist.arch == nn::Architecture::sage_mean);
  CHECK(config::load_config(dir / "fmnist.cfg").sigma == 0.8);
  CHECK(config::load_config(dir / "cifar10.cfg").sigma == 5.0);
  CHECK(config::load_config(dir / "fer2013.cfg").sigma == 4.0);
  CHECK(config::load_config(dir / "celeba.cfg").sigma == 3.5);
  CHECK(config::load_config(dir / "pathmnist.cfg").sigma == 5.0);
  for (const auto& name : {"sphere.cfg", "circle.cfg"}) {
    const auto c = config::load_config(dir / name);
    CHECK_NOTHROW(config::validate(c));
  }
}

TEST_CASE("build-graph summary") {
  const auto dir = scratch("graph");
  const auto c = small_circle(dir);
  cli::build_graph(c, {});
  const auto summary = nlohmann::json::parse(slurp(dir / "graph_summary.json"));
  CHECK(summary["n"] == 100);
  CHECK(summary["symmetric"] == true);
  CHECK(summary["nnz"].get<int>() % 2 == 0);
  CHECK(cli::config_from_json(summary["config"]) == c);
  CHECK(fs::exists(dir / "edges.csv"));
  CHECK(fs::exists(dir / "graph.mgrf"));
}

TEST_CASE("train is idempotent and growing with delta_n = 0 matches it") {
  const auto a = scratch("train_a");
  const auto b = scratch("train_b");
  const auto g = scratch("train_g");
  auto c = small_circle(a);
  cli::train(c, {});
  c.output = b.string();
  cli::train(c, {});
  CHECK(slurp(a / "trace_seed3.csv") == slurp(b / "trace_seed3.csv"));
  CHECK(slurp(a / "model_seed3.mgnn") == slurp(b / "model_seed3.mgnn"));
  CHECK(!fs::exists(a / "timing.log"));

  c.output = g.string();
  c.delta_n = 0;
  cli::train_growing(c, {});
  CHECK(slurp(a / "trace_seed3.csv") == slurp(g / "trace_seed3.csv"));

  const auto report = nlohmann::json::parse(slurp(a / "report_seed3.json"));
  CHECK(report.contains("git_describe"));
  CHECK(report["report"]["n"] == 100);
  CHECK(report["report"]["wall_time"] == 0.0);
}

TEST_CASE("timing goes to the sidecar") {
  const auto dir = scratch("timing");
  const auto c = small_circle(dir);
  cli::RunOptions options;
  options.timing = true;
  cli::train(c, options);
  CHECK(fs::exists(dir / "timing.log"));
}

TEST_CASE("adaptive growth writes events") {
  const auto dir = scratch("adaptive");
  auto c = small_circle(dir);
  c.n0 = 40;
  c.delta_n = 20;
  c.delta_t = 5;
  c.adaptive = true;
  c.proxy_factor = 3;
  cli::train_growing(c, {});
  const auto events = slurp(dir / "growth_seed3.csv");
  CHECK(events.rfind("step,n_before,n_after,deviation,proxy_norm,epsilon,grew\n", 0) == 0);
  CHECK(std::count(events.begin(), events.end(), '\n') == 4);
}

TEST_CASE("gap sweep with a single grid point") {
  const auto dir = scratch("sweep");
  auto c = small_circle(dir);
  c.n_grid = {60};
  c.seeds = {1, 2};
  cli::gap_sweep(c, {});
  const auto summary = slurp(dir / "sweep.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 2);
  CHECK(summary.find("gap_over_train_acc") != std::string::npos);
  const auto runs = slurp(dir / "sweep_runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 3);
}

TEST_CASE("convergence of the constant eigenfunction is a zero row") {
  const auto dir = scratch("convergence");
  auto c = small_circle(dir);
  c.eigen_index = 0;
  c.n_grid = {50};
  cli::convergence(c, {});
  const auto runs = slurp(dir / "convergence_runs.csv");
  CHECK(runs.find("\n50,3,0.29999999999999999,0,0,") != std::string::npos);
  c.dataset = config::DatasetKind::mnist;
  CHECK_THROWS_AS(cli::convergence(c, {}), ConfigError);
}

TEST_CASE("transferability and baselines run") {
  const auto dir = scratch("transfer");
  auto c = small_circle(dir);
  c.n_grid = {20, 40};
  c.proxy_factor = 2;
  cli::transferability(c, {});
  CHECK(fs::exists(dir / "transferability.csv"));
  c.knn_k = 3;
  cli::baselines(c, {});
  const auto j = nlohmann::json::parse(slurp(dir / "baselines.json"));
  CHECK(j["mlp_vs_gnn_k1_max_abs_difference"] == 0.0);
  CHECK(j["accuracy"].contains("knn"));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  CHECK(run_tool("train --set bogus=1") == 2);
  CHECK(run_tool("train --set dataset=embeddings --set embeddings_path=/nonexistent.memb") == 2);
  CHECK(run_tool("train --set seeds=") == 2);
  CHECK(run_tool("pca-embed --set dataset=circle") == 2);
  CHECK(run_tool("build-graph --set dataset=circle --set n=30 --set output=/proc/forbidden/x") == 4);
  CHECK(run_tool("build-graph --set dataset=circle --set n=30 --set output=" + dir.string()) == 0);
  CHECK(run_tool("frobnicate") == 2);
  CHECK(run_tool("build-graph --config /nonexistent.cfg") == 2);
}
