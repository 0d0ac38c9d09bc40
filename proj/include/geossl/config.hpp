#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geossl/graph.hpp"
#include "geossl/manifold.hpp"
#include "geossl/nn.hpp"
#include "geossl/train.hpp"

namespace geossl::config {

enum class DatasetKind { circle, sphere, mnist, fmnist, embeddings };
std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

// Every knob of an experiment. Text form is one `key = value` per line;
// lists are comma separated.
struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::sphere;
  std::string embeddings_path;              // dataset = embeddings
  std::string data_dir = "/root/data/mnist";  // dataset = mnist | fmnist
  std::size_t pca_components = 128;
  std::string label_rule = "hemisphere";    // hemisphere | sector
  int classes = 2;                          // sector count
  std::size_t n = 1000;                     // 0 selects every node of a dataset
  double train_fraction = 0.5;

  double sigma = 1.0;
  std::size_t k = 0;
  graph::ConstructionMode graph_mode = graph::ConstructionMode::dense;
  double weight_floor = 1e-12;
  std::size_t ann_trees = 32;
  std::size_t ann_leaf_size = 32;
  std::size_t ann_refine_iterations = 3;
  std::size_t ann_refine_fanout = 16;
  nn::LaplacianScale laplacian_scale = nn::LaplacianScale::inverse_n;
  std::size_t matrix_free_above = 6000;

  nn::Architecture arch = nn::Architecture::polynomial;
  std::vector<std::size_t> hidden{16};
  std::size_t taps = 2;
  nn::Activation activation = nn::Activation::relu;

  nn::LossKind loss = nn::LossKind::softmax_cross_entropy;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double lr = 0.01;
  std::size_t steps = 300;
  std::size_t batch_size = 256;  // rows per loss chunk; training is full-graph
  std::size_t eval_interval = 10;

  std::size_t n0 = 200;
  std::size_t delta_n = 0;
  std::size_t delta_t = 1;
  train::GrowthStyle growth_style = train::GrowthStyle::fresh_resample;
  bool adaptive = false;
  std::optional<double> epsilon;
  std::size_t proxy_factor = 10;

  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> n_grid{250, 500, 1000, 2000};

  std::string sigma_rule = "fixed";  // fixed | schedule
  double sigma_c = 1.5;
  std::size_t eigen_index = 4;
  std::size_t knn_k = 10;

  std::string output = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// Parses `key = value` text. Blank lines and lines starting with '#' or ';'
// are skipped. Throws ConfigError on unknown keys, duplicates or bad values.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Applies one `key=value` override.
void apply_override(ExperimentConfig& config, std::string_view assignment);

// Canonical text form; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

std::vector<std::string> known_keys();

// Throws ConfigError when any field is out of range.
void validate(const ExperimentConfig& config);

train::GraphSpec graph_spec(const ExperimentConfig& config);
train::ModelSpec model_spec(const ExperimentConfig& config);
// Fixed schedules train on n nodes; growing ones start at n0.
train::TrainSchedule schedule(const ExperimentConfig& config, std::uint64_t seed, train::ScheduleMode mode);
manifold::LabelRule label_rule(const ExperimentConfig& config);
train::SigmaRule sigma_rule(const ExperimentConfig& config);

}  // namespace geossl::config
