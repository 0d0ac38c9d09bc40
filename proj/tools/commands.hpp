#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "geossl/config.hpp"
#include "geossl/train.hpp"

namespace geossl::cli {

struct RunOptions {
  std::size_t jobs = 1;
  bool timing = false;  // wall times go to traces and to timing.log
};

using Command = std::function<void(const config::ExperimentConfig&, const RunOptions&)>;

// Subcommand name to implementation, in help order.
const std::vector<std::pair<std::string, Command>>& commands();

void build_graph(const config::ExperimentConfig& config, const RunOptions& options);
void train(const config::ExperimentConfig& config, const RunOptions& options);
void train_growing(const config::ExperimentConfig& config, const RunOptions& options);
void gap_sweep(const config::ExperimentConfig& config, const RunOptions& options);
void convergence(const config::ExperimentConfig& config, const RunOptions& options);
void transferability(const config::ExperimentConfig& config, const RunOptions& options);
void pca_embed(const config::ExperimentConfig& config, const RunOptions& options);
void baselines(const config::ExperimentConfig& config, const RunOptions& options);

// Node source for the configured dataset.
std::unique_ptr<train::NodeSource> make_source(const config::ExperimentConfig& config);

// Node count for single-graph commands (n = 0 means every dataset node).
std::size_t node_count(const config::ExperimentConfig& config, const train::NodeSource& source);

// Key to value-string object; config_from_json inverts it.
nlohmann::ordered_json config_json(const config::ExperimentConfig& config);
config::ExperimentConfig config_from_json(const nlohmann::json& object);

// 0 success, 2 config, 3 numeric, 4 I/O; prints the message to stderr.
int exit_code_for(const std::exception& error);

}  // namespace geossl::cli
