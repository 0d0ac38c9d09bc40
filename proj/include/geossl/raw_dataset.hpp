#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "geossl/embeddings.hpp"

namespace geossl::embeddings {

// Raw image rows (one flattened image per row) with 1-based labels.
struct RawDataset {
  std::vector<std::uint8_t> pixels;  // n * (height * width * channels), row-major
  std::vector<int> labels;
  std::vector<Split> split;  // optional
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const { return labels.size(); }
  std::size_t row_length() const { return height * width * channels; }
  const std::uint8_t* row(std::size_t i) const { return pixels.data() + i * row_length(); }
};

// IDX image/label pair (big-endian magic 0x00000803 and 0x00000801).
// Labels are shifted from 0-based to {1..C}.
RawDataset load_idx_images(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path);

// Stacks `train` above `test` and tags rows with their origin split.
RawDataset concat_train_test(const RawDataset& train, const RawDataset& test);

// Loads the standard four-file MNIST/Fashion-MNIST layout from `dir`.
RawDataset load_idx_directory(const std::filesystem::path& dir);

struct PcaOptions {
  std::size_t components = 128;
  double pixel_scale = 1.0 / 255.0;  // bytes are mapped to [0, 1] before centering
};

// Principal directions of a data matrix by thin SVD of the centered rows.
struct PcaModel {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;        // input_dim x F, orthonormal columns
  Eigen::VectorXd singular_values;   // descending, length F
};

// Fits on all rows. Each component is sign-fixed so its largest-magnitude
// entry is positive.
PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t components);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data);

Eigen::MatrixXd to_matrix(const RawDataset& raw, double pixel_scale);

EmbeddingSet pca_embed(const RawDataset& raw, const PcaOptions& options);

}  // namespace geossl::embeddings
