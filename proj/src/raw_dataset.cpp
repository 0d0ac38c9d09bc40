#include "geossl/raw_dataset.hpp"

#include <algorithm>
#include <string>

#include <Eigen/SVD>

#include "binary_io.hpp"
#include "geossl/error.hpp"

namespace geossl::embeddings {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

RawDataset load_idx_images(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  auto images = detail::ByteReader::from_file(images_path);
  auto labels = detail::ByteReader::from_file(labels_path);

  const auto image_magic = images.be_u32("magic");
  if (image_magic != kIdxImagesMagic) {
    throw BadMagicError(images_path.string() + ": IDX image magic mismatch");
  }
  const auto label_magic = labels.be_u32("magic");
  if (label_magic != kIdxLabelsMagic) {
    throw BadMagicError(labels_path.string() + ": IDX label magic mismatch");
  }
  const std::uint32_t count = images.be_u32("count");
  const std::uint32_t rows = images.be_u32("rows");
  const std::uint32_t cols = images.be_u32("cols");
  const std::uint32_t label_count = labels.be_u32("count");
  if (count != label_count) {
    throw CountMismatchError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                             std::to_string(label_count) + " labels");
  }

  RawDataset raw;
  raw.height = rows;
  raw.width = cols;
  raw.channels = 1;
  const std::size_t bytes = detail::checked_mul(detail::checked_mul(count, rows, "IDX"), cols, "IDX");
  images.require(bytes, "image payload");
  raw.pixels.assign(reinterpret_cast<const std::uint8_t*>(images.cursor()),
                    reinterpret_cast<const std::uint8_t*>(images.cursor()) + bytes);
  labels.require(count, "label payload");
  raw.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) raw.labels[i] = static_cast<int>(labels.le<std::uint8_t>("labels")) + 1;
  return raw;
}

RawDataset concat_train_test(const RawDataset& train, const RawDataset& test) {
  if (train.row_length() != test.row_length()) throw ShapeError("concat_train_test: image shapes differ");
  RawDataset out;
  out.height = train.height;
  out.width = train.width;
  out.channels = train.channels;
  out.pixels = train.pixels;
  out.pixels.insert(out.pixels.end(), test.pixels.begin(), test.pixels.end());
  out.labels = train.labels;
  out.labels.insert(out.labels.end(), test.labels.begin(), test.labels.end());
  out.split.assign(train.size(), Split::train);
  out.split.insert(out.split.end(), test.size(), Split::test);
  return out;
}

RawDataset load_idx_directory(const std::filesystem::path& dir) {
  const auto train = load_idx_images(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  const auto test = load_idx_images(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  return concat_train_test(train, test);
}

Eigen::MatrixXd to_matrix(const RawDataset& raw, double pixel_scale) {
  const auto n = static_cast<Eigen::Index>(raw.size());
  const auto d = static_cast<Eigen::Index>(raw.row_length());
  if (raw.pixels.size() != raw.size() * raw.row_length()) throw ShapeError("raw dataset: pixel count mismatch");
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t* row = raw.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = pixel_scale * row[j];
  }
  return m;
}

PcaModel pca_fit(const Eigen::MatrixXd& data, std::size_t components) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (components == 0 || components > std::min(n, d)) {
    throw ParameterError("pca: target dimension " + std::to_string(components) + " exceeds min(n, dim) = " +
                         std::to_string(std::min(n, d)));
  }
  PcaModel model;
  model.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) throw DegenerateError("pca: data has zero variance");
  const auto f = static_cast<Eigen::Index>(components);
  model.singular_values = sv.head(f);
  model.components = svd.matrixV().leftCols(f);
  for (Eigen::Index c = 0; c < f; ++c) {
    Eigen::Index arg = 0;
    model.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(arg, c) < 0.0) model.components.col(c) *= -1.0;
  }
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.mean.size()) throw ShapeError("pca_transform: input dimension mismatch");
  return (data.rowwise() - model.mean) * model.components;
}

EmbeddingSet pca_embed(const RawDataset& raw, const PcaOptions& options) {
  if (raw.labels.size() != raw.size() || (!raw.split.empty() && raw.split.size() != raw.size())) {
    throw ShapeError("pca_embed: label/split counts do not match image count");
  }
  const Eigen::MatrixXd data = to_matrix(raw, options.pixel_scale);
  const PcaModel model = pca_fit(data, options.components);
  EmbeddingSet set;
  set.data = pca_transform(model, data);
  set.labels = raw.labels;
  set.split = raw.split;
  set.num_classes = raw.labels.empty() ? 0 : *std::max_element(raw.labels.begin(), raw.labels.end());
  validate(set);
  return set;
}

}  // namespace geossl::embeddings
