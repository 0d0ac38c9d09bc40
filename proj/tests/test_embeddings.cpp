#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "geossl/embeddings.hpp"
#include "geossl/error.hpp"
#include "geossl/raw_dataset.hpp"
#include "geossl/rng.hpp"

using namespace geossl;
using namespace geossl::embeddings;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "geossl_test_embeddings";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingSet random_set(Rng& rng, bool with_split) {
  EmbeddingSet set;
  const auto n = static_cast<Eigen::Index>(1 + rng.below(40));
  const auto f = static_cast<Eigen::Index>(1 + rng.below(12));
  set.num_classes = static_cast<int>(1 + rng.below(9));
  set.data.resize(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < f; ++j) set.data(i, j) = static_cast<float>(rng.normal() * 10.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) set.labels.push_back(static_cast<int>(1 + rng.below(static_cast<std::uint64_t>(set.num_classes))));
  if (with_split) {
    for (Eigen::Index i = 0; i < n; ++i) set.split.push_back(rng.below(2) ? Split::test : Split::train);
  }
  return set;
}

void put_be32(std::vector<char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t n_images, std::uint32_t n_labels,
               std::uint32_t image_magic = 0x803) {
  std::vector<char> img;
  put_be32(img, image_magic);
  put_be32(img, n_images);
  put_be32(img, 2);
  put_be32(img, 3);
  for (std::uint32_t i = 0; i < n_images * 6; ++i) img.push_back(static_cast<char>(i % 251));
  write_bytes(images, img);
  std::vector<char> lab;
  put_be32(lab, 0x801);
  put_be32(lab, n_labels);
  for (std::uint32_t i = 0; i < n_labels; ++i) lab.push_back(static_cast<char>(i % 10));
  write_bytes(labels, lab);
}

}  // namespace

TEST_CASE("MEMB round-trip over randomized sets") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto set = random_set(rng, trial % 2 == 0);
    const auto path = scratch("roundtrip.memb");
    save_embeddings(set, path);
    const auto back = load_embeddings(path);
    CHECK(back == set);
    CHECK(back.num_classes == set.num_classes);
  }
}

TEST_CASE("MEMB file size and byte determinism") {
  EmbeddingSet set;
  set.data = Eigen::MatrixXd::Constant(1, 1, 0.5);
  set.labels = {1};
  set.split = {Split::train};
  set.num_classes = 1;
  const auto a = scratch("one_a.memb");
  const auto b = scratch("one_b.memb");
  save_embeddings(set, a);
  save_embeddings(set, b);
  CHECK(fs::file_size(a) == kMembHeaderBytes + 4 + 4 + 1);
  CHECK(read_bytes(a) == read_bytes(b));
  const auto bytes = read_bytes(a);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MEMB");
  CHECK(static_cast<unsigned char>(bytes[kMembHeaderBytes - 4]) == 1);  // flags bit0
}

TEST_CASE("MEMB rejects corrupt files with distinct errors") {
  Rng rng(11);
  auto set = random_set(rng, true);
  set.num_classes = 3;
  for (auto& l : set.labels) l = 1 + (l % 3);
  const auto good = scratch("good.memb");
  save_embeddings(set, good);
  const auto bytes = read_bytes(good);

  auto magic = bytes;
  magic[0] = 'X';
  magic[1] = 'X';
  magic[2] = 'X';
  magic[3] = 'X';
  write_bytes(scratch("magic.memb"), magic);
  CHECK_THROWS_AS(load_embeddings(scratch("magic.memb")), BadMagicError);

  auto version = bytes;
  version[4] = 2;
  write_bytes(scratch("version.memb"), version);
  CHECK_THROWS_AS(load_embeddings(scratch("version.memb")), VersionError);

  auto truncated = bytes;
  truncated.resize(kMembHeaderBytes + 3);
  write_bytes(scratch("truncated.memb"), truncated);
  CHECK_THROWS_AS(load_embeddings(scratch("truncated.memb")), TruncatedError);

  auto label = bytes;
  const std::size_t label_offset = kMembHeaderBytes + 4 * set.size() * set.dim();
  label[label_offset] = 3;  // 0-based 3 means class 4 of 3
  write_bytes(scratch("label.memb"), label);
  CHECK_THROWS_AS(load_embeddings(scratch("label.memb")), LabelRangeError);

  CHECK_THROWS_AS(load_embeddings(scratch("does_not_exist.memb")), IoError);
}

TEST_CASE("saving to an unwritable path raises an I/O error") {
  Rng rng(3);
  const auto set = random_set(rng, false);
  CHECK_THROWS_AS(save_embeddings(set, "/nonexistent_dir/x/y.memb"), IoError);
}

TEST_CASE("CSV round-trip and dispatch") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto set = random_set(rng, trial % 2 == 1);
    const auto path = scratch("set.csv");
    save_embeddings_csv(set, path);
    const auto back = load_any(path);
    CHECK(back.labels == set.labels);
    CHECK(back.split == set.split);
    CHECK((back.data - set.data).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("CSV labels are 1-based") {
  const auto path = scratch("zero_label.csv");
  std::ofstream(path) << "id,label,split,f0\n0,0,train,1.5\n";
  CHECK_THROWS_AS(load_embeddings_csv(path), LabelRangeError);
}

TEST_CASE("validate catches broken invariants") {
  EmbeddingSet set;
  set.data = Eigen::MatrixXd::Zero(2, 2);
  set.labels = {1, 2};
  set.num_classes = 2;
  CHECK_NOTHROW(validate(set));
  set.split = {Split::train, Split::train};
  CHECK_THROWS_AS(validate(set, true), ParameterError);
  set.split = {Split::train};
  CHECK_THROWS_AS(validate(set), ShapeError);
  set.split.clear();
  set.data(0, 0) = std::nan("");
  CHECK_THROWS_AS(validate(set), NumericError);
}

TEST_CASE("assign_split counts and determinism") {
  auto count = [](const std::vector<Split>& s) { return std::count(s.begin(), s.end(), Split::train); };
  CHECK(count(assign_split(10, 0.5, 1)) == 5);
  const auto s = assign_split(100, 0.9, 1);
  CHECK(count(s) == 90);
  CHECK(assign_split(100, 0.9, 1) == s);
  CHECK(assign_split(100, 0.9, 2) != s);
  CHECK_THROWS_AS(assign_split(10, 1.0, 1), ParameterError);
  CHECK_THROWS_AS(assign_split(10, 0.0, 1), ParameterError);
  CHECK_THROWS_AS(assign_split(3, 0.01, 1), ParameterError);
}

TEST_CASE("IDX loader reads images and shifts labels") {
  const auto images = scratch("img.idx");
  const auto labels = scratch("lab.idx");
  write_idx(images, labels, 10, 10);
  const auto raw = load_idx_images(images, labels);
  CHECK(raw.size() == 10);
  CHECK(raw.height == 2);
  CHECK(raw.width == 3);
  CHECK(raw.labels[0] == 1);
  CHECK(raw.labels[9] == 10);
  CHECK(raw.row(1)[0] == 6);
}

TEST_CASE("IDX loader errors") {
  const auto images = scratch("img_bad.idx");
  const auto labels = scratch("lab_bad.idx");
  write_idx(images, labels, 9, 10);
  CHECK_THROWS_AS(load_idx_images(images, labels), CountMismatchError);
  write_idx(images, labels, 10, 10, 0);
  CHECK_THROWS_AS(load_idx_images(images, labels), FormatError);
}

TEST_CASE("standard MNIST files have the expected shape") {
  const char* env = std::getenv("GEOSSL_MNIST_DIR");
  const fs::path dir = env ? env : "/root/data/mnist";
  if (!fs::exists(dir / "train-images-idx3-ubyte")) {
    MESSAGE("MNIST not found, skipping");
    return;
  }
  const auto raw = load_idx_images(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  CHECK(raw.size() == 60000);
  CHECK(raw.height == 28);
  CHECK(raw.width == 28);
}

TEST_CASE("PCA of exact low-rank data preserves pairwise distances") {
  Rng rng(21);
  const Eigen::Index n = 30, d = 10, r = 3;
  Eigen::MatrixXd basis(r, d), coeff(n, r);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = rng.normal();
  const Eigen::MatrixXd data = coeff * basis;
  for (std::size_t f : {3u, 5u}) {
    const auto model = pca_fit(data, f);
    const Eigen::MatrixXd z = pca_transform(model, data);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        CHECK(std::abs((z.row(i) - z.row(j)).norm() - (data.row(i) - data.row(j)).norm()) < 1e-8);
      }
    }
  }
}

TEST_CASE("PCA of points on a line finds the line") {
  Eigen::MatrixXd data(5, 2);
  for (int i = 0; i < 5; ++i) data.row(i) << i - 2.0, 2.0 * (i - 2.0);
  const auto model = pca_fit(data, 1);
  const Eigen::Vector2d dir = Eigen::Vector2d(1, 2).normalized();
  CHECK(std::abs(std::abs(model.components.col(0).dot(dir)) - 1.0) < 1e-12);
  CHECK(model.components.col(0).cwiseAbs().maxCoeff() == doctest::Approx(model.components.col(0).maxCoeff()));
}

TEST_CASE("PCA errors") {
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(4, 3), 4), ParameterError);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(6, 3), 2), DegenerateError);
}

TEST_CASE("PCA beats random orthonormal frames and has orthonormal components") {
  Rng rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = 40, d = 8;
    const std::size_t f = 3;
    Eigen::MatrixXd data(n, d);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.normal() * (1.0 + (i % d));
    const auto model = pca_fit(data, f);
    const Eigen::MatrixXd gram = model.components.transpose() * model.components;
    CHECK((gram - Eigen::MatrixXd::Identity(f, f)).cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    const auto recon_error = [&](const Eigen::MatrixXd& frame) {
      return (centered - centered * frame * frame.transpose()).squaredNorm();
    };
    const double best = recon_error(model.components);
    for (int k = 0; k < 20; ++k) {
      Eigen::MatrixXd g(d, static_cast<Eigen::Index>(f));
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
      const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                                Eigen::MatrixXd::Identity(d, static_cast<Eigen::Index>(f));
      CHECK(best <= recon_error(q) + 1e-9);
    }
  }
}

TEST_CASE("pca_embed keeps labels and split tags") {
  RawDataset raw;
  raw.height = 2;
  raw.width = 2;
  Rng rng(4);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 4; ++j) raw.pixels.push_back(static_cast<std::uint8_t>(rng.below(256)));
    raw.labels.push_back(1 + i % 3);
    raw.split.push_back(i < 8 ? Split::train : Split::test);
  }
  PcaOptions options;
  options.components = 2;
  const auto set = pca_embed(raw, options);
  CHECK(set.size() == 12);
  CHECK(set.dim() == 2);
  CHECK(set.labels == raw.labels);
  CHECK(set.split == raw.split);
  CHECK(set.num_classes == 3);
}
