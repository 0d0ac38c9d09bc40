#include "geossl/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "geossl/error.hpp"
#include "geossl/rng.hpp"

namespace geossl::embeddings {

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.num_classes == b.num_classes && a.labels == b.labels && a.split == b.split &&
         a.data.rows() == b.data.rows() && a.data.cols() == b.data.cols() && a.data == b.data;
}

void validate(const EmbeddingSet& set, bool require_both_splits) {
  const std::size_t n = set.size();
  if (set.labels.size() != n) {
    throw ShapeError("embedding set: " + std::to_string(set.labels.size()) + " labels for " + std::to_string(n) +
                     " rows");
  }
  if (set.has_split() && set.split.size() != n) {
    throw ShapeError("embedding set: split length " + std::to_string(set.split.size()) + " != " + std::to_string(n));
  }
  if (set.num_classes < 1 && n > 0) throw ParameterError("embedding set: class count must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (set.labels[i] < 1 || set.labels[i] > set.num_classes) {
      throw LabelRangeError("embedding set: label " + std::to_string(set.labels[i]) + " at row " +
                            std::to_string(i) + " outside 1.." + std::to_string(set.num_classes));
    }
  }
  if (!set.data.allFinite()) throw NumericError("embedding set: non-finite entry in data");
  if (require_both_splits) {
    if (!set.has_split()) throw ParameterError("embedding set: split tags required");
    const auto train = std::count(set.split.begin(), set.split.end(), Split::train);
    if (train == 0 || train == static_cast<std::ptrdiff_t>(n)) {
      throw ParameterError("embedding set: both train and test splits must be nonempty");
    }
  }
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> rows) {
  EmbeddingSet out;
  out.num_classes = set.num_classes;
  out.data.resize(static_cast<Eigen::Index>(rows.size()), set.data.cols());
  out.labels.reserve(rows.size());
  if (set.has_split()) out.split.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    if (i >= set.size()) throw ShapeError("subset: row index out of range");
    out.data.row(static_cast<Eigen::Index>(r)) = set.data.row(static_cast<Eigen::Index>(i));
    out.labels.push_back(set.labels[i]);
    if (set.has_split()) out.split.push_back(set.split[i]);
  }
  return out;
}

std::vector<std::size_t> indices_with(std::span<const Split> split, Split tag) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == tag) out.push_back(i);
  }
  return out;
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  validate(set);
  detail::ByteWriter w;
  w.bytes("MEMB");
  w.le<std::uint32_t>(kMembVersion);
  w.le<std::uint64_t>(set.size());
  w.le<std::uint64_t>(set.dim());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(set.num_classes));
  w.le<std::uint32_t>(set.has_split() ? 1u : 0u);
  for (Eigen::Index i = 0; i < set.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < set.data.cols(); ++j) w.le<float>(static_cast<float>(set.data(i, j)));
  }
  for (int label : set.labels) w.le<std::uint32_t>(static_cast<std::uint32_t>(label - 1));
  for (Split s : set.split) w.le<std::uint8_t>(static_cast<std::uint8_t>(s));
  w.write_to(path);
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  const std::string magic = r.bytes(4, "magic");
  if (magic != "MEMB") throw BadMagicError(path.string() + ": bad magic (expected MEMB)");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kMembVersion) {
    throw VersionError(path.string() + ": unsupported MEMB version " + std::to_string(version));
  }
  const auto n = r.le<std::uint64_t>("n");
  const auto f = r.le<std::uint64_t>("F");
  const auto c = r.le<std::uint32_t>("C");
  const auto flags = r.le<std::uint32_t>("flags");
  const bool with_split = (flags & 1u) != 0;

  const std::size_t values = detail::checked_mul(n, f, "data");
  r.require(detail::checked_mul(values, 4, "data"), "data payload");
  EmbeddingSet set;
  set.num_classes = static_cast<int>(c);
  set.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  for (Eigen::Index i = 0; i < set.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < set.data.cols(); ++j) set.data(i, j) = r.le<float>("data");
  }
  r.require(detail::checked_mul(n, 4, "labels"), "label payload");
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto raw = r.le<std::uint32_t>("labels");
    if (raw >= c) {
      throw LabelRangeError(path.string() + ": label " + std::to_string(raw) + " at row " + std::to_string(i) +
                            " >= class count " + std::to_string(c));
    }
    set.labels[i] = static_cast<int>(raw) + 1;
  }
  if (with_split) {
    r.require(n, "split payload");
    set.split.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto tag = r.le<std::uint8_t>("split");
      if (tag > 1) throw FormatError(path.string() + ": split tag " + std::to_string(tag) + " is not 0 or 1");
      set.split[i] = static_cast<Split>(tag);
    }
  }
  if (!set.data.allFinite()) throw NumericError(path.string() + ": non-finite entry in data");
  return set;
}

void save_embeddings_csv(const EmbeddingSet& set, const std::filesystem::path& path) {
  validate(set);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "id,label,split";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",f" << j;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << i << ',' << set.labels[i] << ',';
    if (set.has_split()) out << (set.split[i] == Split::train ? "train" : "test");
    for (std::size_t j = 0; j < set.dim(); ++j) {
      out << ',' << set.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

EmbeddingSet load_embeddings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw TruncatedError(path.string() + ": missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label" || header[2] != "split") {
    throw BadMagicError(path.string() + ": CSV header must start with id,label,split");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[3 + j] != "f" + std::to_string(j)) throw FormatError(path.string() + ": bad feature column name");
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<Split> split;
  bool any_split = false;
  bool any_missing = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    try {
      labels.push_back(std::stoi(fields[1]));
      std::vector<double> row(dim);
      for (std::size_t j = 0; j < dim; ++j) row[j] = std::stod(fields[3 + j]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": unparsable number");
    }
    if (fields[2] == "train") {
      split.push_back(Split::train);
      any_split = true;
    } else if (fields[2] == "test") {
      split.push_back(Split::test);
      any_split = true;
    } else if (fields[2].empty()) {
      split.push_back(Split::train);
      any_missing = true;
    } else {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": split must be train or test");
    }
  }
  if (any_split && any_missing) throw FormatError(path.string() + ": split column partially filled");
  EmbeddingSet set;
  set.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      set.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  set.labels = std::move(labels);
  if (any_split) set.split = std::move(split);
  set.num_classes = set.labels.empty() ? 0 : *std::max_element(set.labels.begin(), set.labels.end());
  for (int label : set.labels) {
    if (label < 1) throw LabelRangeError(path.string() + ": CSV labels are 1-based");
  }
  validate(set);
  return set;
}

EmbeddingSet load_any(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_embeddings_csv(path);
  return load_embeddings(path);
}

std::vector<Split> assign_split(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("assign_split: train fraction must lie in (0, 1)");
  }
  const auto train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (train == 0 || train >= n) {
    throw ParameterError("assign_split: degenerate split (" + std::to_string(train) + " train of " +
                         std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<Split> tags(n, Split::test);
  for (std::size_t i = 0; i < train; ++i) tags[order[i]] = Split::train;
  return tags;
}

}  // namespace geossl::embeddings
