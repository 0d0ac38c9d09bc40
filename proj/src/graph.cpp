#include "geossl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>

#include "binary_io.hpp"
#include "geossl/error.hpp"
#include "geossl/parallel.hpp"

namespace geossl::graph {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t t = 0; t < dim; ++t) {
    const double diff = a[t] - b[t];
    s += diff * diff;
  }
  return s;
}

double kernel_from_squared(double sq, double sigma) { return std::exp(-sq / (2.0 * sigma * sigma)); }

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("kernel width sigma must be positive and finite");
}

// Assembles a CSR matrix from per-row sorted column lists and values.
SparseMatrix assemble(std::size_t n, const std::vector<std::vector<std::uint32_t>>& cols,
                      const std::vector<std::vector<double>>& vals) {
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXi sizes(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) sizes(static_cast<Eigen::Index>(i)) = static_cast<int>(cols[i].size());
  m.reserve(sizes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < cols[i].size(); ++e) {
      m.insert(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[i][e])) = vals[i][e];
    }
  }
  m.makeCompressed();
  return m;
}

}  // namespace

std::string_view to_string(ConstructionMode mode) {
  switch (mode) {
    case ConstructionMode::dense: return "dense";
    case ConstructionMode::knn_exact: return "knn_exact";
    case ConstructionMode::knn_ann: return "knn_ann";
  }
  return "unknown";
}

ConstructionMode parse_construction_mode(std::string_view name) {
  if (name == "dense") return ConstructionMode::dense;
  if (name == "knn_exact" || name == "knn-exact") return ConstructionMode::knn_exact;
  if (name == "knn_ann" || name == "knn-ann") return ConstructionMode::knn_ann;
  throw ParameterError("unknown graph construction mode '" + std::string(name) + "'");
}

double gaussian_weight(std::span<const double> xi, std::span<const double> xj, double sigma) {
  check_sigma(sigma);
  if (xi.size() != xj.size()) {
    throw ShapeError("gaussian_weight: vector lengths differ (" + std::to_string(xi.size()) + " vs " +
                     std::to_string(xj.size()) + ")");
  }
  return kernel_from_squared(squared_distance(xi.data(), xj.data(), xi.size()), sigma);
}

std::vector<std::uint32_t> exact_knn(const Eigen::MatrixXd& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k >= n) throw ParameterError("exact_knn: need 0 < k < n");
  std::vector<std::uint32_t> out(n * k);
  const Eigen::VectorXd norms = points.rowwise().squaredNorm();
  constexpr std::size_t kBlock = 128;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_for(0, blocks, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t rows = std::min(kBlock, n - lo);
    const auto lo_i = static_cast<Eigen::Index>(lo);
    const auto rows_i = static_cast<Eigen::Index>(rows);
    // Squared distances up to rounding; used only to rank candidates.
    Eigen::MatrixXd dist = -2.0 * (points.middleRows(lo_i, rows_i) * points.transpose());
    dist.colwise() += norms.segment(lo_i, rows_i);
    dist.rowwise() += norms.transpose();
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = lo + r;
      cand.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) cand.emplace_back(dist(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)),
                                      static_cast<std::uint32_t>(j));
      }
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
      std::sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
      for (std::size_t t = 0; t < k; ++t) out[i * k + t] = cand[t].second;
    }
  });
  return out;
}

GeometricGraph build_graph(const Eigen::MatrixXd& points, const BuildOptions& options) {
  check_sigma(options.sigma);
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw DegenerateError("build_graph: degenerate graph, need at least 2 nodes");
  if (!points.allFinite()) throw NumericError("build_graph: non-finite embedding");
  if (options.mode != ConstructionMode::dense && (options.k == 0 || options.k >= n)) {
    throw ParameterError("build_graph: neighbor budget k=" + std::to_string(options.k) + " must satisfy 0 < k < n=" +
                         std::to_string(n));
  }
  if (options.mode == ConstructionMode::dense && options.k >= n) {
    throw ParameterError("build_graph: k must be 0 (dense) or below n");
  }

  GeometricGraph g;
  g.sigma = options.sigma;
  g.mode = options.mode;
  g.k = options.mode == ConstructionMode::dense ? 0 : options.k;

  const RowMatrix rows = points;
  const auto dim = static_cast<std::size_t>(points.cols());
  auto row_ptr = [&](std::size_t i) { return rows.data() + i * dim; };

  std::vector<std::vector<std::uint32_t>> cols(n);
  std::vector<std::vector<double>> vals(n);

  if (options.mode == ConstructionMode::dense) {
    parallel_for(0, n, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = kernel_from_squared(squared_distance(row_ptr(i), row_ptr(j), dim), options.sigma);
        if (w >= options.weight_floor && w > 0.0) {
          cols[i].push_back(static_cast<std::uint32_t>(j));
          vals[i].push_back(w);
        }
      }
    });
  } else {
    g.neighbors = options.mode == ConstructionMode::knn_exact ? exact_knn(points, options.k)
                                                             : ann_knn(points, options.k, options.ann);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t j : g.neighbors_of(i)) {
        cols[i].push_back(j);
        cols[j].push_back(static_cast<std::uint32_t>(i));
      }
    }
    parallel_for(0, n, [&](std::size_t i) {
      auto& c = cols[i];
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      vals[i].resize(c.size());
      for (std::size_t e = 0; e < c.size(); ++e) {
        vals[i][e] = kernel_from_squared(squared_distance(row_ptr(i), row_ptr(c[e]), dim), options.sigma);
      }
    });
  }
  g.adjacency = assemble(n, cols, vals);
  return g;
}

GeometricGraph build_graph(const embeddings::EmbeddingSet& set, const BuildOptions& options) {
  embeddings::validate(set);
  return build_graph(set.data, options);
}

LaplacianOperator laplacian(const SparseMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("laplacian: adjacency must be square");
  const auto n = static_cast<std::size_t>(adjacency.rows());
  LaplacianOperator op;
  op.degree = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<std::vector<std::uint32_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double d = 0.0;
    for (SparseMatrix::InnerIterator it(adjacency, row); it; ++it) {
      if (it.col() == row) throw ParameterError("laplacian: adjacency has a nonzero diagonal");
      d += it.value();
    }
    op.degree(row) = d;
    bool placed = false;
    for (SparseMatrix::InnerIterator it(adjacency, row); it; ++it) {
      if (!placed && it.col() > row) {
        cols[i].push_back(static_cast<std::uint32_t>(i));
        vals[i].push_back(d);
        placed = true;
      }
      cols[i].push_back(static_cast<std::uint32_t>(it.col()));
      vals[i].push_back(-it.value());
    }
    if (!placed) {
      cols[i].push_back(static_cast<std::uint32_t>(i));
      vals[i].push_back(d);
    }
  }
  op.matrix = assemble(n, cols, vals);
  return op;
}

LaplacianOperator laplacian(const GeometricGraph& graph) { return laplacian(graph.adjacency); }

double apply_extension_operator(const Eigen::MatrixXd& samples, std::span<const double> f,
                                std::span<const double> u, double f_u, double sigma_n) {
  check_sigma(sigma_n);
  const auto n = static_cast<std::size_t>(samples.rows());
  if (n == 0) throw ParameterError("apply_extension_operator: empty sample set");
  if (f.size() != n) throw ShapeError("apply_extension_operator: one signal value per sample required");
  if (u.size() != static_cast<std::size_t>(samples.cols())) throw ShapeError("apply_extension_operator: query dim");
  double mass = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t t = 0; t < u.size(); ++t) {
      const double diff = u[t] - samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      sq += diff * diff;
    }
    const double w = kernel_from_squared(sq, sigma_n);
    mass += w;
    weighted += f[i] * w;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return f_u * (inv_n * mass) - inv_n * weighted;
}

Eigen::VectorXd apply_extension_operator_at_samples(const Eigen::MatrixXd& samples, std::span<const double> f,
                                                    double sigma_n) {
  check_sigma(sigma_n);
  const auto n = static_cast<std::size_t>(samples.rows());
  if (n == 0) throw ParameterError("apply_extension_operator: empty sample set");
  if (f.size() != n) throw ShapeError("apply_extension_operator: one signal value per sample required");
  const RowMatrix rows = samples;
  const auto dim = static_cast<std::size_t>(samples.cols());
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  parallel_for(0, n, [&](std::size_t j) {
    const double* u = rows.data() + j * dim;
    double mass = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = kernel_from_squared(squared_distance(u, rows.data() + i * dim, dim), sigma_n);
      mass += w;
      weighted += f[i] * w;
    }
    out(static_cast<Eigen::Index>(j)) = f[j] * (inv_n * mass) - inv_n * weighted;
  });
  return out;
}

double knn_recall(std::span<const std::uint32_t> approx, std::span<const std::uint32_t> exact, std::size_t k) {
  if (k == 0) throw ParameterError("knn_recall: k must be positive");
  if (approx.size() != exact.size() || approx.size() % k != 0) {
    throw ShapeError("knn_recall: neighbor lists have mismatched sizes");
  }
  const std::size_t n = approx.size() / k;
  if (n == 0) throw ShapeError("knn_recall: empty neighbor lists");
  double total = 0.0;
  std::vector<std::uint32_t> a(k), e(k), common;
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(approx.begin() + static_cast<std::ptrdiff_t>(i * k), k, a.begin());
    std::copy_n(exact.begin() + static_cast<std::ptrdiff_t>(i * k), k, e.begin());
    std::sort(a.begin(), a.end());
    std::sort(e.begin(), e.end());
    common.clear();
    std::set_intersection(a.begin(), a.end(), e.begin(), e.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

double knn_recall(const GeometricGraph& approx, const GeometricGraph& exact) {
  if (approx.n() != exact.n()) throw ShapeError("knn_recall: graphs have different node counts");
  if (approx.k != exact.k || approx.k == 0) throw ParameterError("knn_recall: graphs need the same nonzero k");
  return knn_recall(approx.neighbors, exact.neighbors, approx.k);
}

GraphStats graph_stats(const GeometricGraph& graph) {
  GraphStats s;
  s.n = graph.n();
  s.nnz = graph.nnz();
  const SparseMatrix t = graph.adjacency.transpose();
  s.symmetric = (graph.adjacency - t).norm() == 0.0;
  std::vector<double> deg(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    double d = 0.0;
    for (SparseMatrix::InnerIterator it(graph.adjacency, static_cast<Eigen::Index>(i)); it; ++it) d += it.value();
    deg[i] = d;
  }
  std::sort(deg.begin(), deg.end());
  auto q = [&](double p) {
    if (deg.empty()) return 0.0;
    const double pos = p * static_cast<double>(deg.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, deg.size() - 1);
    return deg[lo] + (pos - static_cast<double>(lo)) * (deg[hi] - deg[lo]);
  };
  s.degree_min = q(0.0);
  s.degree_q25 = q(0.25);
  s.degree_median = q(0.5);
  s.degree_q75 = q(0.75);
  s.degree_max = q(1.0);
  return s;
}

void write_edge_list_csv(const GeometricGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "i,j,w\n";
  for (Eigen::Index i = 0; i < graph.adjacency.rows(); ++i) {
    for (SparseMatrix::InnerIterator it(graph.adjacency, i); it; ++it) {
      if (it.col() > i) out << i << ',' << it.col() << ',' << it.value() << '\n';
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_adjacency_binary(const GeometricGraph& graph, const std::filesystem::path& path) {
  const SparseMatrix& a = graph.adjacency;
  detail::ByteWriter w;
  w.bytes("MGRF");
  w.le<std::uint32_t>(kMgrfVersion);
  w.le<std::uint64_t>(static_cast<std::uint64_t>(a.rows()));
  w.le<std::uint64_t>(static_cast<std::uint64_t>(a.nonZeros()));
  for (Eigen::Index i = 0; i <= a.rows(); ++i) w.le<std::uint64_t>(static_cast<std::uint64_t>(a.outerIndexPtr()[i]));
  for (Eigen::Index e = 0; e < a.nonZeros(); ++e) w.le<std::uint32_t>(static_cast<std::uint32_t>(a.innerIndexPtr()[e]));
  for (Eigen::Index e = 0; e < a.nonZeros(); ++e) w.le<double>(a.valuePtr()[e]);
  w.write_to(path);
}

SparseMatrix read_adjacency_binary(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  if (r.bytes(4, "magic") != "MGRF") throw BadMagicError(path.string() + ": bad magic (expected MGRF)");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kMgrfVersion) throw VersionError(path.string() + ": unsupported MGRF version");
  const auto n = r.le<std::uint64_t>("n");
  const auto nnz = r.le<std::uint64_t>("nnz");
  r.require(detail::checked_mul(n + 1, 8, "row_ptr") + detail::checked_mul(nnz, 12, "entries"), "CSR payload");
  std::vector<std::vector<std::uint32_t>> cols(n);
  std::vector<std::vector<double>> vals(n);
  std::vector<std::uint64_t> ptr(n + 1);
  for (auto& p : ptr) p = r.le<std::uint64_t>("row_ptr");
  if (ptr.front() != 0 || ptr.back() != nnz) throw FormatError(path.string() + ": inconsistent row pointers");
  std::vector<std::uint32_t> col(nnz);
  for (auto& c : col) {
    c = r.le<std::uint32_t>("col");
    if (c >= n) throw FormatError(path.string() + ": column index out of range");
  }
  std::vector<double> val(nnz);
  for (auto& v : val) v = r.le<double>("w");
  for (std::size_t i = 0; i < n; ++i) {
    if (ptr[i] > ptr[i + 1]) throw FormatError(path.string() + ": row pointers decrease");
    for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
      if (e > ptr[i] && col[e] <= col[e - 1]) throw FormatError(path.string() + ": unsorted columns");
      cols[i].push_back(col[e]);
      vals[i].push_back(val[e]);
    }
  }
  return assemble(n, cols, vals);
}

}  // namespace geossl::graph
